#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace seqlearn {

enum class Phase { pretrain, sequential };

std::string to_string(Phase phase);

/// One row of the run log. Day 0 is pre-training.
struct MetricsRecord {
    Phase phase = Phase::sequential;
    std::size_t day = 0;
    std::size_t epoch = 1;
    std::optional<double> train_loss, train_accuracy;
    std::optional<double> val_loss, val_accuracy;
    std::optional<double> test_loss, test_accuracy;

    friend bool operator==(const MetricsRecord&, const MetricsRecord&) = default;
};

struct RunLog {
    std::string run_id = "run";
    std::vector<MetricsRecord> records;
    std::map<std::string, std::string> metadata;  // not part of the CSV
};

// Checks value ranges and the (phase, day, epoch) ordering. Throws DataError.
void validate_log(const RunLog& log);

inline constexpr const char* kMetricsHeader =
    "run_id,phase,day,epoch,train_loss,train_acc,val_loss,val_acc,test_loss,test_acc";

// Reals are printed in shortest round-trip form; absent values are empty cells.
std::string format_real(double v);
std::string metrics_to_csv(const RunLog& log);
RunLog metrics_from_csv(const std::string& text);
void write_metrics(const RunLog& log, const std::filesystem::path& path);
RunLog read_metrics(const std::filesystem::path& path);

enum class Metric { train_loss, train_accuracy, val_loss, val_accuracy, test_loss, test_accuracy };

std::string to_string(Metric m);  // CSV column name
Metric parse_metric(const std::string& text);
std::optional<double> metric_value(const MetricsRecord& r, Metric m);

struct SeriesPoint {
    double x = 0.0;  // fractional day position
    double y = 0.0;
    std::size_t record = 0;
};

// Sequential-phase values of one metric, in log order. With several day-epochs
// the x position is (day - 1) + epoch / epochs_that_day.
std::vector<SeriesPoint> extract_series(const RunLog& log, Metric metric);

} // namespace seqlearn
