#pragma once

// Plateau and spike heuristics for a run's day-local validation series.

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "seqlearn/metrics.hpp"

namespace seqlearn {

struct DetectorConfig {
    std::size_t window = 20;
    double slope_tolerance = 0.002;     // per series step
    double variance_tolerance = 0.0015;
    double spike_drop = 0.15;

    void validate() const;
};

struct WindowStats {
    double slope = 0.0;     // least-squares slope against the step index
    double variance = 0.0;  // sample variance (n - 1 denominator)
};

WindowStats window_stats(std::span<const double> window);

// Earliest start i such that the window [i, i + window) has |slope| <= slope
// tolerance and variance <= variance tolerance.
std::optional<std::size_t> plateau_detect(std::span<const double> series, const DetectorConfig& config);

enum class SpikeMode {
    accuracy,  // flag drops: series[i-1] - series[i] >= spike_drop
    loss,      // flag jumps: series[i] - series[i-1] >= spike_drop
};

std::vector<std::size_t> spike_detect(std::span<const double> series, double spike_drop,
                                      SpikeMode mode = SpikeMode::accuracy);

enum class Recommendation { keep_training, stop };

struct AssessmentReport {
    Metric source = Metric::val_accuracy;
    std::size_t series_length = 0;
    std::optional<std::size_t> plateau_index;
    std::optional<double> plateau_day;  // x position of the plateau start
    std::vector<std::size_t> forgetting_events;
    std::vector<double> forgetting_days;
    bool forgetting_in_trailing_window = false;
    Recommendation recommendation = Recommendation::keep_training;
    DetectorConfig config;

    bool plateaued() const { return plateau_index.has_value(); }
};

// Works only from the day-local validation accuracy series; test columns are
// never read. Requires log.metadata["validation_strategy"] to name a day-local
// strategy (prev_train_curr_val or half_split).
AssessmentReport training_assessment(const RunLog& log, const DetectorConfig& config);

std::string to_string(Recommendation r);
std::string format_report(const AssessmentReport& report);

} // namespace seqlearn
