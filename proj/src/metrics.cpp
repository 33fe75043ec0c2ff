#include "seqlearn/metrics.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <tuple>

#include "seqlearn/error.hpp"
#include "seqlearn/fileio.hpp"

namespace seqlearn {

std::string to_string(Phase phase) { return phase == Phase::pretrain ? "pretrain" : "sequential"; }

namespace {

constexpr Metric kAllMetrics[] = {Metric::train_loss, Metric::train_accuracy, Metric::val_loss,
                                  Metric::val_accuracy, Metric::test_loss,    Metric::test_accuracy};

bool is_accuracy(Metric m) {
    return m == Metric::train_accuracy || m == Metric::val_accuracy || m == Metric::test_accuracy;
}

std::optional<double>* metric_slot(MetricsRecord& r, Metric m) {
    switch (m) {
    case Metric::train_loss: return &r.train_loss;
    case Metric::train_accuracy: return &r.train_accuracy;
    case Metric::val_loss: return &r.val_loss;
    case Metric::val_accuracy: return &r.val_accuracy;
    case Metric::test_loss: return &r.test_loss;
    case Metric::test_accuracy: return &r.test_accuracy;
    }
    return nullptr;
}

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream in(line);
    while (std::getline(in, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    return cells;
}

} // namespace

std::string to_string(Metric m) {
    switch (m) {
    case Metric::train_loss: return "train_loss";
    case Metric::train_accuracy: return "train_acc";
    case Metric::val_loss: return "val_loss";
    case Metric::val_accuracy: return "val_acc";
    case Metric::test_loss: return "test_loss";
    case Metric::test_accuracy: return "test_acc";
    }
    return "?";
}

Metric parse_metric(const std::string& text) {
    for (Metric m : kAllMetrics)
        if (to_string(m) == text) return m;
    throw UsageError("unknown metric '" + text + "'");
}

std::optional<double> metric_value(const MetricsRecord& r, Metric m) {
    return *metric_slot(const_cast<MetricsRecord&>(r), m);
}

void validate_log(const RunLog& log) {
    for (std::size_t i = 0; i < log.records.size(); ++i) {
        const auto& r = log.records[i];
        const std::string where = "record " + std::to_string(i);
        bool any = false;
        for (Metric m : kAllMetrics) {
            const auto v = metric_value(r, m);
            if (!v) continue;
            any = true;
            if (!std::isfinite(*v)) throw DataError(where + ": non-finite " + to_string(m));
            if (is_accuracy(m) && (*v < 0.0 || *v > 1.0)) throw DataError(where + ": " + to_string(m) + " outside [0,1]");
            if (!is_accuracy(m) && *v < 0.0) throw DataError(where + ": negative " + to_string(m));
        }
        if (!any) throw DataError(where + ": no metric present");
        if (r.epoch < 1) throw DataError(where + ": epoch must be >= 1");
        if ((r.phase == Phase::pretrain) != (r.day == 0)) throw DataError(where + ": day 0 is reserved for pretraining");
        if (i > 0) {
            const auto& p = log.records[i - 1];
            if (std::tie(p.day, p.epoch) >= std::tie(r.day, r.epoch))
                throw DataError(where + ": records must be strictly ordered by (day, epoch)");
        }
    }
}

std::string format_real(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

std::string metrics_to_csv(const RunLog& log) {
    validate_log(log);
    if (log.run_id.find_first_of(",\n\r") != std::string::npos) throw UsageError("run id may not contain ',' or newlines");
    std::string out = std::string(kMetricsHeader) + "\n";
    for (const auto& r : log.records) {
        out += log.run_id + "," + to_string(r.phase) + "," + std::to_string(r.day) + "," + std::to_string(r.epoch);
        for (Metric m : kAllMetrics) {
            out += ',';
            if (const auto v = metric_value(r, m)) out += format_real(*v);
        }
        out += '\n';
    }
    return out;
}

RunLog metrics_from_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || line != kMetricsHeader) throw ParseError("metrics csv: header mismatch", 1);
    RunLog log;
    std::size_t line_no = 1;
    bool first = true;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const auto cells = split_csv(line);
        if (cells.size() != 10) throw ParseError("metrics csv: expected 10 cells", line_no);
        if (first) log.run_id = cells[0];
        else if (cells[0] != log.run_id) throw ParseError("metrics csv: mixed run ids", line_no);
        first = false;
        MetricsRecord r;
        if (cells[1] == "pretrain") r.phase = Phase::pretrain;
        else if (cells[1] == "sequential") r.phase = Phase::sequential;
        else throw ParseError("metrics csv: bad phase '" + cells[1] + "'", line_no);
        auto parse_uint = [&](const std::string& s) {
            std::size_t used = 0;
            unsigned long v = 0;
            try {
                v = std::stoul(s, &used);
            } catch (const std::exception&) {
                used = 0;
            }
            if (s.empty() || used != s.size() || s[0] == '-') throw ParseError("metrics csv: bad integer '" + s + "'", line_no);
            return static_cast<std::size_t>(v);
        };
        r.day = parse_uint(cells[2]);
        r.epoch = parse_uint(cells[3]);
        for (std::size_t k = 0; k < 6; ++k) {
            const std::string& s = cells[4 + k];
            if (s.empty()) continue;
            std::size_t used = 0;
            double v = 0;
            try {
                v = std::stod(s, &used);
            } catch (const std::exception&) {
                used = 0;
            }
            if (used != s.size()) throw ParseError("metrics csv: bad real '" + s + "'", line_no);
            *metric_slot(r, kAllMetrics[k]) = v;
        }
        log.records.push_back(r);
    }
    try {
        validate_log(log);
    } catch (const ParseError&) {
        throw;
    } catch (const DataError& e) {
        throw ParseError(std::string("metrics csv: ") + e.what(), line_no);
    }
    return log;
}

void write_metrics(const RunLog& log, const std::filesystem::path& path) { write_file_text(path, metrics_to_csv(log)); }

RunLog read_metrics(const std::filesystem::path& path) {
    try {
        return metrics_from_csv(read_file_text(path));
    } catch (const ParseError& e) {
        throw ParseError(path.string() + ": " + e.what(), e.position());
    }
}

std::vector<SeriesPoint> extract_series(const RunLog& log, Metric metric) {
    std::map<std::size_t, std::size_t> epochs_per_day;
    for (const auto& r : log.records)
        if (r.phase == Phase::sequential) epochs_per_day[r.day] = std::max(epochs_per_day[r.day], r.epoch);
    std::vector<SeriesPoint> out;
    for (std::size_t i = 0; i < log.records.size(); ++i) {
        const auto& r = log.records[i];
        if (r.phase != Phase::sequential) continue;
        const auto v = metric_value(r, metric);
        if (!v) continue;
        const std::size_t e = epochs_per_day[r.day];
        const double x = e <= 1 ? static_cast<double>(r.day)
                                : static_cast<double>(r.day - 1) + static_cast<double>(r.epoch) / static_cast<double>(e);
        out.push_back({x, *v, i});
    }
    return out;
}

} // namespace seqlearn
