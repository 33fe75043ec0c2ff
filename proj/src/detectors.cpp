#include "seqlearn/detectors.hpp"

#include <cmath>
#include <cstdio>

#include "seqlearn/error.hpp"

namespace seqlearn {

void DetectorConfig::validate() const {
    if (window < 2) throw ConfigError("detectors.window must be >= 2");
    if (!(slope_tolerance >= 0.0)) throw ConfigError("detectors.slope_tolerance must be >= 0");
    if (!(variance_tolerance >= 0.0)) throw ConfigError("detectors.variance_tolerance must be >= 0");
    if (!(spike_drop > 0.0 && spike_drop <= 1.0)) throw ConfigError("detectors.spike_drop must be in (0, 1]");
}

WindowStats window_stats(std::span<const double> w) {
    const double n = static_cast<double>(w.size());
    double mean_y = 0.0;
    for (double v : w) mean_y += v;
    mean_y /= n;
    const double mean_t = (n - 1.0) / 2.0;
    double sxy = 0.0, sxx = 0.0, ss = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
        const double dt = static_cast<double>(i) - mean_t;
        const double dy = w[i] - mean_y;
        sxy += dt * dy;
        sxx += dt * dt;
        ss += dy * dy;
    }
    return {sxx > 0.0 ? sxy / sxx : 0.0, w.size() > 1 ? ss / (n - 1.0) : 0.0};
}

std::optional<std::size_t> plateau_detect(std::span<const double> series, const DetectorConfig& config) {
    config.validate();
    if (series.size() < config.window)
        throw UsageError("plateau detection needs at least " + std::to_string(config.window) + " points, got " +
                         std::to_string(series.size()));
    for (std::size_t i = 0; i + config.window <= series.size(); ++i) {
        const WindowStats s = window_stats(series.subspan(i, config.window));
        if (std::abs(s.slope) <= config.slope_tolerance && s.variance <= config.variance_tolerance) return i;
    }
    return std::nullopt;
}

std::vector<std::size_t> spike_detect(std::span<const double> series, double spike_drop, SpikeMode mode) {
    std::vector<std::size_t> out;
    for (std::size_t i = 1; i < series.size(); ++i) {
        const double change = mode == SpikeMode::accuracy ? series[i - 1] - series[i] : series[i] - series[i - 1];
        if (change >= spike_drop) out.push_back(i);
    }
    return out;
}

std::string to_string(Recommendation r) { return r == Recommendation::stop ? "stop" : "continue"; }

AssessmentReport training_assessment(const RunLog& log, const DetectorConfig& config) {
    config.validate();
    const auto it = log.metadata.find("validation_strategy");
    if (it == log.metadata.end())
        throw UsageError("assessment needs the run's validation_strategy metadata to confirm a day-local series");
    if (it->second != "prev_train_curr_val" && it->second != "half_split")
        throw UsageError("assessment needs a day-local validation series; this run used '" + it->second + "'");

    AssessmentReport report;
    report.config = config;
    const auto points = extract_series(log, Metric::val_accuracy);
    if (points.empty()) throw UsageError("log has no day-local validation accuracy series");
    std::vector<double> ys;
    for (const auto& p : points) ys.push_back(p.y);
    report.series_length = ys.size();
    if (ys.size() >= config.window) {
        report.plateau_index = plateau_detect(ys, config);
        if (report.plateau_index) report.plateau_day = points[*report.plateau_index].x;
    }
    report.forgetting_events = spike_detect(ys, config.spike_drop, SpikeMode::accuracy);
    const std::size_t trailing_start = ys.size() > config.window ? ys.size() - config.window : 0;
    for (std::size_t i : report.forgetting_events) {
        report.forgetting_days.push_back(points[i].x);
        if (i >= trailing_start) report.forgetting_in_trailing_window = true;
    }
    report.recommendation = report.plateaued() && !report.forgetting_in_trailing_window ? Recommendation::stop
                                                                                        : Recommendation::keep_training;
    return report;
}

std::string format_report(const AssessmentReport& r) {
    std::string out;
    auto line = [&](const std::string& k, const std::string& v) { out += k + "\t" + v + "\n"; };
    char buf[160];
    line("source", to_string(r.source));
    line("series_length", std::to_string(r.series_length));
    line("plateaued", r.plateaued() ? "true" : "false");
    if (r.plateaued()) {
        line("plateau_index", std::to_string(*r.plateau_index));
        std::snprintf(buf, sizeof buf, "%.4f", *r.plateau_day);
        line("plateau_day", buf);
    }
    std::string events, days;
    for (std::size_t i = 0; i < r.forgetting_events.size(); ++i) {
        events += (i ? "," : "") + std::to_string(r.forgetting_events[i]);
        std::snprintf(buf, sizeof buf, "%.4f", r.forgetting_days[i]);
        days += (i ? "," : "") + std::string(buf);
    }
    line("forgetting_events", events);
    line("forgetting_days", days);
    line("forgetting_in_trailing_window", r.forgetting_in_trailing_window ? "true" : "false");
    std::snprintf(buf, sizeof buf, "window=%zu slope_tol=%g var_tol=%g spike_drop=%g", r.config.window,
                  r.config.slope_tolerance, r.config.variance_tolerance, r.config.spike_drop);
    line("thresholds", std::string(buf) + " (project-defined heuristics)");
    line("recommendation", to_string(r.recommendation));
    return out;
}

} // namespace seqlearn
