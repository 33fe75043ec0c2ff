#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "seqlearn/metrics.hpp"

namespace seqlearn {

// Standalone SVG 1.1 line chart (900x480), one polyline per selected metric,
// day on the x axis. Output bytes depend only on the log and selection.
std::string render_plot(const RunLog& log, const std::vector<Metric>& selection, const std::string& title = "");

void emit_plot(const RunLog& log, const std::vector<Metric>& selection, const std::filesystem::path& path,
               const std::string& title = "");

} // namespace seqlearn
