#include "seqlearn/plot.hpp"

#include <algorithm>
#include <cstdio>
#include <limits>

#include "seqlearn/error.hpp"
#include "seqlearn/fileio.hpp"

namespace seqlearn {

namespace {

constexpr double kWidth = 900, kHeight = 480;
constexpr double kLeft = 70, kRight = 180, kTop = 40, kBottom = 60;
constexpr const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

std::string tick(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3g", v);
    return buf;
}

std::string escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
        case '<': out += "&lt;"; break;
        case '>': out += "&gt;"; break;
        case '&': out += "&amp;"; break;
        case '"': out += "&quot;"; break;
        default: out += c;
        }
    }
    return out;
}

} // namespace

std::string render_plot(const RunLog& log, const std::vector<Metric>& selection, const std::string& title) {
    if (selection.empty()) throw UsageError("plot: no series selected");
    std::vector<std::vector<SeriesPoint>> series;
    double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
    bool all_accuracy = true;
    for (Metric m : selection) {
        series.push_back(extract_series(log, m));
        all_accuracy = all_accuracy && (m == Metric::train_accuracy || m == Metric::val_accuracy ||
                                        m == Metric::test_accuracy);
        for (const auto& p : series.back()) {
            x0 = std::min(x0, p.x);
            x1 = std::max(x1, p.x);
            y0 = std::min(y0, p.y);
            y1 = std::max(y1, p.y);
        }
    }
    if (std::all_of(series.begin(), series.end(), [](const auto& s) { return s.empty(); }))
        throw UsageError("plot: selected series are empty");
    if (all_accuracy) {
        y0 = 0.0;
        y1 = 1.0;
    } else if (y1 - y0 < 1e-12) {
        y0 -= 0.5;
        y1 += 0.5;
    } else {
        y0 = std::min(0.0, y0);
    }
    if (x1 - x0 < 1e-12) {
        x0 -= 0.5;
        x1 += 0.5;
    }
    const double pw = kWidth - kLeft - kRight, ph = kHeight - kTop - kBottom;
    auto sx = [&](double x) { return kLeft + (x - x0) / (x1 - x0) * pw; };
    auto sy = [&](double y) { return kTop + (1.0 - (y - y0) / (y1 - y0)) * ph; };

    std::string svg;
    svg += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"900\" height=\"480\" "
           "viewBox=\"0 0 900 480\">\n";
    svg += "<rect x=\"0\" y=\"0\" width=\"900\" height=\"480\" fill=\"white\"/>\n";
    if (!title.empty())
        svg += "<text x=\"" + num(kLeft + pw / 2) + "\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" "
               "font-size=\"16\">" + escape(title) + "</text>\n";
    svg += "<rect x=\"" + num(kLeft) + "\" y=\"" + num(kTop) + "\" width=\"" + num(pw) + "\" height=\"" + num(ph) +
           "\" fill=\"none\" stroke=\"black\"/>\n";
    for (int i = 0; i <= 5; ++i) {
        const double fx = x0 + (x1 - x0) * i / 5.0, fy = y0 + (y1 - y0) * i / 5.0;
        svg += "<line x1=\"" + num(sx(fx)) + "\" y1=\"" + num(kTop + ph) + "\" x2=\"" + num(sx(fx)) + "\" y2=\"" +
               num(kTop + ph + 5) + "\" stroke=\"black\"/>\n";
        svg += "<text x=\"" + num(sx(fx)) + "\" y=\"" + num(kTop + ph + 20) +
               "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">" + tick(fx) + "</text>\n";
        svg += "<line x1=\"" + num(kLeft - 5) + "\" y1=\"" + num(sy(fy)) + "\" x2=\"" + num(kLeft) + "\" y2=\"" +
               num(sy(fy)) + "\" stroke=\"black\"/>\n";
        svg += "<text x=\"" + num(kLeft - 8) + "\" y=\"" + num(sy(fy) + 4) +
               "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"12\">" + tick(fy) + "</text>\n";
    }
    svg += "<text x=\"" + num(kLeft + pw / 2) + "\" y=\"" + num(kHeight - 15) +
           "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"14\">day</text>\n";
    svg += "<text x=\"18\" y=\"" + num(kTop + ph / 2) + "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
           "font-size=\"14\" transform=\"rotate(-90 18 " + num(kTop + ph / 2) + ")\">" +
           (all_accuracy ? "accuracy" : "value") + "</text>\n";

    for (std::size_t s = 0; s < series.size(); ++s) {
        const std::string color = kColors[s % std::size(kColors)];
        const auto& pts = series[s];
        if (pts.size() == 1) {
            svg += "<circle cx=\"" + num(sx(pts[0].x)) + "\" cy=\"" + num(sy(pts[0].y)) + "\" r=\"3\" fill=\"" + color +
                   "\"/>\n";
        } else if (pts.size() > 1) {
            svg += "<polyline fill=\"none\" stroke=\"" + color + "\" stroke-width=\"1.5\" points=\"";
            for (std::size_t i = 0; i < pts.size(); ++i)
                svg += (i ? " " : "") + num(sx(pts[i].x)) + "," + num(sy(pts[i].y));
            svg += "\"/>\n";
        }
        const double ly = kTop + 10 + 22.0 * static_cast<double>(s);
        const double lx = kLeft + pw + 15;
        svg += "<line x1=\"" + num(lx) + "\" y1=\"" + num(ly) + "\" x2=\"" + num(lx + 24) + "\" y2=\"" + num(ly) +
               "\" stroke=\"" + color + "\" stroke-width=\"2\"/>\n";
        svg += "<text x=\"" + num(lx + 30) + "\" y=\"" + num(ly + 4) + "\" font-family=\"sans-serif\" font-size=\"12\">" +
               to_string(selection[s]) + "</text>\n";
    }
    svg += "</svg>\n";
    return svg;
}

void emit_plot(const RunLog& log, const std::vector<Metric>& selection, const std::filesystem::path& path,
               const std::string& title) {
    write_file_text(path, render_plot(log, selection, title));
}

} // namespace seqlearn
