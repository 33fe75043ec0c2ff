#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "seqlearn/cli.hpp"
#include "seqlearn/config.hpp"
#include "seqlearn/detectors.hpp"
#include "seqlearn/error.hpp"
#include "seqlearn/gradcheck.hpp"
#include "seqlearn/image.hpp"
#include "seqlearn/manifest.hpp"
#include "seqlearn/metrics.hpp"
#include "seqlearn/protocol.hpp"
#include "seqlearn/synth.hpp"

namespace py = pybind11;
using namespace seqlearn;
namespace fs = std::filesystem;

namespace {

using Pixels = py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>;

Image to_image(const Pixels& a) {
    if (a.ndim() != 2) throw UsageError("expected a 2-d uint8 array");
    Image im(a.shape(1), a.shape(0));
    std::copy(a.data(), a.data() + a.size(), im.pixels.begin());
    return im;
}

Pixels from_image(const Image& im) {
    Pixels a({im.height, im.width});
    std::copy(im.pixels.begin(), im.pixels.end(), a.mutable_data());
    return a;
}

py::dict record_dict(const MetricsRecord& r) {
    py::dict d;
    d["phase"] = to_string(r.phase);
    d["day"] = r.day;
    d["epoch"] = r.epoch;
    for (Metric m : {Metric::train_loss, Metric::train_accuracy, Metric::val_loss, Metric::val_accuracy,
                     Metric::test_loss, Metric::test_accuracy}) {
        const auto v = metric_value(r, m);
        d[py::str(to_string(m))] = v ? py::object(py::float_(*v)) : py::object(py::none());
    }
    return d;
}

py::list records_list(const RunLog& log) {
    py::list out;
    for (const auto& r : log.records) out.append(record_dict(r));
    return out;
}

ConfigOverrides to_overrides(const std::map<std::string, std::string>& m) { return {m.begin(), m.end()}; }

DetectorConfig detector_config(std::size_t window, double slope, double variance, double drop) {
    DetectorConfig c{window, slope, variance, drop};
    c.validate();
    return c;
}

} // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "sequential learning harness";

    auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
    py::register_exception<UsageError>(m, "UsageError", base.ptr());
    py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
    auto data = py::register_exception<DataError>(m, "DataError", base.ptr());
    py::register_exception<ParseError>(m, "ParseError", data.ptr());
    py::register_exception<NumericError>(m, "NumericError", base.ptr());
    py::register_exception<IoError>(m, "IoError", base.ptr());

    m.def(
        "main",
        [](const std::vector<std::string>& args) {
            std::ostringstream out, err;
            int code;
            {
                py::gil_scoped_release release;
                code = dispatch(args, out, err);
            }
            return py::make_tuple(code, out.str(), err.str());
        },
        py::arg("args"), "Run a command-line invocation; returns (exit_code, stdout, stderr).");

    m.def(
        "grad_check",
        [](std::size_t seeds, double h, double tolerance, std::uint64_t base_seed) {
            GradCheckReport r;
            {
                py::gil_scoped_release release;
                r = grad_check_suite({seeds, h, tolerance, base_seed});
            }
            py::list tensors;
            for (const auto& t : r.tensors) tensors.append(py::make_tuple(t.name, t.max_rel_error, t.passed));
            py::dict d;
            d["passed"] = r.passed();
            d["max_rel_error"] = r.max_rel_error();
            d["redraws"] = r.redraws;
            d["tensors"] = tensors;
            return d;
        },
        py::arg("seeds") = 20, py::arg("h") = 1e-4, py::arg("tolerance") = 1e-5, py::arg("base_seed") = 0);

    m.def(
        "config_text",
        [](const fs::path& path, const std::map<std::string, std::string>& overrides, bool use_environment) {
            return config_to_text(parse_config(path, to_overrides(overrides), use_environment));
        },
        py::arg("path"), py::arg("overrides") = std::map<std::string, std::string>{},
        py::arg("use_environment") = true, "Parse a config file and return its normalised echo.");

    m.def(
        "run_experiment",
        [](const fs::path& config, const std::optional<fs::path>& out, const std::map<std::string, std::string>& overrides,
           bool resume, std::optional<std::size_t> stop_after_day) {
            const ExperimentConfig c = parse_config(config, to_overrides(overrides), false);
            RunResult r;
            {
                py::gil_scoped_release release;
                r = run_experiment(c, {out.value_or(fs::path{}), resume, stop_after_day});
            }
            py::dict d;
            d["run_id"] = r.log.run_id;
            d["completed_days"] = r.completed_days;
            d["resumed_from_day"] = r.resumed_from_day;
            d["interrupted"] = r.interrupted;
            d["optimizer_steps"] = r.model.step;
            d["pretrain_subset"] = r.pretrain_subset;
            d["day_plan"] = r.plan.days;
            d["records"] = records_list(r.log);
            return d;
        },
        py::arg("config"), py::arg("out") = py::none(), py::arg("overrides") = std::map<std::string, std::string>{},
        py::arg("resume") = false, py::arg("stop_after_day") = py::none(),
        "Run an experiment from a config file; without `out` nothing is written to disk.");

    m.def(
        "read_metrics", [](const fs::path& path) { return records_list(read_metrics(path)); }, py::arg("path"));

    m.def(
        "plateau_detect",
        [](const std::vector<double>& series, std::size_t window, double slope_tolerance, double variance_tolerance) {
            return plateau_detect(series, detector_config(window, slope_tolerance, variance_tolerance, 0.15));
        },
        py::arg("series"), py::arg("window") = 20, py::arg("slope_tolerance") = 0.002,
        py::arg("variance_tolerance") = 0.0015);

    m.def(
        "spike_detect",
        [](const std::vector<double>& series, double spike_drop, const std::string& mode) {
            if (mode != "accuracy" && mode != "loss") throw UsageError("mode must be 'accuracy' or 'loss'");
            return spike_detect(series, spike_drop, mode == "loss" ? SpikeMode::loss : SpikeMode::accuracy);
        },
        py::arg("series"), py::arg("spike_drop") = 0.15, py::arg("mode") = "accuracy");

    m.def(
        "assess",
        [](const fs::path& metrics_csv, const std::string& strategy, std::size_t window, double slope_tolerance,
           double variance_tolerance, double spike_drop) {
            RunLog log = read_metrics(metrics_csv);
            log.metadata["validation_strategy"] = strategy;
            const auto r = training_assessment(
                log, detector_config(window, slope_tolerance, variance_tolerance, spike_drop));
            py::dict d;
            d["plateau_index"] = r.plateau_index;
            d["plateau_day"] = r.plateau_day;
            d["forgetting_days"] = r.forgetting_days;
            d["recommendation"] = to_string(r.recommendation);
            d["report"] = format_report(r);
            return d;
        },
        py::arg("metrics_csv"), py::arg("strategy"), py::arg("window") = 20, py::arg("slope_tolerance") = 0.002,
        py::arg("variance_tolerance") = 0.0015, py::arg("spike_drop") = 0.15);

    m.def(
        "gen_synthetic",
        [](const fs::path& out, std::size_t classes, std::size_t per_class, std::size_t height, std::size_t width,
           double noise, std::uint64_t seed) {
            return gen_synthetic({classes, per_class, height, width, noise, seed}, out).size();
        },
        py::arg("out"), py::arg("classes") = 3, py::arg("per_class") = 100, py::arg("height") = 32,
        py::arg("width") = 32, py::arg("noise") = 0.1, py::arg("seed") = 0, "Returns the number of images written.");

    m.def(
        "split",
        [](const fs::path& data, const fs::path& out, std::uint64_t seed, double train, double val, double test) {
            const auto s = split_manifest(ingest_directory(data), {train, val, test}, seed);
            write_split(s, out);
            return py::make_tuple(s.train.size(), s.validation.size(), s.test.size());
        },
        py::arg("data"), py::arg("out"), py::arg("seed") = 0, py::arg("train") = 0.7, py::arg("val") = 0.1,
        py::arg("test") = 0.2, "Writes train/val/test manifests; returns their sizes.");

    m.def(
        "rotate90",
        [](const Pixels& image, const std::string& direction) {
            if (direction != "left" && direction != "right") throw UsageError("direction must be 'left' or 'right'");
            return from_image(
                rotate90(to_image(image), direction == "left" ? RotateDirection::left : RotateDirection::right));
        },
        py::arg("image"), py::arg("direction"));

    m.def("read_pgm", [](const fs::path& path) { return from_image(pgm_read(path)); }, py::arg("path"));
    m.def(
        "write_pgm", [](const Pixels& image, const fs::path& path) { pgm_write(to_image(image), path); },
        py::arg("image"), py::arg("path"));
}
