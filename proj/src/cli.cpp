#include "seqlearn/cli.hpp"

#include <algorithm>
#include <cstdio>
#include <iostream>
#include <map>
#include <sstream>

#include <CLI11.hpp>

#include "seqlearn/checkpoint.hpp"
#include "seqlearn/config.hpp"
#include "seqlearn/detectors.hpp"
#include "seqlearn/error.hpp"
#include "seqlearn/fileio.hpp"
#include "seqlearn/gradcheck.hpp"
#include "seqlearn/manifest.hpp"
#include "seqlearn/plot.hpp"
#include "seqlearn/protocol.hpp"
#include "seqlearn/synth.hpp"

namespace seqlearn {

namespace {

namespace fs = std::filesystem;

std::string fixed(double v, int digits = 4) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

// "--key=value" and "--key value" pairs left over after CLI11 has taken the known flags.
ConfigOverrides parse_overrides(const std::vector<std::string>& extras) {
    ConfigOverrides out;
    for (std::size_t i = 0; i < extras.size(); ++i) {
        const std::string& a = extras[i];
        if (a.rfind("--", 0) != 0) throw UsageError("unexpected argument '" + a + "'");
        const auto eq = a.find('=');
        if (eq != std::string::npos) {
            out.emplace_back(a.substr(2, eq - 2), a.substr(eq + 1));
        } else {
            if (i + 1 >= extras.size()) throw UsageError("override " + a + " needs a value");
            out.emplace_back(a.substr(2), extras[++i]);
        }
    }
    return out;
}

std::map<std::string, std::string> read_key_values(const fs::path& path) {
    std::map<std::string, std::string> kv;
    std::istringstream in(read_file_text(path));
    std::string line;
    while (std::getline(in, line)) {
        const auto eq = line.find('=');
        if (eq != std::string::npos) kv[line.substr(0, eq)] = line.substr(eq + 1);
    }
    return kv;
}

RunLog load_run_log(const fs::path& run) {
    RunLog log = read_metrics(run / "metrics.csv");
    const fs::path meta = run / "run_meta.txt";
    if (fs::exists(meta))
        for (auto& [k, v] : read_key_values(meta)) log.metadata[k] = v;
    return log;
}

std::vector<Metric> parse_metric_list(const std::string& text) {
    std::vector<Metric> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty()) out.push_back(parse_metric(item));
    return out;
}

struct Args {
    // gen-synth / gen-rotated / split
    std::string out, data, label;
    std::uint64_t seed = 0;
    std::size_t classes = 3, per_class = 100, height = 32, width = 32;
    double noise = 0.1;
    double train_frac = 0.7, val_frac = 0.1, test_frac = 0.2;
    // run
    std::string config;
    bool resume = false;
    std::size_t stop_after_day = 0;
    // evaluate
    std::string run, checkpoint, manifest, split_name = "test", loss = "cross_entropy";
    std::size_t batch_size = 16;
    double norm_mean = 0.449, norm_std = 0.226;
    // assess / plot
    DetectorConfig detectors;
    std::string metrics = "train_acc,val_acc,test_acc", title;
    // grad-check
    std::size_t seeds = 20;
    double h = 1e-4, tolerance = 1e-5;
};

int cmd_gen_synth(const Args& a, std::ostream& out) {
    SynthOptions o;
    o.classes = a.classes;
    o.per_class = a.per_class;
    o.height = a.height;
    o.width = a.width;
    o.noise_level = a.noise;
    o.seed = a.seed;
    const Manifest m = gen_synthetic(o, a.out);
    write_manifest(m, fs::path(a.out) / "manifest.txt");
    out << "wrote " << m.size() << " images in " << m.class_names().size() << " classes to " << a.out << "\n";
    return 0;
}

int cmd_gen_rotated(const Args& a, std::ostream& out) {
    const Manifest all = ingest_directory(a.data);
    std::vector<std::size_t> pick;
    for (std::size_t i = 0; i < all.size(); ++i)
        if (a.label.empty() || all[i].label == a.label) pick.push_back(i);
    if (pick.empty()) throw DataError("no images of class '" + a.label + "' under " + a.data);
    std::vector<ManifestEntry> entries;
    for (std::size_t i : pick) entries.push_back(all[i]);
    const Manifest source = Manifest::from_entries(entries);
    const Manifest m = build_rotated_dataset(source, a.data, a.out, a.seed);
    write_manifest(m, fs::path(a.out) / "manifest.txt");
    out << "wrote " << m.size() << " rotated images to " << a.out << "\n";
    return 0;
}

int cmd_split(const Args& a, std::ostream& out) {
    const Manifest m = ingest_directory(a.data);
    const ManifestSplit s = split_manifest(m, {a.train_frac, a.val_frac, a.test_frac}, a.seed);
    write_split(s, a.out);
    out << "train " << s.train.size() << " val " << s.validation.size() << " test " << s.test.size() << "\n";
    return 0;
}

int cmd_run(const Args& a, const std::vector<std::string>& extras, bool seed_given, std::ostream& out) {
    ConfigOverrides overrides = parse_overrides(extras);
    if (seed_given) overrides.emplace_back("protocol.seed", std::to_string(a.seed));
    const ExperimentConfig config = parse_config(a.config, overrides, true);
    RunOptions opts;
    opts.out_dir = a.out;
    opts.resume = a.resume;
    if (a.stop_after_day > 0) opts.stop_after_day = a.stop_after_day;
    const RunResult r = run_experiment(config, opts);
    out << "run " << r.log.run_id << ": " << r.completed_days << "/" << r.plan.days.size() << " days";
    if (r.resumed_from_day) out << " (resumed after day " << r.resumed_from_day << ")";
    if (r.interrupted) out << " (stopped early)";
    for (auto it = r.log.records.rbegin(); it != r.log.records.rend(); ++it)
        if (it->test_accuracy) {
            out << ", test accuracy " << fixed(*it->test_accuracy);
            break;
        }
    out << "\n";
    return 0;
}

int cmd_evaluate(const Args& a, std::ostream& out) {
    ModelState<float> model;
    Manifest manifest;
    fs::path root = a.data;
    LossKind loss = parse_loss_kind(a.loss);
    std::size_t batch = a.batch_size;
    NormalizationSpec norm;
    norm.mean = {a.norm_mean};
    norm.stddev = {a.norm_std};
    if (!a.run.empty()) {
        const ExperimentConfig c = parse_config(fs::path(a.run) / "config.txt", {}, false);
        model = checkpoint_load<float>(a.checkpoint.empty() ? fs::path(a.run) / "final.sqln" : fs::path(a.checkpoint));
        const ManifestSplit s = read_split(c.splits_dir);
        manifest = a.split_name == "train" ? s.train : a.split_name == "val" ? s.validation : s.test;
        if (a.split_name != "train" && a.split_name != "val" && a.split_name != "test")
            throw UsageError("--split must be train, val or test");
        if (root.empty()) root = c.data_root;
        loss = c.loss;
        batch = c.batch_size;
        norm = c.normalization;
    } else {
        if (a.checkpoint.empty() || a.manifest.empty() || a.data.empty())
            throw UsageError("evaluate needs --run, or --checkpoint with --manifest and --data");
        model = checkpoint_load<float>(a.checkpoint);
        manifest = read_manifest(a.manifest);
    }
    const LoadedData data = load_data(manifest, root);
    const EvalResult r = evaluate(model, data, loss, batch, norm);
    out << "loss\t" << format_real(r.loss) << "\naccuracy\t" << format_real(r.accuracy) << "\nimages\t"
        << data.images.size() << "\n";
    return 0;
}

int cmd_assess(const Args& a, const CLI::App& sub, std::ostream& out) {
    RunLog log = load_run_log(a.run);
    DetectorConfig cfg;
    const fs::path config_path = fs::path(a.run) / "config.txt";
    if (fs::exists(config_path)) {
        const ExperimentConfig c = parse_config(config_path, {}, false);
        cfg = c.detectors;
        if (!log.metadata.count("validation_strategy")) log.metadata["validation_strategy"] = to_string(c.strategy);
    }
    if (sub.count("--window")) cfg.window = a.detectors.window;
    if (sub.count("--slope-tolerance")) cfg.slope_tolerance = a.detectors.slope_tolerance;
    if (sub.count("--variance-tolerance")) cfg.variance_tolerance = a.detectors.variance_tolerance;
    if (sub.count("--spike-drop")) cfg.spike_drop = a.detectors.spike_drop;
    out << format_report(training_assessment(log, cfg));
    return 0;
}

int cmd_plot(const Args& a, std::ostream& out) {
    const RunLog log = load_run_log(a.run);
    const fs::path dest = a.out.empty() ? fs::path(a.run) / "plot.svg" : fs::path(a.out);
    emit_plot(log, parse_metric_list(a.metrics), dest, a.title.empty() ? log.run_id : a.title);
    out << "wrote " << dest.string() << "\n";
    return 0;
}

int cmd_grad_check(const Args& a, std::ostream& out) {
    GradCheckSuiteOptions o;
    o.seeds = a.seeds;
    o.h = a.h;
    o.tolerance = a.tolerance;
    o.base_seed = a.seed;
    const GradCheckReport r = grad_check_suite(o);
    std::map<std::string, double> worst;
    for (const auto& t : r.tensors) {
        const auto slash = t.name.find('/');
        const std::string kind = slash == std::string::npos ? t.name : t.name.substr(slash + 1);
        worst[kind] = std::max(worst[kind], t.max_rel_error);
    }
    for (const auto& [name, err] : worst) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "%.3e", err);
        out << name << "\t" << buf << "\n";
    }
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.3e", r.max_rel_error());
    out << "redrawn samples\t" << r.redraws << "\n";
    out << (r.passed() ? "PASS" : "FAIL") << "\tmax relative error " << buf << " (tolerance " << a.tolerance << ")\n";
    if (!r.passed()) throw NumericError("gradient check failed");
    return 0;
}

} // namespace

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Sequential-learning harness for a small CNN trained on day-by-day data arrival", "seqlearn"};
    app.require_subcommand(1);
    Args a;

    auto* gen = app.add_subcommand("gen-synth", "write a synthetic class-per-directory PGM dataset");
    gen->add_option("--out", a.out, "output directory")->required();
    gen->add_option("--seed", a.seed, "random seed");
    gen->add_option("--classes", a.classes, "number of classes")->check(CLI::PositiveNumber);
    gen->add_option("--per-class", a.per_class, "images per class")->check(CLI::PositiveNumber);
    gen->add_option("--height", a.height, "image height")->check(CLI::Range(8, 4096));
    gen->add_option("--width", a.width, "image width")->check(CLI::Range(8, 4096));
    gen->add_option("--noise", a.noise, "pixel noise std as a fraction of 255")->check(CLI::Range(0.0, 1.0));

    auto* rot = app.add_subcommand("gen-rotated", "build original / rot_left / rot_right classes from one source class");
    rot->add_option("--data", a.data, "source dataset root")->required();
    rot->add_option("--class", a.label, "source class (default: all images)");
    rot->add_option("--out", a.out, "output directory")->required();
    rot->add_option("--seed", a.seed, "random seed");

    auto* split = app.add_subcommand("split", "write train/val/test manifests for a dataset directory");
    split->add_option("--data", a.data, "dataset root")->required();
    split->add_option("--out", a.out, "directory for train.txt, val.txt, test.txt")->required();
    split->add_option("--seed", a.seed, "random seed");
    split->add_option("--train", a.train_frac, "training fraction");
    split->add_option("--val", a.val_frac, "validation fraction");
    split->add_option("--test", a.test_frac, "test fraction");

    auto* run = app.add_subcommand("run", "run an experiment; extra --section.key=value pairs override the config");
    run->add_option("--config", a.config, "config file")->required();
    auto* run_seed = run->add_option("--seed", a.seed, "overrides protocol.seed");
    run->add_option("--out", a.out, "run directory")->required();
    run->add_flag("--resume", a.resume, "continue from the newest checkpoint in --out");
    run->add_option("--stop-after-day", a.stop_after_day, "checkpoint and stop after this day");
    run->allow_extras();

    auto* ev = app.add_subcommand("evaluate", "score a checkpoint on a manifest");
    ev->add_option("--run", a.run, "run directory (uses its config and final checkpoint)");
    ev->add_option("--split", a.split_name, "train, val or test (with --run)");
    ev->add_option("--checkpoint", a.checkpoint, "checkpoint file");
    ev->add_option("--manifest", a.manifest, "manifest file");
    ev->add_option("--data", a.data, "dataset root");
    ev->add_option("--loss", a.loss, "cross_entropy or bce_with_logits");
    ev->add_option("--batch-size", a.batch_size, "batch size")->check(CLI::PositiveNumber);
    ev->add_option("--norm-mean", a.norm_mean, "normalisation mean");
    ev->add_option("--norm-std", a.norm_std, "normalisation std");

    auto* assess = app.add_subcommand("assess", "plateau and forgetting report from the day-local validation series");
    assess->add_option("--run", a.run, "run directory")->required();
    assess->add_option("--window", a.detectors.window, "plateau window");
    assess->add_option("--slope-tolerance", a.detectors.slope_tolerance, "plateau slope tolerance");
    assess->add_option("--variance-tolerance", a.detectors.variance_tolerance, "plateau variance tolerance");
    assess->add_option("--spike-drop", a.detectors.spike_drop, "forgetting drop threshold");

    auto* plot = app.add_subcommand("plot", "SVG line plot of metrics against days");
    plot->add_option("--run", a.run, "run directory")->required();
    plot->add_option("--metrics", a.metrics, "comma-separated columns");
    plot->add_option("--out", a.out, "SVG path (default <run>/plot.svg)");
    plot->add_option("--title", a.title, "plot title");

    auto* gc = app.add_subcommand("grad-check", "finite-difference check of every layer and both losses");
    gc->add_option("--seeds", a.seeds, "seeds per case")->check(CLI::PositiveNumber);
    gc->add_option("--seed", a.seed, "base seed");
    gc->add_option("--step", a.h, "finite-difference step");
    gc->add_option("--tolerance", a.tolerance, "max relative error");

    if (!args.empty() && args[0].rfind("-", 0) != 0) {
        const auto subs = app.get_subcommands([](CLI::App*) { return true; });
        const bool known = std::any_of(subs.begin(), subs.end(), [&](CLI::App* s) { return s->get_name() == args[0]; });
        if (!known) {
            err << "error: usage_error: unknown subcommand '" << args[0] << "'\n" << app.help();
            return static_cast<int>(ExitCode::usage);
        }
    }
    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "error: usage_error: " << e.what() << "\n" << app.help();
        return static_cast<int>(ExitCode::usage);
    }

    try {
        if (gen->parsed()) return cmd_gen_synth(a, out);
        if (rot->parsed()) return cmd_gen_rotated(a, out);
        if (split->parsed()) return cmd_split(a, out);
        if (run->parsed()) return cmd_run(a, run->remaining(), run_seed->count() > 0, out);
        if (ev->parsed()) return cmd_evaluate(a, out);
        if (assess->parsed()) return cmd_assess(a, *assess, out);
        if (plot->parsed()) return cmd_plot(a, out);
        if (gc->parsed()) return cmd_grad_check(a, out);
    } catch (const Error& e) {
        err << "error: " << e.error_class() << ": " << e.what() << "\n";
        return static_cast<int>(e.exit_code());
    } catch (const fs::filesystem_error& e) {
        err << "error: io_error: " << e.what() << "\n";
        return static_cast<int>(ExitCode::runtime);
    } catch (const std::exception& e) {
        err << "error: runtime_error: " << e.what() << "\n";
        return static_cast<int>(ExitCode::runtime);
    }
    err << "error: usage_error: no subcommand\n" << app.help();
    return static_cast<int>(ExitCode::usage);
}

int dispatch(int argc, const char* const* argv) {
    std::vector<std::string> args;
    for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
    return dispatch(args, std::cout, std::cerr);
}

} // namespace seqlearn
