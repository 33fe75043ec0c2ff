// One PASS/FAIL line per acceptance criterion; exit status 1 if any fails.
// Desk-scale runs go through the command-line dispatcher with the shipped presets.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "seqlearn/augment.hpp"
#include "seqlearn/cli.hpp"
#include "seqlearn/config.hpp"
#include "seqlearn/detectors.hpp"
#include "seqlearn/error.hpp"
#include "seqlearn/fileio.hpp"
#include "seqlearn/gradcheck.hpp"
#include "seqlearn/image.hpp"
#include "seqlearn/loss.hpp"
#include "seqlearn/manifest.hpp"
#include "seqlearn/metrics.hpp"
#include "seqlearn/model.hpp"
#include "seqlearn/protocol.hpp"
#include "seqlearn/rng.hpp"
#include "support.hpp"

using namespace seqlearn;
namespace fs = std::filesystem;

namespace {

const fs::path kPresets = fs::path(SEQLEARN_SOURCE_DIR) / "configs" / "desk";

struct Outcome {
    bool pass = true;
    std::string detail;
    void fail(const std::string& why) {
        if (pass) detail.clear();
        pass = false;
        detail += (detail.empty() ? "" : "; ") + why;
    }
};

void cli(const std::vector<std::string>& args) {
    std::ostringstream out, err;
    const int code = dispatch(args, out, err);
    if (code != 0) {
        std::string line;
        for (const auto& a : args) line += a + " ";
        throw std::runtime_error("seqlearn " + line + "exited " + std::to_string(code) + ": " + err.str());
    }
}

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

double median3(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    return v[1];
}

std::string list(const std::vector<double>& v) {
    std::string s;
    for (double x : v) s += (s.empty() ? "" : ",") + fmt("%g", x);
    return "[" + s + "]";
}

// Working data shared by several criteria, generated on first use.
struct Workspace {
    testing::TempDir dir;
    bool synth32 = false, rotated = false;

    std::string path(const std::string& p) const { return (dir.path() / p).string(); }

    void need_synth32() {
        if (synth32) return;
        cli({"gen-synth", "--out", path("synth32/data"), "--seed", "1", "--per-class", "300", "--height", "32",
             "--width", "32", "--noise", "0.25"});
        cli({"split", "--data", path("synth32/data"), "--out", path("synth32/splits"), "--seed", "1"});
        synth32 = true;
    }
    void need_rotated() {
        if (rotated) return;
        cli({"gen-synth", "--out", path("synth/data"), "--seed", "1", "--per-class", "800", "--height", "32",
             "--width", "32", "--noise", "0.25"});
        cli({"gen-rotated", "--data", path("synth/data"), "--class", "class_00", "--out", path("rot/data"), "--seed",
             "1"});
        cli({"split", "--data", path("rot/data"), "--out", path("rot/splits"), "--seed", "1"});
        rotated = true;
    }

    std::vector<std::string> data_args(const std::string& set) const {
        return {"--data.root=" + path(set + "/data"), "--data.splits=" + path(set + "/splits")};
    }

    void run(const std::string& preset, const std::string& set, int seed, const std::string& out,
             std::vector<std::string> extra = {}) {
        std::vector<std::string> args{"run", "--config", (kPresets / (preset + ".cfg")).string(), "--seed",
                                      std::to_string(seed), "--out", path(out)};
        for (const auto& a : data_args(set)) args.push_back(a);
        for (const auto& a : extra) args.push_back(a);
        cli(args);
    }

    ExperimentConfig config(const std::string& preset, const std::string& set) const {
        return parse_config(kPresets / (preset + ".cfg"),
                            {{"data.root", path(set + "/data")}, {"data.splits", path(set + "/splits")}}, false);
    }
};

Workspace* ws = nullptr;

// ---- 1

Outcome gradient_correctness() {
    Outcome o;
    GradCheckSuiteOptions opt;
    opt.seeds = 20;
    opt.h = 1e-4;
    opt.tolerance = 1e-5;
    const auto report = grad_check_suite(opt);
    const double worst = report.max_rel_error();
    for (const char* kind : {"Conv2d.", "Dense.", "ReLU.", "MaxPool2d.", "Flatten."}) {
        const auto hits = std::count_if(report.tensors.begin(), report.tensors.end(),
                                        [&](const TensorCheck& t) { return t.name.find(kind) != std::string::npos; });
        if (hits == 0) o.fail(std::string("no check covers ") + kind);
    }
    for (LossKind loss : {LossKind::softmax_cross_entropy, LossKind::bce_with_logits}) {
        const std::string tag = "/" + to_string(loss) + "/";
        if (std::none_of(report.tensors.begin(), report.tensors.end(),
                         [&](const TensorCheck& t) { return t.name.find(tag) != std::string::npos; }))
            o.fail("no check covers " + to_string(loss));
    }
    if (!(worst < 1e-5)) o.fail("max relative error " + fmt("%.3e", worst));
    if (!report.smooth) o.fail("a sample still crossed a kink after the redraw cap");
    if (o.pass)
        o.detail = std::to_string(report.tensors.size()) + " tensors, max relative error " + fmt("%.3e", worst) +
                   ", " + std::to_string(report.redraws) + " redraws";
    return o;
}

// ---- 2

Outcome determinism() {
    Outcome o;
    ws->need_synth32();
    ws->run("exp1a", "synth32", 1, "det/a");
    ws->run("exp1a", "synth32", 1, "det/b");
    for (const char* f : {"metrics.csv", "final.sqln"}) {
        const auto a = read_file_bytes(ws->path(std::string("det/a/") + f));
        const auto b = read_file_bytes(ws->path(std::string("det/b/") + f));
        if (a != b) o.fail(std::string(f) + " differs");
        else if (o.pass) o.detail += std::string(o.detail.empty() ? "" : ", ") + f + " identical (" +
                                     std::to_string(a.size()) + " bytes)";
    }
    return o;
}

// ---- 3

std::optional<std::size_t> first_day(const RunLog& log, Metric m, double threshold) {
    // value on the last record of each sequential day
    for (std::size_t i = 0; i < log.records.size(); ++i) {
        const auto& r = log.records[i];
        if (r.phase != Phase::sequential) continue;
        if (i + 1 < log.records.size() && log.records[i + 1].day == r.day) continue;
        const auto v = metric_value(r, m);
        if (v && *v >= threshold) return r.day;
    }
    return std::nullopt;
}

Outcome experiment1() {
    Outcome o;
    ws->need_synth32();
    std::vector<double> a, b;
    for (int seed : {1, 2, 3}) {
        for (const char* variant : {"exp1a", "exp1b"}) {
            const std::string out = std::string("e1/") + variant + "_" + std::to_string(seed);
            ws->run(variant, "synth32", seed, out);
            const RunLog log = read_metrics(ws->path(out + "/metrics.csv"));
            const auto d = first_day(log, Metric::test_accuracy, 0.9);
            if (!d) {
                o.fail(std::string(variant) + " seed " + std::to_string(seed) + " never reaches 0.90 test accuracy");
                continue;
            }
            (variant[4] == 'a' ? a : b).push_back(static_cast<double>(*d));
        }
    }
    if (a.size() == 3 && b.size() == 3) {
        const double ma = median3(a), mb = median3(b);
        const std::string summary = "first day >= 0.90 test: pretrain " + list(a) + " median " + fmt("%g", ma) +
                                    ", no pretrain " + list(b) + " median " + fmt("%g", mb);
        if (!(ma < mb)) o.fail(summary);
        else o.detail = summary;
    }
    return o;
}

// ---- 4

Outcome experiment2() {
    Outcome o;
    ws->need_rotated();
    std::vector<double> a, b;
    for (int seed : {1, 2, 3}) {
        for (const char* strategy : {"exp2a", "exp2b"}) {
            const std::string out = std::string("e2/") + strategy + "_" + std::to_string(seed);
            ws->run(strategy, "rot", seed, out);
            const RunLog log = read_metrics(ws->path(out + "/metrics.csv"));
            const auto d = first_day(log, Metric::val_accuracy, 0.9);
            // never crossing counts as one day past the budget
            (strategy[4] == 'a' ? a : b).push_back(d ? static_cast<double>(*d) : 11.0);
        }
    }
    const double ma = median3(a), mb = median3(b);
    const std::string summary = "first day >= 0.90 day-local val: A " + list(a) + " median " + fmt("%g", ma) +
                                ", B " + list(b) + " median " + fmt("%g", mb);
    if (!(mb < ma)) o.fail(summary);
    else o.detail = summary;
    return o;
}

// ---- 5

std::size_t closed_form_train_size(ValidationStrategy s, std::size_t day, std::size_t n) {
    switch (s) {
    case ValidationStrategy::global_holdout: return n;
    case ValidationStrategy::prev_train_curr_val: return day == 1 ? 0 : n;
    case ValidationStrategy::half_split: return day == 1 ? n / 2 : n;
    }
    return 0;
}

Outcome protocol_laws() {
    Outcome o;
    ws->need_synth32();
    ws->need_rotated();
    std::size_t checked_steps = 0;
    for (const auto& [preset, set] : std::vector<std::pair<std::string, std::string>>{
             {"exp1a", "synth32"}, {"exp1b", "synth32"}, {"exp2a", "rot"}, {"exp2b", "rot"}}) {
        const ExperimentConfig c = ws->config(preset, set);
        const RunResult r = run_experiment(c);
        const std::size_t pool = read_split(c.splits_dir).train.size();

        std::size_t steps = 0;
        std::size_t pretrain_epochs = 0;
        for (const auto& rec : r.log.records) pretrain_epochs += rec.phase == Phase::pretrain;
        if (c.pretrain) steps += pretrain_epochs * ((c.pretrain->subset_size + c.batch_size - 1) / c.batch_size);
        for (std::size_t d = 1; d <= c.total_days; ++d)
            steps += c.epochs_per_day *
                     ((closed_form_train_size(c.strategy, d, c.n_per_day) + c.batch_size - 1) / c.batch_size);
        if (r.model.step != steps)
            o.fail(preset + ": " + std::to_string(r.model.step) + " optimizer steps, closed form " +
                   std::to_string(steps));
        checked_steps += steps;

        std::set<std::size_t> seen(r.pretrain_subset.begin(), r.pretrain_subset.end());
        std::size_t drawn = r.pretrain_subset.size();
        for (const auto& day : r.plan.days) {
            if (day.size() != c.n_per_day) o.fail(preset + ": a day of " + std::to_string(day.size()) + " images");
            for (std::size_t i : day) {
                seen.insert(i);
                ++drawn;
                if (i >= pool) o.fail(preset + ": index outside the training pool");
            }
        }
        if (seen.size() != drawn) o.fail(preset + ": an image was drawn twice");

        std::map<std::size_t, int> tests;
        for (std::size_t i = 0; i < r.log.records.size(); ++i) {
            const auto& rec = r.log.records[i];
            const bool last = i + 1 == r.log.records.size() || r.log.records[i + 1].day != rec.day;
            if (rec.test_accuracy) {
                ++tests[rec.day];
                if (!last || rec.phase != Phase::sequential) o.fail(preset + ": test metrics before the last epoch");
            } else if (last && rec.phase == Phase::sequential) {
                o.fail(preset + ": day " + std::to_string(rec.day) + " has no test metrics");
            }
        }
        if (tests.size() != c.total_days) o.fail(preset + ": test metrics not produced once per day");
        for (auto [d, n] : tests)
            if (n != 1) o.fail(preset + ": day " + std::to_string(d) + " tested " + std::to_string(n) + " times");

        if (c.strategy == ValidationStrategy::prev_train_curr_val) {
            const auto& first = r.log.records.front();
            if (!first.val_accuracy || !first.val_loss) o.fail("strategy A day 1: no validation metrics");
            if (first.train_loss || first.train_accuracy) o.fail("strategy A day 1: has training metrics");
            ExperimentConfig one = c;
            one.total_days = 1;
            const RunResult r1 = run_experiment(one);
            if (r1.model.step != 0) o.fail("strategy A day 1 took " + std::to_string(r1.model.step) + " steps");
            if (r1.log.records.size() != 1) o.fail("strategy A day 1 wrote more than one record");
        }
    }
    if (o.pass) o.detail = "4 desk runs, " + std::to_string(checked_steps) + " optimizer steps matched the closed form";
    return o;
}

// ---- 6

Image random_image(std::size_t w, std::size_t h, Rng& rng) {
    Image im(w, h);
    for (auto& p : im.pixels) p = static_cast<std::uint8_t>(rng.below(256));
    return im;
}

std::optional<double> maybe(Rng& rng, double lo, double hi) {
    if (rng.uniform() < 0.2) return std::nullopt;
    return rng.uniform(lo, hi);
}

Outcome data_pipeline() {
    Outcome o;
    Rng rng(606);
    const auto L = [](const Image& x) { return rotate90(x, RotateDirection::left); };
    const auto R = [](const Image& x) { return rotate90(x, RotateDirection::right); };
    for (int i = 0; i < 200; ++i) {
        const Image im = random_image(1 + rng.below(24), 1 + rng.below(24), rng);
        const bool ok = L(L(L(L(im)))) == im && R(R(R(R(im)))) == im && L(R(im)) == im && R(L(im)) == im &&
                        L(L(im)) == R(R(im)) && L(L(L(im))) == R(im);
        // pixel mapping: left rotation sends (x, y) to (y, w - 1 - x)
        const Image l = L(im);
        bool mapped = l.width == im.height && l.height == im.width;
        for (std::size_t y = 0; mapped && y < im.height; ++y)
            for (std::size_t x = 0; x < im.width; ++x)
                if (l.pixels[(im.width - 1 - x) * l.width + y] != im.pixels[y * im.width + x]) mapped = false;
        if (!ok) o.fail("rotate90 group law violated");
        if (!mapped) o.fail("rotate90 pixel mapping wrong");
        if (!o.pass) break;
    }

    std::vector<ManifestEntry> entries;
    for (int i = 0; i < 10000; ++i) entries.push_back({"c/" + std::to_string(i) + ".pgm", "c"});
    const auto s = split_manifest(Manifest::from_entries(entries), {}, 7);
    std::set<std::string> seen;
    for (const Manifest* part : {&s.train, &s.validation, &s.test})
        for (const auto& e : part->entries()) seen.insert(e.path);
    if (s.train.size() != 7000 || s.validation.size() != 1000 || s.test.size() != 2000 || seen.size() != 10000)
        o.fail("split counts " + std::to_string(s.train.size()) + "/" + std::to_string(s.validation.size()) + "/" +
               std::to_string(s.test.size()));

    testing::TempDir dir;
    for (int i = 0; i < 100; ++i) {
        const Image im = random_image(1 + rng.below(64), 1 + rng.below(64), rng);
        if (!(pgm_decode(pgm_encode(im)) == im)) o.fail("PGM round trip changed an image");
        if (i % 10 == 0) {
            const fs::path p = dir / ("img" + std::to_string(i) + ".pgm");
            pgm_write(im, p);
            if (!(pgm_read(p) == im)) o.fail("PGM file round trip changed an image");
        }
    }

    for (int trial = 0; trial < 50; ++trial) {
        RunLog log;
        log.run_id = "r" + std::to_string(trial);
        std::size_t day = 0;
        if (rng.uniform() < 0.5)
            for (std::size_t e = 1; e <= 1 + rng.below(4); ++e) {
                MetricsRecord r;
                r.phase = Phase::pretrain;
                r.day = 0;
                r.epoch = e;
                r.train_loss = rng.uniform(0, 5) * std::pow(10.0, -double(rng.below(12)));
                r.train_accuracy = rng.uniform();
                r.val_loss = maybe(rng, 0, 3);
                r.val_accuracy = rng.uniform();
                log.records.push_back(r);
            }
        for (std::size_t k = 0; k < 1 + rng.below(30); ++k) {
            ++day;
            const std::size_t epochs = 1 + rng.below(3);
            for (std::size_t e = 1; e <= epochs; ++e) {
                MetricsRecord r;
                r.day = day;
                r.epoch = e;
                r.train_loss = maybe(rng, 0, 1e3);
                r.train_accuracy = maybe(rng, 0, 1);
                r.val_loss = maybe(rng, 0, 3);
                r.val_accuracy = maybe(rng, 0, 1);
                if (e == epochs) {
                    r.test_loss = rng.uniform(0, 3) / 3.0;
                    r.test_accuracy = double(rng.below(181)) / 180.0;
                }
                log.records.push_back(r);
            }
        }
        const fs::path p = dir / "m.csv";
        write_metrics(log, p);
        const RunLog back = read_metrics(p);
        if (back.run_id != log.run_id || back.records != log.records) {
            o.fail("metrics CSV round trip is lossy");
            break;
        }
    }

    const AugmentConfig off{0, 0, 0, 0};
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        Rng r(seed);
        const Image im = random_image(1 + rng.below(40), 1 + rng.below(40), rng);
        if (!(augment(im, off, r) == im)) o.fail("augment with everything off changed an image");
    }
    if (o.pass)
        o.detail = "rotate90 laws on 200 images, split 7000/1000/2000, 100 PGM and 50 CSV round trips exact, "
                   "augment identity";
    return o;
}

// ---- 7

Outcome detectors() {
    Outcome o;
    Rng rng(707);
    std::size_t ambiguous = 0, plateaus = 0, spikes_total = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t len = 2 + rng.below(499);
        DetectorConfig cfg;
        cfg.window = 2 + rng.below(std::min<std::size_t>(len - 1, 40));
        cfg.slope_tolerance = rng.uniform(0.0, 0.01);
        cfg.variance_tolerance = rng.uniform(0.0, 0.005);
        cfg.spike_drop = rng.uniform(0.01, 0.5);
        std::vector<double> s(len);
        const double rate = rng.uniform(0.005, 0.2), noise = rng.uniform(0.0, 0.05);
        for (std::size_t i = 0; i < len; ++i) {
            double v = 1.0 - std::exp(-rate * double(i)) * 0.7 + noise * rng.normal();
            if (rng.uniform() < 0.02) v -= rng.uniform(0.1, 0.5);
            s[i] = std::clamp(v, 0.0, 1.0);
        }

        // least squares on x = 0..w-1 from raw sums in long double
        std::optional<std::size_t> want;
        bool unclear = false;
        for (std::size_t i = 0; i + cfg.window <= len && !want; ++i) {
            long double sx = 0, sy = 0, sxx = 0, sxy = 0, syy = 0;
            for (std::size_t j = 0; j < cfg.window; ++j) {
                const long double x = j, y = s[i + j];
                sx += x, sy += y, sxx += x * x, sxy += x * y, syy += y * y;
            }
            const long double n = cfg.window;
            const long double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
            const long double var = (syy - sy * sy / n) / (n - 1);
            const long double ds = std::fabs(slope) - cfg.slope_tolerance;
            const long double dv = var - cfg.variance_tolerance;
            if (std::fabs(ds) < 1e-12L || std::fabs(dv) < 1e-12L) unclear = true;
            if (ds <= 0 && dv <= 0) want = i;
        }
        if (unclear) {
            ++ambiguous;
        } else if (plateau_detect(s, cfg) != want) {
            o.fail("plateau mismatch on series " + std::to_string(trial));
        } else {
            plateaus += want.has_value();
        }

        std::vector<std::size_t> spikes;
        for (std::size_t i = 1; i < len; ++i)
            if (s[i - 1] - s[i] >= cfg.spike_drop) spikes.push_back(i);
        if (spike_detect(s, cfg.spike_drop) != spikes) o.fail("spike mismatch on series " + std::to_string(trial));
        spikes_total += spikes.size();
    }
    if (ambiguous >= 5) o.fail(std::to_string(ambiguous) + " series too close to a tolerance to judge");
    const std::vector<double> example{0.90, 0.92, 0.55, 0.90};
    if (spike_detect(example, 0.2) != std::vector<std::size_t>{2}) o.fail("spike example does not flag exactly 2");
    if (o.pass)
        o.detail = "1000 series (" + std::to_string(plateaus) + " with a plateau, " + std::to_string(spikes_total) +
                   " spikes, " + std::to_string(ambiguous) + " skipped at a tolerance edge), example flags {2}";
    return o;
}

// ---- 8

Outcome resume() {
    Outcome o;
    ws->need_synth32();
    if (!fs::exists(ws->path("det/a/final.sqln"))) ws->run("exp1a", "synth32", 1, "det/a");
    ws->run("exp1a", "synth32", 1, "res", {"--stop-after-day", "17"});
    if (fs::exists(ws->path("res/final.sqln"))) o.fail("interrupted run wrote a final checkpoint");
    ws->run("exp1a", "synth32", 1, "res", {"--resume"});
    const RunLog full = read_metrics(ws->path("det/a/metrics.csv"));
    const RunLog resumed = read_metrics(ws->path("res/metrics.csv"));
    std::size_t tail = 0;
    if (full.records != resumed.records) o.fail("run log differs after resume");
    for (const auto& r : full.records) tail += r.day > 17;
    if (read_file_bytes(ws->path("det/a/metrics.csv")) != read_file_bytes(ws->path("res/metrics.csv")))
        o.fail("metrics.csv bytes differ");
    if (read_file_bytes(ws->path("det/a/final.sqln")) != read_file_bytes(ws->path("res/final.sqln")))
        o.fail("final checkpoint differs");
    if (o.pass) o.detail = "stopped after day 17, " + std::to_string(tail) + " tail records and final checkpoint identical";
    return o;
}

// ---- 9

Outcome overfit() {
    Outcome o;
    for (LossKind loss : {LossKind::softmax_cross_entropy, LossKind::bce_with_logits}) {
        const Shape in{1, 8, 8};
        auto model = build_model<float>(default_layers(in, 3, 4, 1, 3), in, 7);
        Rng rng(12);
        Tensor<float> x({8, 1, 8, 8});
        for (float& v : x.values()) v = static_cast<float>(rng.normal());
        const std::vector<std::size_t> labels{0, 1, 2, 0, 1, 2, 0, 1};
        OptimizerConfig cfg;
        cfg.kind = OptimizerKind::adam;
        const double initial = train_step(model, x, labels, loss, cfg).loss;
        for (int i = 1; i < 200; ++i) train_step(model, x, labels, loss, cfg);
        const double after = loss_forward_backward(loss, predict_batch(model, x).logits, labels).loss;
        const std::string s = to_string(loss) + " " + fmt("%.4f", initial) + " -> " + fmt("%.4f", after);
        if (!(after < 0.5 * initial)) o.fail(s);
        else o.detail += (o.detail.empty() ? "" : ", ") + s;
    }
    return o;
}

} // namespace

int main() {
    Workspace workspace;
    ws = &workspace;
    struct Criterion {
        const char* name;
        double limit_s;
        std::function<Outcome()> fn;
    };
    const std::vector<Criterion> criteria{
        {"gradient correctness", 60, gradient_correctness},
        {"determinism", 300, determinism},
        {"experiment 1 analog (pretraining)", 600, experiment1},
        {"experiment 2 analog (validation strategy)", 600, experiment2},
        {"protocol laws", 0, protocol_laws},
        {"data pipeline properties", 0, data_pipeline},
        {"detector oracle equivalence", 0, detectors},
        {"checkpoint resume", 0, resume},
        {"overfit sanity", 0, overfit},
    };
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const auto& c = criteria[i];
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.fn();
        } catch (const std::exception& e) {
            o.pass = false;
            o.detail = std::string("exception: ") + e.what();
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (c.limit_s > 0 && secs >= c.limit_s) o.fail("took " + fmt("%.1f", secs) + " s, limit " + fmt("%g", c.limit_s));
        failed += !o.pass;
        std::printf("%s %zu %s: %s (%.1f s)\n", o.pass ? "PASS" : "FAIL", i + 1, c.name, o.detail.c_str(), secs);
        std::fflush(stdout);
    }
    std::printf("%zu/%zu criteria passed\n", criteria.size() - failed, criteria.size());
    return failed == 0 ? 0 : 1;
}
