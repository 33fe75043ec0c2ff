#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <map>
#include <fstream>
#include <set>

#include "seqlearn/checkpoint.hpp"
#include "seqlearn/config.hpp"
#include "seqlearn/error.hpp"
#include "seqlearn/fileio.hpp"
#include "seqlearn/protocol.hpp"
#include "support.hpp"

using namespace seqlearn;

namespace {

struct Fixture {
    testing::TempDir dir;
    Fixture(std::size_t per_class = 30, double noise = 0.1) { testing::make_dataset(dir.path(), per_class, 16, noise); }
    LoadedData load(std::size_t which) const {
        const auto s = read_split(dir / "splits");
        const Manifest& m = which == 0 ? s.train : which == 1 ? s.validation : s.test;
        return load_data(m, dir / "data");
    }
};

ModelState<float> small_model(std::uint64_t seed = 3) {
    const Shape in{1, 16, 16};
    return build_model<float>(resolve_layers(parse_layers("conv:4:3:1:1,relu,maxpool:2,flatten,dense:3"), in), in, seed);
}

std::vector<std::size_t> iota_n(std::size_t n, std::size_t from = 0) {
    std::vector<std::size_t> v(n);
    for (std::size_t i = 0; i < n; ++i) v[i] = from + i;
    return v;
}

std::size_t expected_steps(const ExperimentConfig& c, const RunResult& r) {
    std::size_t steps = 0;
    for (const auto& rec : r.log.records)
        if (rec.phase == Phase::pretrain) steps += steps_per_epoch(r.pretrain_subset.size(), c.batch_size);
    for (std::size_t d = 1; d <= r.plan.days.size(); ++d) {
        const auto& prev = d > 1 ? r.plan.days[d - 2] : std::vector<std::size_t>{};
        const auto split = day_split(c.strategy, d, prev, r.plan.days[d - 1], c.seed);
        steps += c.epochs_per_day * steps_per_epoch(split.train.size(), c.batch_size);
    }
    return steps;
}

} // namespace

TEST_CASE("steps per epoch keeps the partial batch") {
    CHECK(steps_per_epoch(20, 16) == 2);
    CHECK(steps_per_epoch(50, 16) == 4);
    CHECK(steps_per_epoch(16, 16) == 1);
    CHECK(steps_per_epoch(0, 16) == 0);
}

TEST_CASE("evaluate: constant logits score the class-0 share, deterministically") {
    Fixture f;
    const LoadedData test = f.load(2);
    auto model = small_model();
    for (auto& p : model.params) {
        p.weight.fill(0.0f);
        p.bias.fill(0.0f);
    }
    const auto r = evaluate(model, test, LossKind::softmax_cross_entropy, 4, NormalizationSpec{});
    CHECK(r.accuracy == doctest::Approx(1.0 / 3.0));
    CHECK(r.loss == doctest::Approx(std::log(3.0)).epsilon(1e-6));

    const auto trained = small_model(8);
    const auto a = evaluate(trained, test, LossKind::bce_with_logits, 5, NormalizationSpec{});
    const auto b = evaluate(trained, test, LossKind::bce_with_logits, 5, NormalizationSpec{});
    CHECK(std::memcmp(&a, &b, sizeof a) == 0);
    // batch size does not change the answer beyond rounding
    const auto c = evaluate(trained, test, LossKind::bce_with_logits, 18, NormalizationSpec{});
    CHECK(c.accuracy == a.accuracy);
    CHECK(c.loss == doctest::Approx(a.loss).epsilon(1e-6));

    CHECK_THROWS_AS(evaluate(trained, test, {}, LossKind::bce_with_logits, 5, NormalizationSpec{}), UsageError);
}

TEST_CASE("evaluate: a matched-filter model is perfect on noise-free data") {
    testing::TempDir dir;
    testing::make_dataset(dir.path(), 10, 16, 0.0, 2);
    const auto s = read_split(dir / "splits");
    const LoadedData data = load_data(s.train, dir / "data");
    const Shape in{1, 16, 16};
    auto model = build_model<float>(resolve_layers(parse_layers("flatten,dense:3"), in), in, 1);
    const NormalizationSpec norm;
    for (std::size_t k = 0; k < 3; ++k) {
        const auto proto = normalize<float>(synth_prototype(k, 3, 16, 16), norm);
        double sq = 0;
        for (std::size_t i = 0; i < proto.size(); ++i) {
            model.params[1].weight[k * proto.size() + i] = proto[i];
            sq += double(proto[i]) * proto[i];
        }
        model.params[1].bias[k] = static_cast<float>(-sq / 2);
    }
    CHECK(evaluate(model, data, LossKind::softmax_cross_entropy, 7, norm).accuracy == 1.0);
}

TEST_CASE("run_day step counts and records") {
    Fixture f;
    const LoadedData train = f.load(0);
    const LoadedData val = f.load(1);
    const EvalSet v{&val, iota_n(val.images.size())};
    TrainSettings s;
    s.batch_size = 16;
    s.seed = 2;

    auto model = small_model();
    auto recs = run_day(model, 1, train, iota_n(20), v, 1, s);
    CHECK(model.step == 2);
    REQUIRE(recs.size() == 1);
    CHECK(recs[0].train_loss.has_value());
    CHECK(recs[0].val_accuracy.has_value());
    CHECK_FALSE(recs[0].test_accuracy.has_value());

    model = small_model();
    recs = run_day(model, 2, train, iota_n(50), v, 3, s);
    CHECK(model.step == 12);
    REQUIRE(recs.size() == 3);
    CHECK(recs[2].epoch == 3);

    model = small_model();
    const auto before = model;
    recs = run_day(model, 1, train, {}, EvalSet{&train, iota_n(10)}, 5, s);
    CHECK(model == before);
    REQUIRE(recs.size() == 1);
    CHECK_FALSE(recs[0].train_loss.has_value());
    CHECK(recs[0].val_loss.has_value());

    CHECK_THROWS_AS(run_day(model, 1, train, {}, EvalSet{}, 1, s), UsageError);
}

TEST_CASE("pretrain stop rule") {
    Fixture f;
    const LoadedData train = f.load(0);
    const LoadedData val = f.load(1);
    const EvalSet v{&val, iota_n(val.images.size())};
    TrainSettings s;
    s.batch_size = 8;

    auto model = small_model();
    auto recs = pretrain(model, train, iota_n(30), v, PretrainConfig{30, 5, 0.0}, s);
    REQUIRE(recs.size() == 1);
    CHECK(recs[0].phase == Phase::pretrain);
    CHECK(recs[0].day == 0);
    CHECK(model.step == 4);

    model = small_model();
    recs = pretrain(model, train, iota_n(30), v, PretrainConfig{30, 3, 0.9}, s);
    CHECK(recs.size() <= 3);
    for (std::size_t i = 0; i + 1 < recs.size(); ++i) CHECK(*recs[i].val_accuracy < 0.9);
    CHECK((recs.size() == 3 || *recs.back().val_accuracy >= 0.9));

    CHECK_THROWS_AS(pretrain(model, train, {}, v, PretrainConfig{}, s), ConfigError);
}

TEST_CASE("experiment laws under every strategy") {
    Fixture f;
    for (auto strategy : {ValidationStrategy::global_holdout, ValidationStrategy::prev_train_curr_val,
                          ValidationStrategy::half_split}) {
        CAPTURE(to_string(strategy));
        ExperimentConfig c = testing::small_config(f.dir.path());
        c.strategy = strategy;
        c.pretrain = PretrainConfig{12, 2, 0.99};
        c.total_days = 5;
        const RunResult r = run_experiment(c);

        // step-count law
        CHECK(r.model.step == expected_steps(c, r));

        // no replacement across days and the pretrain subset
        std::set<std::size_t> seen(r.pretrain_subset.begin(), r.pretrain_subset.end());
        CHECK(seen.size() == 12);
        for (const auto& d : r.plan.days)
            for (std::size_t i : d) {
                CHECK(i < 63);
                CHECK(seen.insert(i).second);
            }

        // test metrics once per day, on the last epoch
        std::map<std::size_t, int> tests;
        for (std::size_t i = 0; i < r.log.records.size(); ++i) {
            const auto& rec = r.log.records[i];
            if (rec.test_accuracy) {
                ++tests[rec.day];
                const bool last = i + 1 == r.log.records.size() || r.log.records[i + 1].day != rec.day;
                CHECK(last);
            }
        }
        CHECK(tests.size() == 5);
        for (auto [d, n] : tests) CHECK(n == 1);

        // the first sequential record
        const auto first = std::find_if(r.log.records.begin(), r.log.records.end(),
                                        [](const MetricsRecord& x) { return x.phase == Phase::sequential; });
        REQUIRE(first != r.log.records.end());
        CHECK(first->val_accuracy.has_value());
        if (strategy == ValidationStrategy::prev_train_curr_val) {
            CHECK_FALSE(first->train_loss.has_value());
            CHECK_FALSE(first->train_accuracy.has_value());
        } else {
            CHECK(first->train_loss.has_value());
        }
        CHECK_NOTHROW(validate_log(r.log));
        CHECK(r.log.metadata.at("validation_strategy") == to_string(strategy));
    }
}

TEST_CASE("strategy A day 1 takes zero optimizer steps") {
    Fixture f;
    ExperimentConfig c = testing::small_config(f.dir.path());
    c.strategy = ValidationStrategy::prev_train_curr_val;
    c.total_days = 1;
    const RunResult r = run_experiment(c);
    CHECK(r.model.step == 0);
    REQUIRE(r.log.records.size() == 1);
    CHECK(r.log.records[0].val_accuracy.has_value());
    CHECK(r.log.records[0].test_accuracy.has_value());
}

TEST_CASE("run directory contents, determinism and resume") {
    Fixture f;
    ExperimentConfig c = testing::small_config(f.dir.path());
    c.strategy = ValidationStrategy::half_split;
    const auto out = f.dir / "runs";

    run_experiment(c, {out / "a"});
    for (const char* name : {"config.txt", "dayplan.txt", "metrics.csv", "final.sqln", "run_meta.txt"})
        CHECK(std::filesystem::exists(out / "a" / name));
    CHECK(std::filesystem::exists(out / "a/checkpoints/day_0002.sqln"));
    CHECK_FALSE(std::filesystem::exists(out / "a/.lock"));
    CHECK(read_file_text(out / "a/config.txt") == config_to_text(c));

    run_experiment(c, {out / "b"});
    CHECK(read_file_bytes(out / "a/metrics.csv") == read_file_bytes(out / "b/metrics.csv"));
    CHECK(read_file_bytes(out / "a/final.sqln") == read_file_bytes(out / "b/final.sqln"));

    const auto stopped = run_experiment(c, {out / "r", false, 3});
    CHECK(stopped.interrupted);
    CHECK(stopped.completed_days == 3);
    CHECK_FALSE(std::filesystem::exists(out / "r/final.sqln"));
    const auto resumed = run_experiment(c, {out / "r", true, std::nullopt});
    CHECK(resumed.resumed_from_day == 3);
    CHECK(read_file_bytes(out / "a/metrics.csv") == read_file_bytes(out / "r/metrics.csv"));
    CHECK(read_file_bytes(out / "a/final.sqln") == read_file_bytes(out / "r/final.sqln"));

    ExperimentConfig other = c;
    other.seed = 99;
    CHECK_THROWS_AS(run_experiment(other, {out / "r", true, std::nullopt}), ConfigError);

    std::ofstream(out / "a/.lock") << "held";
    CHECK_THROWS_AS(run_experiment(c, {out / "a"}), UsageError);
}

TEST_CASE("non-finite loss aborts with a diagnostic checkpoint") {
    Fixture f;
    ExperimentConfig c = testing::small_config(f.dir.path());
    c.optimizer.learning_rate = 1e30;
    const auto out = f.dir / "boom";
    CHECK_THROWS_AS(run_experiment(c, {out}), NumericError);
    bool found = false;
    for (const auto& e : std::filesystem::directory_iterator(out / "checkpoints"))
        found = found || e.path().filename().string().rfind("abort_day_", 0) == 0;
    CHECK(found);
}

TEST_CASE("experiment config invariants") {
    Fixture f;
    ExperimentConfig c = testing::small_config(f.dir.path());
    c.pretrain = PretrainConfig{64, 1, 0.5};
    CHECK_THROWS_AS(run_experiment(c), ConfigError);  // only 63 training images
    c = testing::small_config(f.dir.path());
    c.strategy = ValidationStrategy::half_split;
    c.n_per_day = 9;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = testing::small_config(f.dir.path());
    c.batch_size = 0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = testing::small_config(f.dir.path());
    c.total_days = 7;
    CHECK_THROWS_AS(run_experiment(c), DataError);  // 70 > 63
    c = testing::small_config(f.dir.path());
    c.layers = "conv:4:3:1:1,relu,flatten,dense:5";
    CHECK_THROWS_AS(run_experiment(c), ConfigError);
    c = testing::small_config(f.dir.path());
    c.data_root.clear();
    CHECK_THROWS_AS(run_experiment(c), ConfigError);

    ExperimentConfig a = testing::small_config(f.dir.path());
    ExperimentConfig b = a;
    CHECK(run_id_for(a) == run_id_for(b));
    b.seed += 1;
    CHECK(run_id_for(a) != run_id_for(b));
    CHECK(run_id_for(a).size() == 13);
}
