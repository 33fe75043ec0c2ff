#include "seqlearn/protocol.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <numeric>
#include <set>
#include <sstream>

#include "seqlearn/checkpoint.hpp"
#include "seqlearn/config.hpp"
#include "seqlearn/error.hpp"
#include "seqlearn/fileio.hpp"
#include "seqlearn/image.hpp"

namespace seqlearn {

void ExperimentConfig::validate() const {
    auto positive = [](std::size_t v, const char* name) {
        if (v < 1) throw ConfigError(std::string(name) + " must be >= 1");
    };
    positive(batch_size, "protocol.batch_size");
    positive(total_days, "schedule.days");
    positive(n_per_day, "schedule.n_per_day");
    positive(epochs_per_day, "schedule.epochs_per_day");
    positive(conv_channels, "model.conv_channels");
    positive(kernel, "model.kernel");
    optimizer.validate();
    augment.validate();
    normalization.validate();
    detectors.validate();
    if (pretrain) {
        positive(pretrain->subset_size, "protocol.pretrain_size");
        positive(pretrain->epoch_cap, "protocol.pretrain_epochs");
        if (!(pretrain->target_accuracy >= 0.0 && pretrain->target_accuracy <= 1.0))
            throw ConfigError("protocol.pretrain_target must lie in [0, 1]");
    }
    if (strategy == ValidationStrategy::half_split && n_per_day % 2 != 0)
        throw ConfigError("schedule.n_per_day must be even for the half_split strategy, got " +
                          std::to_string(n_per_day));
    if (!layers.empty()) parse_layers(layers);
}

Shape LoadedData::input_shape() const {
    if (images.empty()) throw DataError("no images loaded");
    return {images[0].channels, images[0].height, images[0].width};
}

LoadedData load_data(const Manifest& manifest, const std::filesystem::path& root) {
    LoadedData out;
    out.manifest = manifest;
    out.labels = manifest.labels();
    out.images.reserve(manifest.size());
    for (const auto& e : manifest.entries()) {
        out.images.push_back(pgm_read(root / e.path));
        const Image& im = out.images.back();
        const Image& first = out.images.front();
        if (im.width != first.width || im.height != first.height || im.channels != first.channels)
            throw DataError(e.path + ": image is " + std::to_string(im.width) + "x" + std::to_string(im.height) +
                            ", expected " + std::to_string(first.width) + "x" + std::to_string(first.height));
    }
    return out;
}

namespace {

struct Batch {
    Tensor<float> inputs;
    std::vector<std::size_t> labels;
};

// augment_tags: nullptr for evaluation, else {day, epoch} for per-sample streams.
Batch make_batch(const LoadedData& data, std::span<const std::size_t> indices, const NormalizationSpec& norm,
                 const AugmentConfig* augment_cfg, std::uint64_t seed, std::size_t day, std::size_t epoch) {
    const Shape sample = data.input_shape();
    const std::size_t per = shape_size(sample);
    Batch b;
    b.inputs = Tensor<float>({indices.size(), sample[0], sample[1], sample[2]});
    b.labels.reserve(indices.size());
    auto values = b.inputs.values();
    for (std::size_t i = 0; i < indices.size(); ++i) {
        const std::size_t idx = indices[i];
        if (idx >= data.images.size()) throw DataError("entry index " + std::to_string(idx) + " out of range");
        std::span<float> dst = values.subspan(i * per, per);
        if (augment_cfg) {
            Rng rng(seed, Stream::augment, {day, epoch, idx});
            normalize_into<float>(augment(data.images[idx], *augment_cfg, rng), norm, dst);
        } else {
            normalize_into<float>(data.images[idx], norm, dst);
        }
        b.labels.push_back(data.labels[idx]);
    }
    return b;
}

struct EpochTotals {
    double loss = 0.0;
    double accuracy = 0.0;
};

EpochTotals train_epoch(ModelState<float>& model, const LoadedData& data, std::vector<std::size_t> order,
                        Rng& shuffle_rng, const TrainSettings& s, std::size_t day, std::size_t epoch) {
    shuffle_rng.shuffle(std::span<std::size_t>(order));
    double loss_sum = 0.0;
    std::size_t correct = 0;
    for (std::size_t start = 0; start < order.size(); start += s.batch_size) {
        const std::size_t n = std::min(s.batch_size, order.size() - start);
        const std::span<const std::size_t> idx(order.data() + start, n);
        const Batch b = make_batch(data, idx, s.normalization, &s.augment, s.seed, day, epoch);
        const auto r = train_step(model, b.inputs, b.labels, s.loss, s.optimizer);
        loss_sum += r.loss * static_cast<double>(n);
        correct += r.correct;
    }
    const double total = static_cast<double>(order.size());
    return {loss_sum / total, static_cast<double>(correct) / total};
}

EvalResult evaluate_set(const ModelState<float>& model, const EvalSet& set, const TrainSettings& s) {
    return evaluate(model, *set.data, set.indices, s.loss, s.batch_size, s.normalization);
}

std::vector<std::size_t> all_indices(std::size_t n) {
    std::vector<std::size_t> v(n);
    std::iota(v.begin(), v.end(), std::size_t{0});
    return v;
}

} // namespace

EvalResult evaluate(const ModelState<float>& model, const LoadedData& data, const std::vector<std::size_t>& indices,
                    LossKind loss, std::size_t batch_size, const NormalizationSpec& norm) {
    if (indices.empty()) throw UsageError("evaluate: empty dataset");
    if (batch_size < 1) throw UsageError("evaluate: batch size must be >= 1");
    double loss_sum = 0.0;
    std::size_t correct = 0;
    for (std::size_t start = 0; start < indices.size(); start += batch_size) {
        const std::size_t n = std::min(batch_size, indices.size() - start);
        const Batch b = make_batch(data, std::span<const std::size_t>(indices.data() + start, n), norm, nullptr, 0, 0, 0);
        const auto pred = predict_batch(model, b.inputs);
        const auto lr = loss_forward_backward(loss, pred.logits, b.labels);
        loss_sum += lr.loss * static_cast<double>(n);
        for (std::size_t i = 0; i < n; ++i) correct += pred.classes[i] == b.labels[i];
    }
    const double total = static_cast<double>(indices.size());
    return {loss_sum / total, static_cast<double>(correct) / total};
}

EvalResult evaluate(const ModelState<float>& model, const LoadedData& data, LossKind loss, std::size_t batch_size,
                    const NormalizationSpec& norm) {
    return evaluate(model, data, all_indices(data.images.size()), loss, batch_size, norm);
}

std::vector<MetricsRecord> pretrain(ModelState<float>& model, const LoadedData& train,
                                    const std::vector<std::size_t>& subset, const EvalSet& validation,
                                    const PretrainConfig& config, const TrainSettings& settings) {
    if (subset.empty()) throw ConfigError("pretrain: empty subset");
    if (config.epoch_cap < 1) throw ConfigError("pretrain: epoch cap must be >= 1");
    std::vector<MetricsRecord> records;
    for (std::size_t epoch = 1; epoch <= config.epoch_cap; ++epoch) {
        Rng shuffle_rng(settings.seed, Stream::pretrain_shuffle, {epoch});
        const auto t = train_epoch(model, train, subset, shuffle_rng, settings, 0, epoch);
        const auto v = evaluate_set(model, validation, settings);
        MetricsRecord r;
        r.phase = Phase::pretrain;
        r.day = 0;
        r.epoch = epoch;
        r.train_loss = t.loss;
        r.train_accuracy = t.accuracy;
        r.val_loss = v.loss;
        r.val_accuracy = v.accuracy;
        records.push_back(r);
        if (v.accuracy >= config.target_accuracy) break;
    }
    return records;
}

std::vector<MetricsRecord> run_day(ModelState<float>& model, std::size_t day, const LoadedData& train,
                                   const std::vector<std::size_t>& train_indices, const EvalSet& validation,
                                   std::size_t epochs, const TrainSettings& settings) {
    if (day < 1) throw UsageError("run_day: days are numbered from 1");
    if (epochs < 1) throw ConfigError("run_day: epochs per day must be >= 1");
    const bool has_val = validation.data && !validation.indices.empty();
    std::vector<MetricsRecord> records;
    if (train_indices.empty()) {
        if (!has_val) throw UsageError("run_day: day " + std::to_string(day) + " has neither training nor validation data");
        const auto v = evaluate_set(model, validation, settings);
        MetricsRecord r;
        r.day = day;
        r.val_loss = v.loss;
        r.val_accuracy = v.accuracy;
        records.push_back(r);
        return records;
    }
    for (std::size_t epoch = 1; epoch <= epochs; ++epoch) {
        Rng shuffle_rng(settings.seed, Stream::day_shuffle, {day, epoch});
        const auto t = train_epoch(model, train, train_indices, shuffle_rng, settings, day, epoch);
        MetricsRecord r;
        r.day = day;
        r.epoch = epoch;
        r.train_loss = t.loss;
        r.train_accuracy = t.accuracy;
        if (has_val) {
            const auto v = evaluate_set(model, validation, settings);
            r.val_loss = v.loss;
            r.val_accuracy = v.accuracy;
        }
        records.push_back(r);
    }
    return records;
}

std::string run_id_for(const ExperimentConfig& config) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "r%012llx",
                  static_cast<unsigned long long>(config_hash(config) >> 16));
    return buf;
}

namespace {

namespace fs = std::filesystem;

class RunLock {
public:
    explicit RunLock(fs::path path) : path_(std::move(path)) {
        std::FILE* f = std::fopen(path_.c_str(), "wx");
        if (!f)
            throw UsageError("run directory " + path_.parent_path().string() +
                             " is locked by another invocation (remove " + path_.filename().string() +
                             " if that run is gone)");
        std::fputs("locked\n", f);
        std::fclose(f);
    }
    ~RunLock() {
        std::error_code ec;
        fs::remove(path_, ec);
    }
    RunLock(const RunLock&) = delete;
    RunLock& operator=(const RunLock&) = delete;

private:
    fs::path path_;
};

fs::path day_checkpoint_path(const fs::path& out, std::size_t day) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "day_%04zu.sqln", day);
    return out / "checkpoints" / buf;
}

std::optional<std::size_t> latest_checkpoint_day(const fs::path& out, std::size_t max_day) {
    std::optional<std::size_t> best;
    for (std::size_t d = 1; d <= max_day; ++d)
        if (fs::exists(day_checkpoint_path(out, d))) best = d;
    return best;
}

std::string wall_clock() {
    const auto now = std::chrono::system_clock::now();
    const auto secs = std::chrono::duration_cast<std::chrono::seconds>(now.time_since_epoch()).count();
    return std::to_string(secs);
}

std::string join(const std::vector<std::size_t>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + std::to_string(v[i]);
    return out;
}

} // namespace

RunResult run_experiment(const ExperimentConfig& config, const RunOptions& options) {
    config.validate();
    if (config.data_root.empty()) throw ConfigError("data.root is required to run an experiment");
    if (config.splits_dir.empty()) throw ConfigError("data.splits is required to run an experiment");
    if (options.stop_after_day && (*options.stop_after_day < 1 || *options.stop_after_day > config.total_days))
        throw UsageError("stop-after-day must lie in [1, " + std::to_string(config.total_days) + "]");

    const ManifestSplit split = read_split(config.splits_dir);
    if (split.train.class_names() != split.validation.class_names() ||
        split.train.class_names() != split.test.class_names())
        throw DataError("train, validation and test manifests list different classes");
    const LoadedData train = load_data(split.train, config.data_root);
    const LoadedData val = load_data(split.validation, config.data_root);
    const LoadedData test = load_data(split.test, config.data_root);
    const Shape shape = train.input_shape();
    if (val.input_shape() != shape || test.input_shape() != shape)
        throw DataError("splits have different image sizes");

    const std::size_t classes = split.train.class_names().size();
    std::vector<LayerSpec> layers =
        config.layers.empty()
            ? default_layers(shape, classes, config.conv_channels, config.conv_blocks, config.kernel)
            : resolve_layers(parse_layers(config.layers), shape);

    RunResult result;
    result.model = build_model<float>(layers, shape, config.seed);
    if (result.model.num_classes() != classes)
        throw ConfigError("model.layers produces " + std::to_string(result.model.num_classes()) +
                          " outputs but the dataset has " + std::to_string(classes) + " classes");

    // Pretrain subset and the day pool are disjoint.
    std::vector<std::size_t> pool = all_indices(train.images.size());
    if (config.pretrain) {
        if (config.pretrain->subset_size > pool.size())
            throw ConfigError("protocol.pretrain_size " + std::to_string(config.pretrain->subset_size) +
                              " exceeds the training split (" + std::to_string(pool.size()) + ")");
        std::vector<std::size_t> perm = pool;
        Rng(config.seed, Stream::pretrain_pick).shuffle(std::span<std::size_t>(perm));
        result.pretrain_subset.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(config.pretrain->subset_size));
        std::sort(result.pretrain_subset.begin(), result.pretrain_subset.end());
        pool.assign(perm.begin() + static_cast<std::ptrdiff_t>(config.pretrain->subset_size), perm.end());
        std::sort(pool.begin(), pool.end());
    }
    result.plan = plan_days(pool, {config.n_per_day, config.total_days, config.seed, config.allow_short_final_day});

    const TrainSettings settings{config.optimizer, config.loss, config.batch_size,
                                 config.augment, config.normalization, config.seed};
    const EvalSet global_val{&val, all_indices(val.images.size())};

    RunLog& log = result.log;
    log.run_id = run_id_for(config);
    log.metadata["validation_strategy"] = to_string(config.strategy);
    log.metadata["seed"] = std::to_string(config.seed);

    const fs::path& out = options.out_dir;
    const bool persist = !out.empty();
    std::optional<RunLock> lock;
    const std::string config_text = config_to_text(config);
    std::size_t start_day = 1;
    bool need_pretrain = config.pretrain.has_value();

    if (persist) {
        fs::create_directories(out / "checkpoints");
        lock.emplace(out / ".lock");
        const fs::path config_path = out / "config.txt";
        if (options.resume && fs::exists(config_path)) {
            if (read_file_text(config_path) != config_text)
                throw ConfigError("refusing to resume " + out.string() +
                                  ": effective config (hash " + run_id_for(config) + ") differs from the one on disk");
            if (read_dayplan(out / "dayplan.txt") != result.plan)
                throw DataError("refusing to resume " + out.string() + ": day plan on disk differs");
            if (const auto d = latest_checkpoint_day(out, config.total_days)) {
                result.model = checkpoint_load<float>(day_checkpoint_path(out, *d));
                RunLog prior = read_metrics(out / "metrics.csv");
                for (auto& r : prior.records)
                    if (r.day <= *d) log.records.push_back(r);
                result.resumed_from_day = *d;
                start_day = *d + 1;
                need_pretrain = false;
            }
        } else if (fs::exists(out / "metrics.csv") && !options.resume) {
            // fresh run over an old directory: drop stale checkpoints
            for (std::size_t d = 1; d <= config.total_days; ++d) fs::remove(day_checkpoint_path(out, d));
        }
        write_file_text(config_path, config_text);
        write_dayplan(result.plan, out / "dayplan.txt");
    }

    const std::string started = wall_clock();
    auto save_metrics = [&] {
        if (persist) write_metrics(log, out / "metrics.csv");
    };

    try {
        if (need_pretrain) {
            auto recs = pretrain(result.model, train, result.pretrain_subset, global_val, *config.pretrain, settings);
            log.records.insert(log.records.end(), recs.begin(), recs.end());
        }
        result.completed_days = start_day - 1;
        for (std::size_t day = start_day; day <= result.plan.days.size(); ++day) {
            const std::vector<std::size_t> empty;
            const auto& prev = day > 1 ? result.plan.days[day - 2] : empty;
            const DaySplit ds = day_split(config.strategy, day, prev, result.plan.days[day - 1], config.seed);
            const EvalSet validation = ds.global_validation ? global_val : EvalSet{&train, ds.validation};
            auto recs = run_day(result.model, day, train, ds.train, validation, config.epochs_per_day, settings);
            const auto t = evaluate(result.model, test, config.loss, config.batch_size, config.normalization);
            recs.back().test_loss = t.loss;
            recs.back().test_accuracy = t.accuracy;
            log.records.insert(log.records.end(), recs.begin(), recs.end());
            result.completed_days = day;

            const bool stop_here = options.stop_after_day && *options.stop_after_day == day;
            const bool cadence = config.checkpoint_every > 0 && day % config.checkpoint_every == 0;
            if (persist && (cadence || stop_here)) {
                checkpoint_save(result.model, day_checkpoint_path(out, day));
                save_metrics();
            }
            if (stop_here && day < result.plan.days.size()) {
                result.interrupted = true;
                break;
            }
        }
    } catch (const NumericError&) {
        if (persist) {
            char buf[48];
            std::snprintf(buf, sizeof buf, "abort_day_%04zu.sqln", result.completed_days + 1);
            checkpoint_save(result.model, out / "checkpoints" / buf);
            save_metrics();
        }
        throw;
    }

    validate_log(log);
    if (persist) {
        save_metrics();
        if (!result.interrupted) checkpoint_save(result.model, out / "final.sqln");
        std::ostringstream meta;
        meta << "layout_version=" << kRunLayoutVersion << "\n"
             << "run_id=" << log.run_id << "\n"
             << "config_hash=" << run_id_for(config).substr(1) << "\n"
             << "seed=" << config.seed << "\n"
             << "validation_strategy=" << to_string(config.strategy) << "\n"
             << "days_planned=" << result.plan.days.size() << "\n"
             << "days_completed=" << result.completed_days << "\n"
             << "resumed_from_day=" << result.resumed_from_day << "\n"
             << "interrupted=" << (result.interrupted ? "true" : "false") << "\n"
             << "optimizer_steps=" << result.model.step << "\n"
             << "pretrain_subset=" << join(result.pretrain_subset) << "\n"
             << "note=partial final mini-batches are trained; evaluation uses normalisation only\n"
             << "started_unix=" << started << "\n"
             << "finished_unix=" << wall_clock() << "\n";
        write_file_text(out / "run_meta.txt", meta.str());
    }
    return result;
}

} // namespace seqlearn
