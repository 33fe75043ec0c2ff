#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "seqlearn/augment.hpp"
#include "seqlearn/detectors.hpp"
#include "seqlearn/manifest.hpp"
#include "seqlearn/metrics.hpp"
#include "seqlearn/model.hpp"
#include "seqlearn/schedule.hpp"

namespace seqlearn {

inline constexpr int kRunLayoutVersion = 1;

struct PretrainConfig {
    std::size_t subset_size = 500;
    std::size_t epoch_cap = 5;
    double target_accuracy = 0.70;  // early stop once global validation accuracy reaches this
};

struct ExperimentConfig {
    // model
    std::string layers;  // explicit stack ("conv:16:3:1:1,relu,..."); empty selects the default CNN
    std::size_t conv_channels = 16;
    std::size_t conv_blocks = 2;
    std::size_t kernel = 3;

    OptimizerConfig optimizer;
    LossKind loss = LossKind::softmax_cross_entropy;
    std::size_t batch_size = 16;
    std::optional<PretrainConfig> pretrain;

    std::size_t total_days = 10;
    std::size_t n_per_day = 20;
    std::size_t epochs_per_day = 1;
    ValidationStrategy strategy = ValidationStrategy::global_holdout;
    bool allow_short_final_day = false;

    AugmentConfig augment;
    NormalizationSpec normalization;
    DetectorConfig detectors;

    std::uint64_t seed = 0;
    std::filesystem::path data_root;
    std::filesystem::path splits_dir;  // holds train.txt, val.txt, test.txt
    std::size_t checkpoint_every = 25;

    void validate() const;
};

/// A manifest with its images decoded into memory.
struct LoadedData {
    Manifest manifest;
    std::vector<Image> images;
    std::vector<std::size_t> labels;

    Shape input_shape() const;
};

LoadedData load_data(const Manifest& manifest, const std::filesystem::path& root);

struct EvalResult {
    double loss = 0.0;
    double accuracy = 0.0;
};

// Normalisation only, no augmentation; batches in index order. `indices`
// selects entries of `data` (all of them when empty is passed via the overload).
EvalResult evaluate(const ModelState<float>& model, const LoadedData& data, const std::vector<std::size_t>& indices,
                    LossKind loss, std::size_t batch_size, const NormalizationSpec& norm);
EvalResult evaluate(const ModelState<float>& model, const LoadedData& data, LossKind loss, std::size_t batch_size,
                    const NormalizationSpec& norm);

// Everything run_day and pretrain need besides the model and the data.
struct TrainSettings {
    OptimizerConfig optimizer;
    LossKind loss = LossKind::softmax_cross_entropy;
    std::size_t batch_size = 16;
    AugmentConfig augment;
    NormalizationSpec normalization;
    std::uint64_t seed = 0;
};

struct EvalSet {
    const LoadedData* data = nullptr;
    std::vector<std::size_t> indices;
};

// Full epochs over `subset` (reshuffled each epoch); after each epoch the model is
// scored on `validation` and training stops once accuracy >= target, or at the cap.
std::vector<MetricsRecord> pretrain(ModelState<float>& model, const LoadedData& train,
                                    const std::vector<std::size_t>& subset, const EvalSet& validation,
                                    const PretrainConfig& config, const TrainSettings& settings);

// Day-epochs over `train_indices` with one optimizer step per mini-batch (the
// final partial batch is kept). Returns one record per day-epoch with running
// train metrics and a full validation pass. An empty training set yields a
// single validation-only record. Test metrics are left for the caller.
std::vector<MetricsRecord> run_day(ModelState<float>& model, std::size_t day, const LoadedData& train,
                                   const std::vector<std::size_t>& train_indices, const EvalSet& validation,
                                   std::size_t epochs, const TrainSettings& settings);

struct RunOptions {
    std::filesystem::path out_dir;             // empty: keep everything in memory
    bool resume = false;
    std::optional<std::size_t> stop_after_day;  // simulated interruption, checkpoint written at that day
};

struct RunResult {
    RunLog log;
    ModelState<float> model;
    DayPlan plan;
    std::vector<std::size_t> pretrain_subset;
    std::size_t completed_days = 0;
    std::size_t resumed_from_day = 0;
    bool interrupted = false;
};

// split files -> optional pretrain -> day plan -> per day: day_split, run_day,
// test evaluation, periodic checkpoint -> final checkpoint and metrics CSV.
RunResult run_experiment(const ExperimentConfig& config, const RunOptions& options = {});

// Optimizer steps one epoch takes over n examples.
inline std::size_t steps_per_epoch(std::size_t n, std::size_t batch_size) {
    return (n + batch_size - 1) / batch_size;
}

std::string run_id_for(const ExperimentConfig& config);

} // namespace seqlearn
