#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "seqlearn/layers.hpp"
#include "seqlearn/loss.hpp"

namespace seqlearn {

enum class OptimizerKind : std::uint8_t { adam = 0, sgd = 1 };

struct OptimizerConfig {
    OptimizerKind kind = OptimizerKind::adam;
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    double momentum = 0.0;

    void validate() const;
};

std::string to_string(OptimizerKind kind);
OptimizerKind parse_optimizer_kind(const std::string& text);

// Auxiliary tensors mirror the parameter list: Adam keeps first and second
// moments, SGD keeps one momentum buffer in `first`.
template <class T>
struct OptimizerState {
    bool present = false;
    OptimizerKind kind = OptimizerKind::adam;
    std::vector<Tensor<T>> first;
    std::vector<Tensor<T>> second;
    friend bool operator==(const OptimizerState&, const OptimizerState&) = default;
};

/// Layer stack, parameters and optimizer state: everything that persists between days.
template <class T>
struct ModelState {
    std::vector<LayerSpec> layers;
    Shape input_shape;  // per sample, [channels, height, width]
    std::vector<LayerParams<T>> params;
    OptimizerState<T> optimizer;
    std::uint64_t step = 0;

    std::size_t num_classes() const;
    std::size_t num_parameters() const;
    friend bool operator==(const ModelState&, const ModelState&) = default;
};

// Fills in the inferred input sizes (Conv2d in_channels, Dense in_features) and
// checks the whole stack is shape-consistent, ending in a [classes] vector.
std::vector<LayerSpec> resolve_layers(std::vector<LayerSpec> layers, const Shape& input_shape);

std::vector<LayerSpec> parse_layers(const std::string& text);
std::string layers_to_string(const std::vector<LayerSpec>& layers);

// [Conv kxk -> conv_channels, ReLU, MaxPool 2] x blocks, Flatten, Dense -> classes.
std::vector<LayerSpec> default_layers(const Shape& input_shape, std::size_t classes, std::size_t conv_channels = 16,
                                      std::size_t blocks = 2, std::size_t kernel = 3);

// He-normal weights (std = sqrt(2 / fan_in)), zero biases, fresh optimizer state.
template <class T>
ModelState<T> build_model(std::vector<LayerSpec> layers, const Shape& input_shape, std::uint64_t seed);

template <class T, class U>
ModelState<U> cast_model(const ModelState<T>& model);

template <class T>
struct ForwardPass {
    std::vector<LayerCache<T>> caches;
    Tensor<T> logits;
};

template <class T>
ForwardPass<T> model_forward(const ModelState<T>& model, const Tensor<T>& inputs);

// Parameter gradients, one LayerParams per layer (empty for parameter-free layers).
template <class T>
std::vector<LayerParams<T>> model_backward(const ModelState<T>& model, const ForwardPass<T>& pass,
                                           const Tensor<T>& logit_grad);

template <class T>
struct Prediction {
    Tensor<T> logits;
    std::vector<std::size_t> classes;
};

// Row-wise argmax; ties go to the lowest class index.
template <class T>
std::vector<std::size_t> argmax_rows(const Tensor<T>& logits);

template <class T>
Prediction<T> predict_batch(const ModelState<T>& model, const Tensor<T>& inputs);

// Both steps throw NumericError before touching any parameter if a gradient is non-finite.
template <class T>
void sgd_step(ModelState<T>& model, const std::vector<LayerParams<T>>& grads, const OptimizerConfig& config);
template <class T>
void adam_step(ModelState<T>& model, const std::vector<LayerParams<T>>& grads, const OptimizerConfig& config);
template <class T>
void optimizer_step(ModelState<T>& model, const std::vector<LayerParams<T>>& grads, const OptimizerConfig& config);

template <class T>
struct StepResult {
    double loss = 0.0;
    std::size_t correct = 0;  // predictions made before the update
};

// Forward, loss, backward and one optimizer step on a single mini-batch.
template <class T>
StepResult<T> train_step(ModelState<T>& model, const Tensor<T>& inputs, std::span<const std::size_t> labels,
                         LossKind loss, const OptimizerConfig& config);

} // namespace seqlearn
