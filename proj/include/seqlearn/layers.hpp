#pragma once

// Layer set of the classifier: Conv2d, Dense, ReLU, MaxPool2d, Flatten.
//
// Batched tensors carry the batch as their leading dimension. Per-sample shapes
// are [channels, height, width] for image-like activations and [features]
// after Flatten. Conv weights are [out, in, k, k]; dense weights are [out, in].

#include <cstddef>
#include <string>
#include <variant>
#include <vector>

#include "seqlearn/tensor.hpp"

namespace seqlearn {

struct Conv2dSpec {
    std::size_t in_channels = 1;
    std::size_t out_channels = 1;
    std::size_t kernel = 3;
    std::size_t stride = 1;
    std::size_t padding = 0;
    friend bool operator==(const Conv2dSpec&, const Conv2dSpec&) = default;
};

struct DenseSpec {
    std::size_t in_features = 1;
    std::size_t out_features = 1;
    friend bool operator==(const DenseSpec&, const DenseSpec&) = default;
};

struct ReluSpec {
    friend bool operator==(const ReluSpec&, const ReluSpec&) = default;
};

// Square window; stride equals the kernel, trailing rows/columns that do not fill a window are dropped.
struct MaxPool2dSpec {
    std::size_t kernel = 2;
    friend bool operator==(const MaxPool2dSpec&, const MaxPool2dSpec&) = default;
};

struct FlattenSpec {
    friend bool operator==(const FlattenSpec&, const FlattenSpec&) = default;
};

using LayerSpec = std::variant<Conv2dSpec, DenseSpec, ReluSpec, MaxPool2dSpec, FlattenSpec>;

std::string layer_name(const LayerSpec& spec);

// Compact text form used by config files: "conv:out:kernel[:stride[:padding]]",
// "dense:out", "relu", "maxpool:k", "flatten". Input sizes are inferred at build.
std::string layer_to_string(const LayerSpec& spec);

// Validates the layer's own integer parameters.
void validate_layer(const LayerSpec& spec, std::size_t index);

// Per-sample output shape. Throws ConfigError naming `index` and both shapes on mismatch.
Shape layer_output_shape(const LayerSpec& spec, const Shape& sample_input, std::size_t index);

template <class T>
struct LayerParams {
    Tensor<T> weight;  // empty for parameter-free layers
    Tensor<T> bias;
    bool has_params() const { return !weight.empty(); }
    friend bool operator==(const LayerParams&, const LayerParams&) = default;
};

// Values captured by the forward pass that the backward pass needs.
template <class T>
struct LayerCache {
    Shape input_shape;
    Tensor<T> input;                  // kept for Conv2d, Dense and ReLU
    std::vector<std::size_t> argmax;  // MaxPool2d: flat input index selected per output element
};

template <class T>
struct LayerGradients {
    Tensor<T> input;
    LayerParams<T> params;
};

// Zero-initialised parameters with the shapes the layer requires.
template <class T>
LayerParams<T> make_layer_params(const LayerSpec& spec);

template <class T>
Tensor<T> layer_forward(const LayerSpec& spec, const LayerParams<T>& params, const Tensor<T>& input,
                        LayerCache<T>& cache, std::size_t index = 0);

template <class T>
LayerGradients<T> layer_backward(const LayerSpec& spec, const LayerParams<T>& params, const LayerCache<T>& cache,
                                 const Tensor<T>& upstream, std::size_t index = 0);

} // namespace seqlearn
