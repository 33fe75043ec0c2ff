#pragma once

// Fourth-order central finite-difference verification of the analytic
// backward passes, in double precision:
//   f'(x) ~ (8 (f(x+h) - f(x-h)) - (f(x+2h) - f(x-2h))) / 12h
// A probe that flips a ReLU sign or a max-pool winner is not differentiable
// there; such checks come back with smooth = false.

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "seqlearn/model.hpp"

namespace seqlearn {

struct TensorCheck {
    std::string name;  // e.g. "layer0.Conv2d.weight" or "layer2.ReLU.input"
    double max_rel_error = 0.0;
    bool passed = false;
};

struct GradCheckReport {
    std::vector<TensorCheck> tensors;
    double tolerance = 0.0;
    bool smooth = true;    // no probe crossed a kink
    std::size_t redraws = 0;  // suite only: samples discarded for sitting too close to a kink

    bool passed() const;
    double max_rel_error() const;
};

// |a - n| / max(|a|, |n|, 1e-12)
double relative_error(double analytic, double numeric);

// Five-point stencil from the four probe values.
double central_difference(double plus_h, double minus_h, double plus_2h, double minus_2h, double h);

using AnalyticGradients = std::function<std::vector<LayerParams<double>>(
    const ModelState<double>&, const Tensor<double>&, std::span<const std::size_t>, LossKind)>;

// Backprop through model_forward/model_backward and the loss.
std::vector<LayerParams<double>> backprop_gradients(const ModelState<double>& model, const Tensor<double>& inputs,
                                                    std::span<const std::size_t> labels, LossKind loss);

// Compares `analytic` (backprop by default) against central differences of the
// mean loss for every parameter element; one report line per parameter tensor.
GradCheckReport grad_check_model(const ModelState<double>& model, const Tensor<double>& inputs,
                                 std::span<const std::size_t> labels, LossKind loss, double h, double tolerance,
                                 const AnalyticGradients& analytic = backprop_gradients);

// Checks one layer in isolation against the scalar objective sum(r * y) with a
// fixed random projection r: input gradient plus weight and bias gradients.
GradCheckReport grad_check_layer(const LayerSpec& spec, const LayerParams<double>& params,
                                 const Tensor<double>& input, double h, double tolerance, std::uint64_t seed);

struct GradCheckSuiteOptions {
    std::size_t seeds = 20;
    double h = 1e-4;
    double tolerance = 1e-5;
    std::uint64_t base_seed = 0;
};

// Every layer kind standalone plus small models under both losses, repeated over
// seeds. Samples whose probes cross a kink are redrawn from the same seed stream.
GradCheckReport grad_check_suite(const GradCheckSuiteOptions& options);

} // namespace seqlearn
