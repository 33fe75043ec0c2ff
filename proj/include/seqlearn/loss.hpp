#pragma once

#include <cstddef>
#include <span>
#include <string>

#include "seqlearn/tensor.hpp"

namespace seqlearn {

enum class LossKind { softmax_cross_entropy, bce_with_logits };

std::string to_string(LossKind kind);
LossKind parse_loss_kind(const std::string& text);

template <class T>
struct LossResult {
    double loss = 0.0;     // batch mean
    Tensor<T> grad;        // d(mean loss)/d(logits), same shape as logits
};

// logits: [batch, classes]; labels: one class index per row. BCE-with-logits
// expands each label to a one-hot target row and averages over batch x classes.
template <class T>
LossResult<T> loss_forward_backward(LossKind kind, const Tensor<T>& logits, std::span<const std::size_t> labels);

} // namespace seqlearn
