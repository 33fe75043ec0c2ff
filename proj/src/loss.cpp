#include "seqlearn/loss.hpp"

#include <algorithm>
#include <cmath>

namespace seqlearn {

std::string to_string(LossKind kind) {
    return kind == LossKind::softmax_cross_entropy ? "cross_entropy" : "bce_with_logits";
}

LossKind parse_loss_kind(const std::string& text) {
    if (text == "cross_entropy" || text == "ce" || text == "softmax_cross_entropy") return LossKind::softmax_cross_entropy;
    if (text == "bce_with_logits" || text == "bce") return LossKind::bce_with_logits;
    throw ConfigError("unknown loss kind '" + text + "' (expected cross_entropy or bce_with_logits)");
}

template <class T>
LossResult<T> loss_forward_backward(LossKind kind, const Tensor<T>& logits, std::span<const std::size_t> labels) {
    if (logits.rank() != 2) throw UsageError("logits must be [batch, classes], got " + shape_string(logits.shape()));
    const std::size_t batch = logits.dim(0), classes = logits.dim(1);
    if (batch == 0 || labels.empty()) throw UsageError("loss over an empty batch");
    if (labels.size() != batch)
        throw UsageError("label count " + std::to_string(labels.size()) + " does not match batch " +
                         std::to_string(batch));
    for (std::size_t b = 0; b < batch; ++b)
        if (labels[b] >= classes)
            throw DataError("class index " + std::to_string(labels[b]) + " out of range for " +
                            std::to_string(classes) + " classes");
    if (!logits.all_finite()) throw NumericError("non-finite logits");

    LossResult<T> out{0.0, Tensor<T>(logits.shape())};
    double total = 0.0;
    if (kind == LossKind::softmax_cross_entropy) {
        const T inv_batch = T{1} / static_cast<T>(batch);
        for (std::size_t b = 0; b < batch; ++b) {
            const T* z = logits.data() + b * classes;
            T* g = out.grad.data() + b * classes;
            const T zmax = *std::max_element(z, z + classes);
            T sum = 0;
            for (std::size_t k = 0; k < classes; ++k) sum += std::exp(z[k] - zmax);
            const T lse = zmax + std::log(sum);
            total += static_cast<double>(lse - z[labels[b]]);
            for (std::size_t k = 0; k < classes; ++k) {
                const T p = std::exp(z[k] - lse);
                g[k] = (p - (k == labels[b] ? T{1} : T{0})) * inv_batch;
            }
        }
        out.loss = total / static_cast<double>(batch);
    } else {
        const T inv_count = T{1} / static_cast<T>(batch * classes);
        for (std::size_t b = 0; b < batch; ++b) {
            for (std::size_t k = 0; k < classes; ++k) {
                const std::size_t i = b * classes + k;
                const T z = logits[i];
                const T t = k == labels[b] ? T{1} : T{0};
                total += static_cast<double>(std::max(z, T{0}) - z * t + std::log1p(std::exp(-std::abs(z))));
                const T sig = z >= 0 ? T{1} / (T{1} + std::exp(-z)) : std::exp(z) / (T{1} + std::exp(z));
                out.grad[i] = (sig - t) * inv_count;
            }
        }
        out.loss = total / static_cast<double>(batch * classes);
    }
    if (!std::isfinite(out.loss)) throw NumericError("non-finite loss");
    out.loss = std::max(out.loss, 0.0);
    return out;
}

template LossResult<float> loss_forward_backward<float>(LossKind, const Tensor<float>&, std::span<const std::size_t>);
template LossResult<double> loss_forward_backward<double>(LossKind, const Tensor<double>&,
                                                          std::span<const std::size_t>);

} // namespace seqlearn
