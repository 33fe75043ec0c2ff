#pragma once

#include <span>
#include <vector>

#include "seqlearn/image.hpp"
#include "seqlearn/rng.hpp"
#include "seqlearn/tensor.hpp"

namespace seqlearn {

struct AugmentConfig {
    double hflip_probability = 0.0;
    double rotation_degrees = 0.0;   // angle ~ Uniform(-deg, +deg), nearest-neighbour about the centre
    double translate_fraction = 0.0; // shift ~ Uniform(-f, +f) * dim, rounded to whole pixels
    double jitter_fraction = 0.0;    // intensity factor ~ Uniform(1 - j, 1 + j)

    void validate() const;
    bool is_identity() const;
    friend bool operator==(const AugmentConfig&, const AugmentConfig&) = default;
};

// Flip, small rotation, translation and brightness jitter, in that order.
// Out-of-frame pixels become 0; results are clamped to [0, 255]. Always
// consumes the same number of draws from `rng` whatever the config.
Image augment(const Image& image, const AugmentConfig& config, Rng& rng);

struct NormalizationSpec {
    std::vector<double> mean{0.449};
    std::vector<double> stddev{0.226};

    void validate(std::size_t channels = 1) const;
    friend bool operator==(const NormalizationSpec&, const NormalizationSpec&) = default;
};

// (pixel / 255 - mean) / std into a [channels, height, width] buffer.
template <class T>
void normalize_into(const Image& image, const NormalizationSpec& spec, std::span<T> out);

template <class T>
Tensor<T> normalize(const Image& image, const NormalizationSpec& spec);

} // namespace seqlearn
