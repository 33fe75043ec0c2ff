#include "seqlearn/augment.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "seqlearn/error.hpp"

namespace seqlearn {

void AugmentConfig::validate() const {
    if (!(hflip_probability >= 0.0 && hflip_probability <= 1.0))
        throw ConfigError("data.hflip must be in [0, 1]");
    if (!(rotation_degrees >= 0.0 && rotation_degrees <= 180.0)) throw ConfigError("data.rotation must be in [0, 180]");
    if (!(translate_fraction >= 0.0 && translate_fraction <= 1.0)) throw ConfigError("data.translate must be in [0, 1]");
    if (!(jitter_fraction >= 0.0 && jitter_fraction <= 1.0)) throw ConfigError("data.jitter must be in [0, 1]");
}

bool AugmentConfig::is_identity() const {
    return hflip_probability == 0.0 && rotation_degrees == 0.0 && translate_fraction == 0.0 && jitter_fraction == 0.0;
}

namespace {

long round_half_up(double v) { return static_cast<long>(std::floor(v + 0.5)); }

Image rotate_nearest(const Image& in, double degrees) {
    const double theta = degrees * std::numbers::pi / 180.0;
    const double cs = std::cos(theta), sn = std::sin(theta);
    const double cx = (static_cast<double>(in.width) - 1.0) / 2.0;
    const double cy = (static_cast<double>(in.height) - 1.0) / 2.0;
    Image out(in.width, in.height, 0);
    for (std::size_t r = 0; r < in.height; ++r) {
        for (std::size_t c = 0; c < in.width; ++c) {
            const double x = static_cast<double>(c) - cx;
            const double y = static_cast<double>(r) - cy;
            const long sc = round_half_up(cx + cs * x - sn * y);
            const long sr = round_half_up(cy + sn * x + cs * y);
            if (sc < 0 || sr < 0 || sc >= static_cast<long>(in.width) || sr >= static_cast<long>(in.height)) continue;
            out.at(r, c) = in.at(static_cast<std::size_t>(sr), static_cast<std::size_t>(sc));
        }
    }
    return out;
}

Image translate(const Image& in, long dx, long dy) {
    Image out(in.width, in.height, 0);
    for (std::size_t r = 0; r < in.height; ++r) {
        const long sr = static_cast<long>(r) - dy;
        if (sr < 0 || sr >= static_cast<long>(in.height)) continue;
        for (std::size_t c = 0; c < in.width; ++c) {
            const long sc = static_cast<long>(c) - dx;
            if (sc < 0 || sc >= static_cast<long>(in.width)) continue;
            out.at(r, c) = in.at(static_cast<std::size_t>(sr), static_cast<std::size_t>(sc));
        }
    }
    return out;
}

} // namespace

Image augment(const Image& image, const AugmentConfig& config, Rng& rng) {
    const double flip_draw = rng.uniform();
    const double angle = rng.uniform(-config.rotation_degrees, config.rotation_degrees);
    const double tx = rng.uniform(-config.translate_fraction, config.translate_fraction);
    const double ty = rng.uniform(-config.translate_fraction, config.translate_fraction);
    const double factor = rng.uniform(1.0 - config.jitter_fraction, 1.0 + config.jitter_fraction);

    Image out = flip_draw < config.hflip_probability ? hflip(image) : image;
    if (angle != 0.0) out = rotate_nearest(out, angle);
    const long dx = round_half_up(tx * static_cast<double>(image.width));
    const long dy = round_half_up(ty * static_cast<double>(image.height));
    if (dx != 0 || dy != 0) out = translate(out, dx, dy);
    if (factor != 1.0)
        for (auto& p : out.pixels)
            p = static_cast<std::uint8_t>(std::clamp<long>(round_half_up(p * factor), 0, 255));
    return out;
}

void NormalizationSpec::validate(std::size_t channels) const {
    if (mean.size() != channels || stddev.size() != channels)
        throw ConfigError("normalization needs one mean and one std per channel");
    for (double s : stddev)
        if (!(s > 0.0)) throw ConfigError("normalization std must be > 0");
}

template <class T>
void normalize_into(const Image& image, const NormalizationSpec& spec, std::span<T> out) {
    spec.validate(image.channels);
    if (out.size() != image.pixels.size()) throw UsageError("normalize: output buffer size mismatch");
    const std::size_t plane = image.width * image.height;
    for (std::size_t ch = 0; ch < image.channels; ++ch) {
        const double mean = spec.mean[ch], sd = spec.stddev[ch];
        for (std::size_t i = 0; i < plane; ++i) {
            const double v = static_cast<double>(image.pixels[ch * plane + i]) / 255.0;
            out[ch * plane + i] = static_cast<T>((v - mean) / sd);
        }
    }
}

template <class T>
Tensor<T> normalize(const Image& image, const NormalizationSpec& spec) {
    Tensor<T> t({image.channels, image.height, image.width});
    normalize_into<T>(image, spec, t.values());
    return t;
}

template void normalize_into<float>(const Image&, const NormalizationSpec&, std::span<float>);
template void normalize_into<double>(const Image&, const NormalizationSpec&, std::span<double>);
template Tensor<float> normalize<float>(const Image&, const NormalizationSpec&);
template Tensor<double> normalize<double>(const Image&, const NormalizationSpec&);

} // namespace seqlearn
