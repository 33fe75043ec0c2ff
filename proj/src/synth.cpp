#include "seqlearn/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <tuple>

#include "seqlearn/error.hpp"
#include "seqlearn/rng.hpp"

namespace seqlearn {

namespace {

constexpr double kBackground = 40.0;
constexpr double kBar = 190.0;
constexpr double kBlob = 235.0;

std::string numbered(const char* prefix, std::size_t i, int digits) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%s%0*zu", prefix, digits, i);
    return buf;
}

} // namespace

Image synth_prototype(std::size_t k, std::size_t classes, std::size_t height, std::size_t width) {
    Image img(width, height, static_cast<std::uint8_t>(kBackground));
    const double theta = static_cast<double>(k) * std::numbers::pi / static_cast<double>(classes);
    const double cx = (static_cast<double>(width) - 1.0) / 2.0, cy = (static_cast<double>(height) - 1.0) / 2.0;
    const double scale = static_cast<double>(std::min(width, height));
    const double half_len = 0.36 * scale, half_width = std::max(1.0, scale / 16.0);
    // blob sits perpendicular to the bar, on the side given by theta + pi/2
    const double phi = theta + std::numbers::pi / 2.0;
    const double bx = cx + 0.27 * scale * std::cos(phi), by = cy + 0.27 * scale * std::sin(phi);
    const double blob_r = std::max(1.5, scale / 9.0);
    for (std::size_t r = 0; r < height; ++r) {
        for (std::size_t c = 0; c < width; ++c) {
            const double x = static_cast<double>(c) - cx, y = static_cast<double>(r) - cy;
            const double along = x * std::cos(theta) + y * std::sin(theta);
            const double across = -x * std::sin(theta) + y * std::cos(theta);
            if (std::abs(along) <= half_len && std::abs(across) <= half_width)
                img.at(r, c) = static_cast<std::uint8_t>(kBar);
            const double dx = static_cast<double>(c) - bx, dy = static_cast<double>(r) - by;
            if (dx * dx + dy * dy <= blob_r * blob_r) img.at(r, c) = static_cast<std::uint8_t>(kBlob);
        }
    }
    return img;
}

Image synth_sample(std::size_t k, std::size_t index, const SynthOptions& options) {
    Image img = synth_prototype(k, options.classes, options.height, options.width);
    if (options.noise_level > 0.0) {
        Rng rng(options.seed, Stream::synth, {k, index});
        const double sigma = options.noise_level * 255.0;
        for (auto& p : img.pixels) {
            const double v = std::floor(static_cast<double>(p) + sigma * rng.normal() + 0.5);
            p = static_cast<std::uint8_t>(std::clamp(v, 0.0, 255.0));
        }
    }
    return img;
}

Manifest gen_synthetic(const SynthOptions& options, const std::filesystem::path& out_root) {
    if (options.classes < 2) throw ConfigError("gen-synth needs at least 2 classes");
    if (options.per_class < 1) throw ConfigError("gen-synth needs at least 1 image per class");
    if (options.height < 4 || options.width < 4) throw ConfigError("gen-synth image size must be at least 4x4");
    if (!(options.noise_level >= 0.0)) throw ConfigError("gen-synth noise level must be >= 0");
    std::vector<ManifestEntry> entries;
    std::vector<std::string> classes;
    for (std::size_t k = 0; k < options.classes; ++k) {
        const std::string cls = numbered("class_", k, 2);
        classes.push_back(cls);
        for (std::size_t i = 0; i < options.per_class; ++i) {
            const std::string rel = cls + "/" + numbered("img_", i, 5) + ".pgm";
            pgm_write(synth_sample(k, i, options), out_root / rel);
            entries.push_back({rel, cls});
        }
    }
    return Manifest(std::move(entries), std::move(classes));
}

Manifest build_rotated_dataset(const Manifest& source, const std::filesystem::path& source_root,
                               const std::filesystem::path& out_root, std::uint64_t seed) {
    if (source.empty()) throw DataError("rotated dataset: source manifest is empty");
    std::vector<ManifestEntry> entries;
    entries.reserve(source.size());
    for (std::size_t i = 0; i < source.size(); ++i) {
        const std::size_t cls = static_cast<std::size_t>(Rng(seed, Stream::rotate_assign, {i}).below(3));
        Image img = pgm_read(source_root / source[i].path);
        if (cls == 1) img = rotate90(img, RotateDirection::left);
        if (cls == 2) img = rotate90(img, RotateDirection::right);
        const std::string rel = std::string(kRotatedClasses[cls]) + "/" + numbered("img_", i, 6) + ".pgm";
        pgm_write(img, out_root / rel);
        entries.push_back({rel, kRotatedClasses[cls]});
    }
    std::sort(entries.begin(), entries.end(),
              [](const ManifestEntry& a, const ManifestEntry& b) { return std::tie(a.label, a.path) < std::tie(b.label, b.path); });
    return Manifest(std::move(entries), {kRotatedClasses[0], kRotatedClasses[1], kRotatedClasses[2]});
}

} // namespace seqlearn
