#pragma once

#include <cstdint>
#include <filesystem>

#include "seqlearn/image.hpp"
#include "seqlearn/manifest.hpp"

namespace seqlearn {

struct SynthOptions {
    std::size_t classes = 3;
    std::size_t per_class = 100;
    std::size_t height = 32;
    std::size_t width = 32;
    double noise_level = 0.1;  // Gaussian pixel noise std as a fraction of 255
    std::uint64_t seed = 0;
};

// Noise-free prototype of class `k`: an oriented bar through the centre plus an
// off-axis blob on one side of it, so no two classes (and no 90 degree
// rotation of a class) share a prototype.
Image synth_prototype(std::size_t k, std::size_t classes, std::size_t height, std::size_t width);

Image synth_sample(std::size_t k, std::size_t index, const SynthOptions& options);

// Writes class_00/..., class_01/... under `out_root` and returns the manifest.
Manifest gen_synthetic(const SynthOptions& options, const std::filesystem::path& out_root);

inline constexpr const char* kRotatedClasses[3] = {"original", "rot_left", "rot_right"};

// Assigns every source image uniformly at random to one of original / rot_left /
// rot_right, applies the rotation, and writes it under the matching class directory.
Manifest build_rotated_dataset(const Manifest& source, const std::filesystem::path& source_root,
                               const std::filesystem::path& out_root, std::uint64_t seed);

} // namespace seqlearn
