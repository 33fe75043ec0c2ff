#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace seqlearn {

/// 8-bit grayscale image, row-major.
struct Image {
    std::size_t width = 0;
    std::size_t height = 0;
    std::size_t channels = 1;
    std::vector<std::uint8_t> pixels;

    Image() = default;
    Image(std::size_t w, std::size_t h, std::uint8_t fill = 0) : width(w), height(h), pixels(w * h, fill) {}

    std::uint8_t& at(std::size_t row, std::size_t col) { return pixels[row * width + col]; }
    std::uint8_t at(std::size_t row, std::size_t col) const { return pixels[row * width + col]; }

    friend bool operator==(const Image&, const Image&) = default;
};

// Binary PGM (P5) with maxval 255. Comments are accepted in the header.
Image pgm_decode(const std::vector<std::uint8_t>& bytes);
std::vector<std::uint8_t> pgm_encode(const Image& image);

Image pgm_read(const std::filesystem::path& path);
void pgm_write(const Image& image, const std::filesystem::path& path);

enum class RotateDirection { left, right };

// left = 90 degrees counter-clockwise, right = 90 degrees clockwise.
Image rotate90(const Image& image, RotateDirection direction);

Image hflip(const Image& image);

} // namespace seqlearn
