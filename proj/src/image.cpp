#include "seqlearn/image.hpp"

#include <cctype>
#include <string>

#include "seqlearn/fileio.hpp"
#include "seqlearn/error.hpp"

namespace seqlearn {

namespace {

class HeaderScanner {
public:
    HeaderScanner(const std::vector<std::uint8_t>& bytes, std::size_t start) : bytes_(bytes), pos_(start) {}

    std::size_t pos() const { return pos_; }

    std::size_t number(const char* what) {
        skip_space_and_comments();
        const std::size_t start = pos_;
        std::size_t v = 0;
        while (pos_ < bytes_.size() && std::isdigit(bytes_[pos_])) {
            v = v * 10 + static_cast<std::size_t>(bytes_[pos_] - '0');
            if (v > (std::size_t{1} << 31)) throw ParseError(std::string("pgm: ") + what + " too large", start);
            ++pos_;
        }
        if (pos_ == start) throw ParseError(std::string("pgm: expected ") + what, start);
        return v;
    }

    // Exactly one whitespace byte separates maxval from the payload.
    void single_whitespace() {
        if (pos_ >= bytes_.size() || !std::isspace(bytes_[pos_]))
            throw ParseError("pgm: expected whitespace after maxval", pos_);
        ++pos_;
    }

private:
    void skip_space_and_comments() {
        while (pos_ < bytes_.size()) {
            if (std::isspace(bytes_[pos_])) {
                ++pos_;
            } else if (bytes_[pos_] == '#') {
                while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
            } else {
                break;
            }
        }
    }

    const std::vector<std::uint8_t>& bytes_;
    std::size_t pos_;
};

} // namespace

Image pgm_decode(const std::vector<std::uint8_t>& bytes) {
    if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '5') throw ParseError("pgm: missing P5 magic", 0);
    HeaderScanner scan(bytes, 2);
    const std::size_t width = scan.number("width");
    const std::size_t height = scan.number("height");
    const std::size_t maxval_at = scan.pos();
    const std::size_t maxval = scan.number("maxval");
    if (width == 0 || height == 0) throw ParseError("pgm: zero image dimension", maxval_at);
    if (maxval != 255) throw ParseError("pgm: maxval " + std::to_string(maxval) + " unsupported (need 255)", maxval_at);
    scan.single_whitespace();

    const std::size_t payload = scan.pos();
    const std::size_t need = width * height;
    if (bytes.size() - payload < need)
        throw ParseError("pgm: payload has " + std::to_string(bytes.size() - payload) + " bytes, header claims " +
                         std::to_string(need), bytes.size());
    Image img(width, height);
    std::copy(bytes.begin() + static_cast<std::ptrdiff_t>(payload),
              bytes.begin() + static_cast<std::ptrdiff_t>(payload + need), img.pixels.begin());
    return img;
}

std::vector<std::uint8_t> pgm_encode(const Image& image) {
    if (image.channels != 1 || image.pixels.size() != image.width * image.height || image.width == 0 ||
        image.height == 0)
        throw UsageError("pgm: image must be non-empty single-channel with matching pixel count");
    const std::string header = "P5\n" + std::to_string(image.width) + " " + std::to_string(image.height) + "\n255\n";
    std::vector<std::uint8_t> out(header.begin(), header.end());
    out.insert(out.end(), image.pixels.begin(), image.pixels.end());
    return out;
}

Image pgm_read(const std::filesystem::path& path) {
    try {
        return pgm_decode(read_file_bytes(path));
    } catch (const ParseError& e) {
        throw ParseError(path.string() + ": " + e.what(), e.position());
    }
}

void pgm_write(const Image& image, const std::filesystem::path& path) { write_file_bytes(path, pgm_encode(image)); }

Image rotate90(const Image& image, RotateDirection direction) {
    const std::size_t w = image.width, h = image.height;
    Image out(h, w);
    for (std::size_t r = 0; r < h; ++r)
        for (std::size_t c = 0; c < w; ++c) {
            if (direction == RotateDirection::left)
                out.at(w - 1 - c, r) = image.at(r, c);
            else
                out.at(c, h - 1 - r) = image.at(r, c);
        }
    return out;
}

Image hflip(const Image& image) {
    Image out = image;
    for (std::size_t r = 0; r < image.height; ++r)
        for (std::size_t c = 0; c < image.width; ++c) out.at(r, c) = image.at(r, image.width - 1 - c);
    return out;
}

} // namespace seqlearn
