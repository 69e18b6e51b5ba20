#pragma once

#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include "ttrk/container.hpp" // read_file_bytes
#include "ttrk/tensor.hpp"

namespace ttrk {

// Binary PGM (P5) and PPM (P6) with maxval 255. Header comments are allowed;
// ASCII variants (P2/P3) and other maxvals are rejected. Pixel data must be
// exactly width * height * channels bytes, nothing trailing.

namespace detail {

inline constexpr std::int64_t kMaxImageDim = 1 << 15;
inline constexpr std::int64_t kMaxImagePixels = std::int64_t{1} << 26;

class PnmHeaderReader {
public:
    explicit PnmHeaderReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

    std::size_t pos() const { return pos_; }

    std::uint8_t byte() {
        if (pos_ >= bytes_.size()) throw format_error("image header truncated");
        return bytes_[pos_++];
    }

    void skip_space_and_comments() {
        while (pos_ < bytes_.size()) {
            const std::uint8_t c = bytes_[pos_];
            if (c == '#') {
                while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
            } else if (c == ' ' || c == '\t' || c == '\r' || c == '\n' || c == '\v' ||
                       c == '\f') {
                ++pos_;
            } else {
                break;
            }
        }
    }

    std::int64_t number() {
        skip_space_and_comments();
        std::int64_t v = 0;
        int digits = 0;
        while (pos_ < bytes_.size() && bytes_[pos_] >= '0' && bytes_[pos_] <= '9') {
            v = v * 10 + (bytes_[pos_] - '0');
            ++pos_;
            if (++digits > 7) throw format_error("image header number too long");
        }
        if (digits == 0) throw format_error("expected a number in image header");
        return v;
    }

private:
    std::span<const std::uint8_t> bytes_;
    std::size_t pos_ = 0;
};

} // namespace detail

/// Decode P5/P6 bytes into a float tensor shaped (1, h, w, channels) with
/// values in [0, 1].
inline Tensor parse_image(std::span<const std::uint8_t> bytes) {
    detail::PnmHeaderReader r(bytes);
    const std::uint8_t m0 = r.byte();
    const std::uint8_t m1 = r.byte();
    if (m0 != 'P') throw format_error("not a PNM image");
    std::int64_t channels = 0;
    if (m1 == '5') channels = 1;
    else if (m1 == '6') channels = 3;
    else if (m1 == '2' || m1 == '3') throw format_error("ASCII PNM is not supported");
    else throw format_error("unsupported PNM type");

    const std::int64_t w = r.number();
    const std::int64_t h = r.number();
    const std::int64_t maxval = r.number();
    if (w < 1 || h < 1 || w > detail::kMaxImageDim || h > detail::kMaxImageDim)
        throw format_error("image dimensions out of range");
    if (w * h > detail::kMaxImagePixels) throw format_error("image too large");
    if (maxval != 255) throw format_error("only maxval 255 is supported");
    const std::uint8_t sep = r.byte();
    if (!(sep == ' ' || sep == '\t' || sep == '\r' || sep == '\n'))
        throw format_error("expected whitespace before pixel data");

    const std::size_t need = static_cast<std::size_t>(w * h * channels);
    const std::size_t have = bytes.size() - r.pos();
    if (have < need) throw format_error("image pixel data truncated");
    if (have > need) throw format_error("trailing bytes after pixel data");

    std::vector<float> data(need);
    const std::uint8_t* p = bytes.data() + r.pos();
    for (std::size_t i = 0; i < need; ++i) data[i] = static_cast<float>(p[i]) / 255.0f;
    return Tensor::f32(Shape{1, h, w, channels}, std::move(data));
}

inline Tensor load_image(const std::filesystem::path& path) {
    return parse_image(read_file_bytes(path));
}

inline void write_pnm(const std::filesystem::path& path, std::int64_t w, std::int64_t h,
                      int channels, std::span<const std::uint8_t> pixels) {
    require(channels == 1 || channels == 3, "PNM writer supports 1 or 3 channels");
    require(static_cast<std::int64_t>(pixels.size()) == w * h * channels,
            "pixel buffer size does not match dimensions");
    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        require(f.good(), "cannot open '" + tmp.string() + "' for writing");
        f << (channels == 1 ? "P5" : "P6") << "\n" << w << " " << h << "\n255\n";
        f.write(reinterpret_cast<const char*>(pixels.data()),
                static_cast<std::streamsize>(pixels.size()));
        require(f.good(), "write to '" + tmp.string() + "' failed");
    }
    std::filesystem::rename(tmp, path);
}

} // namespace ttrk
