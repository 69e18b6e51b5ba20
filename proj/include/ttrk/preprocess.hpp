#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "ttrk/ops.hpp"
#include "ttrk/tensor.hpp"

namespace ttrk {

/// Face crop rectangle in full-frame pixel coordinates.
struct CropBox {
    std::int64_t x0 = 0;
    std::int64_t y0 = 0;
    std::int64_t w = 0;
    std::int64_t h = 0;
    std::int64_t frame_w = 0;
    std::int64_t frame_h = 0;

    void validate() const {
        require(frame_w >= 1 && frame_h >= 1, "crop frame dimensions must be positive");
        require(w >= 1 && h >= 1, "crop size must be positive");
        require(x0 >= 0 && y0 >= 0, "crop origin must be non-negative");
        require(x0 + w <= frame_w && y0 + h <= frame_h, "crop exceeds frame bounds");
    }
};

/// BT.601 luma. Single-channel input passes through unchanged.
inline Tensor to_greyscale(const Tensor& image) {
    require(image.dtype() == DType::F32 && image.shape().rank() == 4,
            "greyscale expects a float (1,h,w,c) image");
    const std::int64_t h = image.shape()[1], w = image.shape()[2], c = image.shape()[3];
    if (c == 1) return image;
    require(c == 3, "greyscale expects 1 or 3 channels");
    auto x = image.f();
    std::vector<float> out(static_cast<std::size_t>(h * w));
    for (std::int64_t i = 0; i < h * w; ++i) {
        const float* p = &x[static_cast<std::size_t>(i * 3)];
        out[static_cast<std::size_t>(i)] = 0.299f * p[0] + 0.587f * p[1] + 0.114f * p[2];
    }
    return Tensor::f32(Shape{1, h, w, 1}, std::move(out));
}

inline Tensor crop_image(const Tensor& image, const CropBox& box) {
    require(image.dtype() == DType::F32 && image.shape().rank() == 4,
            "crop expects a float (1,h,w,c) image");
    box.validate();
    require(image.shape()[1] == box.frame_h && image.shape()[2] == box.frame_w,
            "image is " + std::to_string(image.shape()[2]) + "x" +
                std::to_string(image.shape()[1]) + " but crop expects frame " +
                std::to_string(box.frame_w) + "x" + std::to_string(box.frame_h));
    const std::int64_t c = image.shape()[3];
    auto x = image.f();
    std::vector<float> out(static_cast<std::size_t>(box.h * box.w * c));
    for (std::int64_t y = 0; y < box.h; ++y)
        for (std::int64_t i = 0; i < box.w * c; ++i)
            out[static_cast<std::size_t>(y * box.w * c + i)] =
                x[static_cast<std::size_t>(((box.y0 + y) * box.frame_w + box.x0) * c + i)];
    return Tensor::f32(Shape{1, box.h, box.w, c}, std::move(out));
}

/// Bilinear resize with half-pixel sample centers:
/// src = (dst + 0.5) * in / out - 0.5, clamped to the source grid.
inline Tensor resize_bilinear(const Tensor& image, std::int64_t out_h, std::int64_t out_w) {
    require(image.dtype() == DType::F32 && image.shape().rank() == 4,
            "resize expects a float (1,h,w,c) image");
    require(out_h >= 1 && out_w >= 1, "resize target must be positive");
    const std::int64_t in_h = image.shape()[1], in_w = image.shape()[2], c = image.shape()[3];
    auto x = image.f();
    std::vector<float> out(static_cast<std::size_t>(out_h * out_w * c));

    auto sample_pos = [](std::int64_t dst, std::int64_t out_n, std::int64_t in_n, std::int64_t& i0,
                         std::int64_t& i1, float& frac) {
        double src = (static_cast<double>(dst) + 0.5) * in_n / out_n - 0.5;
        if (src < 0.0) src = 0.0;
        const double last = static_cast<double>(in_n - 1);
        if (src > last) src = last;
        i0 = static_cast<std::int64_t>(std::floor(src));
        i1 = std::min(i0 + 1, in_n - 1);
        frac = static_cast<float>(src - static_cast<double>(i0));
    };

    for (std::int64_t oy = 0; oy < out_h; ++oy) {
        std::int64_t y0, y1;
        float fy;
        sample_pos(oy, out_h, in_h, y0, y1, fy);
        for (std::int64_t ox = 0; ox < out_w; ++ox) {
            std::int64_t x0, x1;
            float fx;
            sample_pos(ox, out_w, in_w, x0, x1, fx);
            for (std::int64_t ch = 0; ch < c; ++ch) {
                const float v00 = x[static_cast<std::size_t>((y0 * in_w + x0) * c + ch)];
                const float v01 = x[static_cast<std::size_t>((y0 * in_w + x1) * c + ch)];
                const float v10 = x[static_cast<std::size_t>((y1 * in_w + x0) * c + ch)];
                const float v11 = x[static_cast<std::size_t>((y1 * in_w + x1) * c + ch)];
                const float top = v00 + (v01 - v00) * fx;
                const float bot = v10 + (v11 - v10) * fx;
                out[static_cast<std::size_t>((oy * out_w + ox) * c + ch)] =
                    top + (bot - top) * fy;
            }
        }
    }
    return Tensor::f32(Shape{1, out_h, out_w, c}, std::move(out));
}

/// Two channels encoding where each resized pixel sits inside the full frame,
/// as fractions of frame width and height:
///   ch0[., j] = (x0 + (j + 0.5) * w / out_w) / frame_w
///   ch1[i, .] = (y0 + (i + 0.5) * h / out_h) / frame_h
inline Tensor grid_embedding(const CropBox& box, std::int64_t out_h, std::int64_t out_w) {
    box.validate();
    require(out_h >= 1 && out_w >= 1, "grid size must be positive");
    std::vector<float> out(static_cast<std::size_t>(out_h * out_w * 2));
    for (std::int64_t i = 0; i < out_h; ++i) {
        const double ny = (static_cast<double>(box.y0) +
                           (static_cast<double>(i) + 0.5) * box.h / out_h) /
                          static_cast<double>(box.frame_h);
        for (std::int64_t j = 0; j < out_w; ++j) {
            const double nx = (static_cast<double>(box.x0) +
                               (static_cast<double>(j) + 0.5) * box.w / out_w) /
                              static_cast<double>(box.frame_w);
            out[static_cast<std::size_t>((i * out_w + j) * 2 + 0)] = static_cast<float>(nx);
            out[static_cast<std::size_t>((i * out_w + j) * 2 + 1)] = static_cast<float>(ny);
        }
    }
    return Tensor::f32(Shape{1, out_h, out_w, 2}, std::move(out));
}

/// Full input pipeline: greyscale, crop, resize, then append the crop-grid
/// channels. Output is (1, size, size, 3).
inline Tensor preprocess_frame(const Tensor& frame, const CropBox& box, std::int64_t size) {
    const Tensor grey = to_greyscale(frame);
    const Tensor face = resize_bilinear(crop_image(grey, box), size, size);
    const Tensor grid = grid_embedding(box, size, size);
    return concat_channels({face, grid});
}

} // namespace ttrk
