#pragma once

#include <algorithm>
#include <cmath>
#include <utility>
#include <vector>

#include "ttrk/common.hpp"
#include "ttrk/tensor.hpp"

namespace ttrk {

enum class Padding : std::uint8_t { Same = 0, Valid = 1 };
enum class FusedActivation : std::uint8_t { None = 0, Relu = 1, Relu6 = 2 };

inline float apply_activation(float x, FusedActivation act) {
    switch (act) {
        case FusedActivation::None: return x;
        case FusedActivation::Relu: return std::max(0.0f, x);
        case FusedActivation::Relu6: return std::clamp(x, 0.0f, 6.0f);
    }
    return x;
}

inline float hard_sigmoid_value(float x) {
    return std::clamp(x + 3.0f, 0.0f, 6.0f) / 6.0f;
}

inline float hard_swish_value(float x) {
    return x * hard_sigmoid_value(x);
}

/// Spatial geometry of one convolution axis.
struct ConvGeometry {
    std::int64_t out_h = 0, out_w = 0;
    std::int64_t pad_top = 0, pad_left = 0;
};

inline std::int64_t conv_out_dim(std::int64_t in, std::int64_t kernel, std::int64_t stride,
                                 Padding padding) {
    if (padding == Padding::Same) return (in + stride - 1) / stride;
    require(in >= kernel, "valid padding needs input >= kernel");
    return (in - kernel) / stride + 1;
}

inline ConvGeometry conv_geometry(std::int64_t in_h, std::int64_t in_w, std::int64_t kh,
                                  std::int64_t kw, std::int64_t stride_h, std::int64_t stride_w,
                                  Padding padding) {
    ConvGeometry g;
    g.out_h = conv_out_dim(in_h, kh, stride_h, padding);
    g.out_w = conv_out_dim(in_w, kw, stride_w, padding);
    if (padding == Padding::Same) {
        const std::int64_t pad_h = std::max<std::int64_t>((g.out_h - 1) * stride_h + kh - in_h, 0);
        const std::int64_t pad_w = std::max<std::int64_t>((g.out_w - 1) * stride_w + kw - in_w, 0);
        g.pad_top = pad_h / 2;
        g.pad_left = pad_w / 2;
    }
    return g;
}

namespace detail {

inline void check_conv_args(const Tensor& input, const Tensor& weights, const Tensor& bias,
                            int groups) {
    require(input.shape().rank() == 4, "conv input must be rank 4, got " + input.shape().str());
    require(weights.shape().rank() == 4, "conv weights must be rank 4, got " + weights.shape().str());
    require(bias.shape().rank() == 1, "conv bias must be rank 1");
    require(groups >= 1, "groups must be >= 1");
    const std::int64_t in_c = input.shape()[3];
    const std::int64_t out_c = weights.shape()[0];
    require(in_c % groups == 0, "in-channels not divisible by groups");
    require(out_c % groups == 0, "out-channels not divisible by groups");
    require(weights.shape()[3] == in_c / groups,
            "weight in-channel dim " + std::to_string(weights.shape()[3]) + " != in_c/groups " +
                std::to_string(in_c / groups));
    require(bias.shape()[0] == out_c, "bias length != out-channels");
}

} // namespace detail

/// Cross-correlation with bias and fused activation. Input (1,H,W,Cin),
/// weights (Cout,kh,kw,Cin/groups), bias (Cout).
inline Tensor conv2d_f32(const Tensor& input, const Tensor& weights, const Tensor& bias,
                         int stride_h, int stride_w, Padding padding, int groups,
                         FusedActivation act) {
    detail::check_conv_args(input, weights, bias, groups);
    const std::int64_t in_h = input.shape()[1], in_w = input.shape()[2], in_c = input.shape()[3];
    const std::int64_t out_c = weights.shape()[0], kh = weights.shape()[1], kw = weights.shape()[2];
    const std::int64_t gin = in_c / groups, gout = out_c / groups;
    const ConvGeometry g = conv_geometry(in_h, in_w, kh, kw, stride_h, stride_w, padding);

    auto x = input.f();
    auto w = weights.f();
    auto b = bias.f();
    std::vector<float> out(static_cast<std::size_t>(g.out_h * g.out_w * out_c));
    for (std::int64_t oy = 0; oy < g.out_h; ++oy) {
        for (std::int64_t ox = 0; ox < g.out_w; ++ox) {
            for (std::int64_t oc = 0; oc < out_c; ++oc) {
                const std::int64_t ic0 = (oc / gout) * gin;
                float acc = 0.0f;
                for (std::int64_t ky = 0; ky < kh; ++ky) {
                    const std::int64_t iy = oy * stride_h + ky - g.pad_top;
                    if (iy < 0 || iy >= in_h) continue;
                    for (std::int64_t kx = 0; kx < kw; ++kx) {
                        const std::int64_t ix = ox * stride_w + kx - g.pad_left;
                        if (ix < 0 || ix >= in_w) continue;
                        const float* xp = &x[static_cast<std::size_t>((iy * in_w + ix) * in_c + ic0)];
                        const float* wp = &w[static_cast<std::size_t>(((oc * kh + ky) * kw + kx) * gin)];
                        for (std::int64_t c = 0; c < gin; ++c) acc += xp[c] * wp[c];
                    }
                }
                out[static_cast<std::size_t>((oy * g.out_w + ox) * out_c + oc)] =
                    apply_activation(acc + b[static_cast<std::size_t>(oc)], act);
            }
        }
    }
    return Tensor::f32(Shape{1, g.out_h, g.out_w, out_c}, std::move(out));
}

/// Depthwise convolution, channel multiplier 1. Weights (1,kh,kw,C).
inline Tensor depthwise_conv2d_f32(const Tensor& input, const Tensor& weights, const Tensor& bias,
                                   int stride_h, int stride_w, Padding padding,
                                   FusedActivation act) {
    require(input.shape().rank() == 4, "depthwise input must be rank 4");
    require(weights.shape().rank() == 4 && weights.shape()[0] == 1,
            "depthwise weights must be (1,kh,kw,C)");
    const std::int64_t in_h = input.shape()[1], in_w = input.shape()[2], ch = input.shape()[3];
    require(weights.shape()[3] == ch, "depthwise weight channels != input channels");
    require(bias.shape().rank() == 1 && bias.shape()[0] == ch, "depthwise bias length != channels");
    const std::int64_t kh = weights.shape()[1], kw = weights.shape()[2];
    const ConvGeometry g = conv_geometry(in_h, in_w, kh, kw, stride_h, stride_w, padding);

    auto x = input.f();
    auto w = weights.f();
    auto b = bias.f();
    std::vector<float> out(static_cast<std::size_t>(g.out_h * g.out_w * ch));
    for (std::int64_t oy = 0; oy < g.out_h; ++oy) {
        for (std::int64_t ox = 0; ox < g.out_w; ++ox) {
            for (std::int64_t c = 0; c < ch; ++c) {
                float acc = 0.0f;
                for (std::int64_t ky = 0; ky < kh; ++ky) {
                    const std::int64_t iy = oy * stride_h + ky - g.pad_top;
                    if (iy < 0 || iy >= in_h) continue;
                    for (std::int64_t kx = 0; kx < kw; ++kx) {
                        const std::int64_t ix = ox * stride_w + kx - g.pad_left;
                        if (ix < 0 || ix >= in_w) continue;
                        acc += x[static_cast<std::size_t>((iy * in_w + ix) * ch + c)] *
                               w[static_cast<std::size_t>((ky * kw + kx) * ch + c)];
                    }
                }
                out[static_cast<std::size_t>((oy * g.out_w + ox) * ch + c)] =
                    apply_activation(acc + b[static_cast<std::size_t>(c)], act);
            }
        }
    }
    return Tensor::f32(Shape{1, g.out_h, g.out_w, ch}, std::move(out));
}

/// Matrix product y = x W^T + b. Input is flattened to (batch, features);
/// weights (out, features).
inline Tensor fully_connected_f32(const Tensor& input, const Tensor& weights, const Tensor& bias,
                                  FusedActivation act) {
    require(weights.shape().rank() == 2, "fc weights must be rank 2");
    const std::int64_t batch = input.shape()[0];
    const std::int64_t features = input.elements() / batch;
    const std::int64_t out_n = weights.shape()[0];
    require(weights.shape()[1] == features,
            "fc feature dim " + std::to_string(weights.shape()[1]) + " != input features " +
                std::to_string(features));
    require(bias.shape().rank() == 1 && bias.shape()[0] == out_n, "fc bias length != out");

    auto x = input.f();
    auto w = weights.f();
    auto b = bias.f();
    std::vector<float> out(static_cast<std::size_t>(batch * out_n));
    for (std::int64_t n = 0; n < batch; ++n) {
        for (std::int64_t o = 0; o < out_n; ++o) {
            float acc = 0.0f;
            for (std::int64_t i = 0; i < features; ++i)
                acc += x[static_cast<std::size_t>(n * features + i)] *
                       w[static_cast<std::size_t>(o * features + i)];
            out[static_cast<std::size_t>(n * out_n + o)] =
                apply_activation(acc + b[static_cast<std::size_t>(o)], act);
        }
    }
    return Tensor::f32(Shape{batch, out_n}, std::move(out));
}

/// Spatial mean per channel: (1,H,W,C) -> (1,1,1,C).
inline Tensor global_avg_pool_f32(const Tensor& input) {
    require(input.shape().rank() == 4, "pool input must be rank 4");
    const std::int64_t hw = input.shape()[1] * input.shape()[2];
    const std::int64_t ch = input.shape()[3];
    auto x = input.f();
    std::vector<float> out(static_cast<std::size_t>(ch));
    for (std::int64_t c = 0; c < ch; ++c) {
        double sum = 0.0;
        for (std::int64_t i = 0; i < hw; ++i) sum += x[static_cast<std::size_t>(i * ch + c)];
        out[static_cast<std::size_t>(c)] = static_cast<float>(sum / static_cast<double>(hw));
    }
    return Tensor::f32(Shape{1, 1, 1, ch}, std::move(out));
}

inline Tensor hard_swish_f32(const Tensor& input) {
    auto x = input.f();
    std::vector<float> out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = hard_swish_value(x[i]);
    return Tensor::f32(input.shape(), std::move(out));
}

inline Tensor hard_sigmoid_f32(const Tensor& input) {
    auto x = input.f();
    std::vector<float> out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = hard_sigmoid_value(x[i]);
    return Tensor::f32(input.shape(), std::move(out));
}

inline Tensor elementwise_add_f32(const Tensor& a, const Tensor& b) {
    require(a.shape() == b.shape(), "add operands must have identical shapes");
    auto xa = a.f();
    auto xb = b.f();
    std::vector<float> out(xa.size());
    for (std::size_t i = 0; i < xa.size(); ++i) out[i] = xa[i] + xb[i];
    return Tensor::f32(a.shape(), std::move(out));
}

/// Multiply (1,H,W,C) by a per-channel gate (1,1,1,C).
inline Tensor elementwise_mul_channels_f32(const Tensor& a, const Tensor& scale) {
    require(a.shape().rank() == 4, "mul input must be rank 4");
    require(scale.shape() == Shape({1, 1, 1, a.shape()[3]}),
            "channel scale must be (1,1,1,C), got " + scale.shape().str());
    const std::int64_t hw = a.shape()[1] * a.shape()[2];
    const std::int64_t ch = a.shape()[3];
    auto xa = a.f();
    auto xs = scale.f();
    std::vector<float> out(xa.size());
    for (std::int64_t i = 0; i < hw; ++i)
        for (std::int64_t c = 0; c < ch; ++c)
            out[static_cast<std::size_t>(i * ch + c)] =
                xa[static_cast<std::size_t>(i * ch + c)] * xs[static_cast<std::size_t>(c)];
    return Tensor::f32(a.shape(), std::move(out));
}

/// Channel-axis concatenation in argument order; float path only.
inline Tensor concat_channels(const std::vector<Tensor>& parts) {
    require(!parts.empty(), "concat needs at least one tensor");
    const auto& first = parts.front().shape();
    require(first.rank() == 4, "concat operands must be rank 4");
    std::int64_t total_c = 0;
    for (const auto& p : parts) {
        require(p.shape().rank() == 4 && p.shape()[0] == first[0] && p.shape()[1] == first[1] &&
                    p.shape()[2] == first[2],
                "concat operands must share batch/spatial dims");
        total_c += p.shape()[3];
    }
    const std::int64_t hw = first[0] * first[1] * first[2];
    std::vector<float> out(static_cast<std::size_t>(hw * total_c));
    std::int64_t c_base = 0;
    for (const auto& p : parts) {
        auto x = p.f();
        const std::int64_t pc = p.shape()[3];
        for (std::int64_t i = 0; i < hw; ++i)
            for (std::int64_t c = 0; c < pc; ++c)
                out[static_cast<std::size_t>(i * total_c + c_base + c)] =
                    x[static_cast<std::size_t>(i * pc + c)];
        c_base += pc;
    }
    return Tensor::f32(Shape{first[0], first[1], first[2], total_c}, std::move(out));
}

/// Fold inference-time batch normalization into the preceding convolution:
///   w'_c = w_c * gamma_c / sqrt(var_c + eps)
///   b'_c = (b_c - mean_c) * gamma_c / sqrt(var_c + eps) + beta_c
/// channel_axis selects the out-channel axis of the weight layout
/// (0 for conv/fc, 3 for depthwise).
inline std::pair<Tensor, Tensor> fold_batchnorm(const Tensor& weights, const Tensor& bias,
                                                const Tensor& gamma, const Tensor& beta,
                                                const Tensor& mean, const Tensor& variance,
                                                double eps, int channel_axis = 0) {
    require(eps > 0.0, "batchnorm eps must be > 0");
    require(channel_axis >= 0 && channel_axis < weights.shape().rank(), "bad channel axis");
    const std::int64_t ch = weights.shape()[channel_axis];
    for (const Tensor* t : {&gamma, &beta, &mean, &variance})
        require(t->shape().rank() == 1 && t->shape()[0] == ch,
                "batchnorm statistics must be per out-channel");
    auto var = variance.f();
    std::vector<double> factor(static_cast<std::size_t>(ch));
    for (std::int64_t c = 0; c < ch; ++c) {
        const double v = var[static_cast<std::size_t>(c)];
        require(v >= 0.0, "negative batchnorm variance");
        factor[static_cast<std::size_t>(c)] =
            static_cast<double>(gamma.f()[static_cast<std::size_t>(c)]) / std::sqrt(v + eps);
    }
    auto w = weights.f();
    std::vector<float> wf(w.size());
    const std::int64_t stride = weights.stride(channel_axis);
    for (std::size_t i = 0; i < w.size(); ++i) {
        const auto c = static_cast<std::size_t>((static_cast<std::int64_t>(i) / stride) % ch);
        wf[i] = static_cast<float>(w[i] * factor[c]);
    }
    auto b = bias.f();
    std::vector<float> bf(b.size());
    for (std::int64_t c = 0; c < ch; ++c) {
        const auto ci = static_cast<std::size_t>(c);
        bf[ci] = static_cast<float>((static_cast<double>(b[ci]) - mean.f()[ci]) * factor[ci] +
                                    beta.f()[ci]);
    }
    return {Tensor::f32(weights.shape(), std::move(wf)), Tensor::f32(bias.shape(), std::move(bf))};
}

} // namespace ttrk
