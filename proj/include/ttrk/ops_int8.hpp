#pragma once

#include <array>
#include <cmath>
#include <functional>
#include <vector>

#include "ttrk/ops.hpp"
#include "ttrk/quant.hpp"

namespace ttrk {

/// int8 code bounds after requantization, intersected with the fused
/// activation range mapped into the output quantization space.
inline std::pair<std::int32_t, std::int32_t> activation_code_bounds(FusedActivation act,
                                                                    const QuantParams& out_qp) {
    std::int32_t lo = kQmin, hi = kQmax;
    if (act == FusedActivation::Relu || act == FusedActivation::Relu6)
        lo = std::max<std::int32_t>(lo, out_qp.zero_point());
    if (act == FusedActivation::Relu6) {
        const auto six = out_qp.zero_point() +
                         round_half_away(6.0 / static_cast<double>(out_qp.scale()));
        hi = static_cast<std::int32_t>(std::min<std::int64_t>(hi, six));
    }
    if (hi < lo) hi = lo;
    return {lo, hi};
}

namespace detail {

inline void check_i8_conv_inputs(const Tensor& input, const Tensor& weights, const Tensor& bias) {
    require(input.dtype() == DType::I8 && input.has_qparams(), "int8 conv needs quantized input");
    require(weights.dtype() == DType::I8 && weights.has_qparams(),
            "int8 conv needs quantized weights");
    require(weights.qparams().symmetric(), "int8 conv weights must be symmetric");
    require(bias.dtype() == DType::I32, "int8 conv bias must be int32");
}

} // namespace detail

/// Integer accumulation stage of the int8 convolution:
///   acc = sum (q_in - z_in) * q_w + bias_i32
/// Returns int32 accumulators shaped like the output.
inline Tensor conv2d_i8_acc(const Tensor& input, const Tensor& weights, const Tensor& bias,
                            int stride_h, int stride_w, Padding padding, int groups) {
    detail::check_i8_conv_inputs(input, weights, bias);
    require(weights.shape().rank() == 4 && input.shape().rank() == 4, "int8 conv needs rank-4 tensors");
    const std::int64_t in_h = input.shape()[1], in_w = input.shape()[2], in_c = input.shape()[3];
    const std::int64_t out_c = weights.shape()[0], kh = weights.shape()[1], kw = weights.shape()[2];
    require(in_c % groups == 0 && out_c % groups == 0, "channels not divisible by groups");
    require(weights.shape()[3] == in_c / groups, "weight in-channel dim != in_c/groups");
    require(bias.shape()[0] == out_c, "bias length != out-channels");
    const std::int64_t gin = in_c / groups, gout = out_c / groups;
    const ConvGeometry g = conv_geometry(in_h, in_w, kh, kw, stride_h, stride_w, padding);
    const std::int32_t z_in = input.qparams().zero_point();

    auto x = input.q();
    auto w = weights.q();
    auto b = bias.i();
    std::vector<std::int32_t> out(static_cast<std::size_t>(g.out_h * g.out_w * out_c));
    for (std::int64_t oy = 0; oy < g.out_h; ++oy) {
        for (std::int64_t ox = 0; ox < g.out_w; ++ox) {
            for (std::int64_t oc = 0; oc < out_c; ++oc) {
                const std::int64_t ic0 = (oc / gout) * gin;
                std::int32_t acc = b[static_cast<std::size_t>(oc)];
                for (std::int64_t ky = 0; ky < kh; ++ky) {
                    const std::int64_t iy = oy * stride_h + ky - g.pad_top;
                    if (iy < 0 || iy >= in_h) continue;
                    for (std::int64_t kx = 0; kx < kw; ++kx) {
                        const std::int64_t ix = ox * stride_w + kx - g.pad_left;
                        if (ix < 0 || ix >= in_w) continue;
                        const std::int8_t* xp = &x[static_cast<std::size_t>((iy * in_w + ix) * in_c + ic0)];
                        const std::int8_t* wp =
                            &w[static_cast<std::size_t>(((oc * kh + ky) * kw + kx) * gin)];
                        for (std::int64_t c = 0; c < gin; ++c)
                            acc += (static_cast<std::int32_t>(xp[c]) - z_in) *
                                   static_cast<std::int32_t>(wp[c]);
                    }
                }
                out[static_cast<std::size_t>((oy * g.out_w + ox) * out_c + oc)] = acc;
            }
        }
    }
    return Tensor::i32(Shape{1, g.out_h, g.out_w, out_c}, std::move(out));
}

inline Tensor depthwise_conv2d_i8_acc(const Tensor& input, const Tensor& weights,
                                      const Tensor& bias, int stride_h, int stride_w,
                                      Padding padding) {
    detail::check_i8_conv_inputs(input, weights, bias);
    require(weights.shape().rank() == 4 && weights.shape()[0] == 1,
            "depthwise weights must be (1,kh,kw,C)");
    const std::int64_t in_h = input.shape()[1], in_w = input.shape()[2], ch = input.shape()[3];
    require(weights.shape()[3] == ch, "depthwise weight channels != input channels");
    require(bias.shape()[0] == ch, "depthwise bias length != channels");
    const std::int64_t kh = weights.shape()[1], kw = weights.shape()[2];
    const ConvGeometry g = conv_geometry(in_h, in_w, kh, kw, stride_h, stride_w, padding);
    const std::int32_t z_in = input.qparams().zero_point();

    auto x = input.q();
    auto w = weights.q();
    auto b = bias.i();
    std::vector<std::int32_t> out(static_cast<std::size_t>(g.out_h * g.out_w * ch));
    for (std::int64_t oy = 0; oy < g.out_h; ++oy) {
        for (std::int64_t ox = 0; ox < g.out_w; ++ox) {
            for (std::int64_t c = 0; c < ch; ++c) {
                std::int32_t acc = b[static_cast<std::size_t>(c)];
                for (std::int64_t ky = 0; ky < kh; ++ky) {
                    const std::int64_t iy = oy * stride_h + ky - g.pad_top;
                    if (iy < 0 || iy >= in_h) continue;
                    for (std::int64_t kx = 0; kx < kw; ++kx) {
                        const std::int64_t ix = ox * stride_w + kx - g.pad_left;
                        if (ix < 0 || ix >= in_w) continue;
                        acc += (static_cast<std::int32_t>(
                                    x[static_cast<std::size_t>((iy * in_w + ix) * ch + c)]) -
                                z_in) *
                               static_cast<std::int32_t>(
                                   w[static_cast<std::size_t>((ky * kw + kx) * ch + c)]);
                    }
                }
                out[static_cast<std::size_t>((oy * g.out_w + ox) * ch + c)] = acc;
            }
        }
    }
    return Tensor::i32(Shape{1, g.out_h, g.out_w, ch}, std::move(out));
}

inline Tensor fully_connected_i8_acc(const Tensor& input, const Tensor& weights,
                                     const Tensor& bias) {
    detail::check_i8_conv_inputs(input, weights, bias);
    require(weights.shape().rank() == 2, "fc weights must be rank 2");
    const std::int64_t batch = input.shape()[0];
    const std::int64_t features = input.elements() / batch;
    const std::int64_t out_n = weights.shape()[0];
    require(weights.shape()[1] == features, "fc feature dim != input features");
    require(bias.shape()[0] == out_n, "fc bias length != out");
    const std::int32_t z_in = input.qparams().zero_point();

    auto x = input.q();
    auto w = weights.q();
    auto b = bias.i();
    std::vector<std::int32_t> out(static_cast<std::size_t>(batch * out_n));
    for (std::int64_t n = 0; n < batch; ++n) {
        for (std::int64_t o = 0; o < out_n; ++o) {
            std::int32_t acc = b[static_cast<std::size_t>(o)];
            for (std::int64_t i = 0; i < features; ++i)
                acc += (static_cast<std::int32_t>(x[static_cast<std::size_t>(n * features + i)]) -
                        z_in) *
                       static_cast<std::int32_t>(w[static_cast<std::size_t>(o * features + i)]);
            out[static_cast<std::size_t>(n * out_n + o)] = acc;
        }
    }
    return Tensor::i32(Shape{batch, out_n}, std::move(out));
}

/// Requantize int32 accumulators to int8 codes. The per-channel multiplier is
/// s_in * s_w,c / s_out; channels run along the last axis of `acc`.
inline Tensor requantize_acc(const Tensor& acc, const QuantParams& in_qp, const QuantParams& w_qp,
                             const QuantParams& out_qp, FusedActivation act) {
    require(acc.dtype() == DType::I32, "requantize expects int32 accumulators");
    const std::int64_t ch = acc.shape()[acc.shape().rank() - 1];
    require(!w_qp.per_channel_scheme() ||
                static_cast<std::int64_t>(w_qp.scales.size()) == ch,
            "weight scale count does not match accumulator channels");
    const double s_in = in_qp.scale();
    const double s_out = out_qp.scale();
    std::vector<FixedMultiplier> mult(static_cast<std::size_t>(ch));
    for (std::int64_t c = 0; c < ch; ++c) {
        const double s_w = w_qp.per_channel_scheme() ? w_qp.scales[static_cast<std::size_t>(c)]
                                                     : w_qp.scale();
        mult[static_cast<std::size_t>(c)] = compute_fixed_multiplier(s_in * s_w / s_out);
    }
    const auto [lo, hi] = activation_code_bounds(act, out_qp);
    const std::int32_t z_out = out_qp.zero_point();

    auto a = acc.i();
    std::vector<std::int8_t> out(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        const auto c = static_cast<std::size_t>(static_cast<std::int64_t>(i) % ch);
        const std::int64_t v = static_cast<std::int64_t>(rescale_i32(a[i], mult[c])) + z_out;
        out[i] = static_cast<std::int8_t>(std::clamp<std::int64_t>(v, lo, hi));
    }
    return Tensor::i8(acc.shape(), out_qp, std::move(out));
}

inline Tensor conv2d_i8(const Tensor& input, const Tensor& weights, const Tensor& bias,
                        int stride_h, int stride_w, Padding padding, int groups,
                        FusedActivation act, const QuantParams& out_qp) {
    Tensor acc = conv2d_i8_acc(input, weights, bias, stride_h, stride_w, padding, groups);
    return requantize_acc(acc, input.qparams(), weights.qparams(), out_qp, act);
}

inline Tensor depthwise_conv2d_i8(const Tensor& input, const Tensor& weights, const Tensor& bias,
                                  int stride_h, int stride_w, Padding padding, FusedActivation act,
                                  const QuantParams& out_qp) {
    Tensor acc = depthwise_conv2d_i8_acc(input, weights, bias, stride_h, stride_w, padding);
    return requantize_acc(acc, input.qparams(), weights.qparams(), out_qp, act);
}

inline Tensor fully_connected_i8(const Tensor& input, const Tensor& weights, const Tensor& bias,
                                 FusedActivation act, const QuantParams& out_qp) {
    Tensor acc = fully_connected_i8_acc(input, weights, bias);
    return requantize_acc(acc, input.qparams(), weights.qparams(), out_qp, act);
}

/// int8 global average pool: int32 sum, round-half-away division, identical
/// qparams in and out.
inline Tensor global_avg_pool_i8(const Tensor& input) {
    require(input.shape().rank() == 4, "pool input must be rank 4");
    const std::int64_t hw = input.shape()[1] * input.shape()[2];
    const std::int64_t ch = input.shape()[3];
    auto x = input.q();
    std::vector<std::int8_t> out(static_cast<std::size_t>(ch));
    for (std::int64_t c = 0; c < ch; ++c) {
        std::int64_t sum = 0;
        for (std::int64_t i = 0; i < hw; ++i) sum += x[static_cast<std::size_t>(i * ch + c)];
        out[static_cast<std::size_t>(c)] = clamp_i8(div_round_half_away(sum, hw));
    }
    return Tensor::i8(Shape{1, 1, 1, ch}, input.qparams(), std::move(out));
}

/// 256-entry code-to-code table for an elementwise function:
/// lut[q + 128] = quantize(f(dequantize(q))), evaluated in double precision.
inline std::vector<std::int8_t> make_activation_lut(const std::function<double(double)>& f,
                                                    const QuantParams& in_qp,
                                                    const QuantParams& out_qp) {
    std::vector<std::int8_t> lut(256);
    for (int q = kQmin; q <= kQmax; ++q) {
        const double r = static_cast<double>(in_qp.scale()) * (q - in_qp.zero_point());
        lut[static_cast<std::size_t>(q + 128)] =
            clamp_i8(round_half_away(f(r) / static_cast<double>(out_qp.scale())) +
                     out_qp.zero_point());
    }
    return lut;
}

inline std::vector<std::int8_t> make_hard_swish_lut(const QuantParams& in_qp,
                                                    const QuantParams& out_qp) {
    return make_activation_lut(
        [](double x) { return x * std::clamp(x + 3.0, 0.0, 6.0) / 6.0; }, in_qp, out_qp);
}

inline std::vector<std::int8_t> make_hard_sigmoid_lut(const QuantParams& in_qp,
                                                      const QuantParams& out_qp) {
    return make_activation_lut([](double x) { return std::clamp(x + 3.0, 0.0, 6.0) / 6.0; },
                               in_qp, out_qp);
}

inline Tensor apply_lut_i8(const Tensor& input, const std::vector<std::int8_t>& lut,
                           const QuantParams& out_qp) {
    require(lut.size() == 256, "activation lut must have 256 entries");
    auto x = input.q();
    std::vector<std::int8_t> out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i)
        out[i] = lut[static_cast<std::size_t>(static_cast<int>(x[i]) + 128)];
    return Tensor::i8(input.shape(), out_qp, std::move(out));
}

/// int8 add: both operands are rescaled to the output scale, summed in int32,
/// then shifted to the output zero point.
inline Tensor elementwise_add_i8(const Tensor& a, const Tensor& b, const QuantParams& out_qp) {
    require(a.shape() == b.shape(), "add operands must have identical shapes");
    const QuantParams& qa = a.qparams();
    const QuantParams& qb = b.qparams();
    const FixedMultiplier ma = compute_fixed_multiplier(qa.scale() / static_cast<double>(out_qp.scale()));
    const FixedMultiplier mb = compute_fixed_multiplier(qb.scale() / static_cast<double>(out_qp.scale()));
    const std::int32_t za = qa.zero_point(), zb = qb.zero_point(), zo = out_qp.zero_point();

    auto xa = a.q();
    auto xb = b.q();
    std::vector<std::int8_t> out(xa.size());
    for (std::size_t i = 0; i < xa.size(); ++i) {
        const std::int64_t v = static_cast<std::int64_t>(rescale_i32(xa[i] - za, ma)) +
                               rescale_i32(xb[i] - zb, mb) + zo;
        out[i] = clamp_i8(v);
    }
    return Tensor::i8(a.shape(), out_qp, std::move(out));
}

/// int8 per-channel multiply: products in int32, then one requantization by
/// s_a * s_gate / s_out.
inline Tensor elementwise_mul_channels_i8(const Tensor& a, const Tensor& scale,
                                          const QuantParams& out_qp) {
    require(a.shape().rank() == 4, "mul input must be rank 4");
    require(scale.shape() == Shape({1, 1, 1, a.shape()[3]}), "channel scale must be (1,1,1,C)");
    const QuantParams& qa = a.qparams();
    const QuantParams& qs = scale.qparams();
    const FixedMultiplier m = compute_fixed_multiplier(
        static_cast<double>(qa.scale()) * qs.scale() / out_qp.scale());
    const std::int32_t za = qa.zero_point(), zs = qs.zero_point(), zo = out_qp.zero_point();

    const std::int64_t hw = a.shape()[1] * a.shape()[2];
    const std::int64_t ch = a.shape()[3];
    auto xa = a.q();
    auto xs = scale.q();
    std::vector<std::int8_t> out(xa.size());
    for (std::int64_t i = 0; i < hw; ++i) {
        for (std::int64_t c = 0; c < ch; ++c) {
            const std::int32_t prod =
                (static_cast<std::int32_t>(xa[static_cast<std::size_t>(i * ch + c)]) - za) *
                (static_cast<std::int32_t>(xs[static_cast<std::size_t>(c)]) - zs);
            out[static_cast<std::size_t>(i * ch + c)] =
                clamp_i8(static_cast<std::int64_t>(rescale_i32(prod, m)) + zo);
        }
    }
    return Tensor::i8(a.shape(), out_qp, std::move(out));
}

} // namespace ttrk
