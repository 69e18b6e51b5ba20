#pragma once

#include <cmath>
#include <cstdint>
#include <utility>

#include "ttrk/common.hpp"
#include "ttrk/tensor.hpp"

namespace ttrk {

// int8 code range is fixed to [-128, 127] throughout.
inline constexpr int kQmin = -128;
inline constexpr int kQmax = 127;

// Degenerate calibration ranges (min == max) are widened by this amount
// before computing a scale.
inline constexpr double kDegenerateRangeWidth = 1e-5;

/// q = clamp(round(r / s) + z, -128, 127), rounding half away from zero.
inline std::int8_t quantize_value(float r, float scale, std::int32_t zero_point) {
    return clamp_i8(round_half_away(static_cast<double>(r) / static_cast<double>(scale)) + zero_point);
}

inline float dequantize_value(std::int8_t q, float scale, std::int32_t zero_point) {
    return static_cast<float>(static_cast<double>(scale) * (static_cast<double>(q) - zero_point));
}

/// Quantize a float tensor with the given params (per-tensor or per-channel).
inline Tensor quantize(const Tensor& t, const QuantParams& qp) {
    qp.validate_for(t.shape());
    auto src = t.f();
    std::vector<std::int8_t> out(src.size());
    if (!qp.per_channel_scheme()) {
        const float s = qp.scale();
        const std::int32_t z = qp.zero_point();
        for (std::size_t i = 0; i < src.size(); ++i) out[i] = quantize_value(src[i], s, z);
    } else {
        const std::int64_t stride = t.stride(qp.axis);
        const std::int64_t n = t.shape()[qp.axis];
        for (std::size_t i = 0; i < src.size(); ++i) {
            const auto c = static_cast<std::size_t>((static_cast<std::int64_t>(i) / stride) % n);
            out[i] = quantize_value(src[i], qp.scales[c], qp.zero_points[c]);
        }
    }
    return Tensor::i8(t.shape(), qp, std::move(out));
}

/// r = s * (q - z) per element.
inline Tensor dequantize(const Tensor& t) {
    const QuantParams& qp = t.qparams();
    auto src = t.q();
    std::vector<float> out(src.size());
    if (!qp.per_channel_scheme()) {
        const float s = qp.scale();
        const std::int32_t z = qp.zero_point();
        for (std::size_t i = 0; i < src.size(); ++i) out[i] = dequantize_value(src[i], s, z);
    } else {
        const std::int64_t stride = t.stride(qp.axis);
        const std::int64_t n = t.shape()[qp.axis];
        for (std::size_t i = 0; i < src.size(); ++i) {
            const auto c = static_cast<std::size_t>((static_cast<std::int64_t>(i) / stride) % n);
            out[i] = dequantize_value(src[i], qp.scales[c], qp.zero_points[c]);
        }
    }
    return Tensor::f32(t.shape(), std::move(out));
}

/// Per-tensor params from an observed [min, max] range.
///
/// Asymmetric: the range is first extended to contain 0 and the zero point is
/// an integer, so 0.0 is always exactly representable. Symmetric: scale from
/// the absolute maximum, zero point 0.
inline QuantParams compute_quant_params(double min, double max, bool symmetric) {
    require(std::isfinite(min) && std::isfinite(max), "calibration range must be finite");
    require(min <= max, "calibration range needs min <= max");
    if (min == max) max = min + kDegenerateRangeWidth;

    if (symmetric) {
        const double absmax = std::max(std::abs(min), std::abs(max));
        return QuantParams::per_tensor(static_cast<float>(absmax / kQmax), 0);
    }
    const double lo = std::min(min, 0.0);
    const double hi = std::max(max, 0.0);
    const double scale = (hi - lo) / (kQmax - kQmin);
    const auto zero_point = static_cast<std::int32_t>(round_half_away(kQmin - lo / scale));
    return QuantParams::per_tensor(static_cast<float>(scale), zero_point);
}

/// Symmetric per-channel weight params along the given axis.
inline QuantParams symmetric_per_channel_params(const Tensor& weights, int axis) {
    require(axis >= 0 && axis < weights.shape().rank(), "bad per-channel axis");
    const auto n = static_cast<std::size_t>(weights.shape()[axis]);
    std::vector<double> absmax(n, 0.0);
    auto src = weights.f();
    const std::int64_t stride = weights.stride(axis);
    for (std::size_t i = 0; i < src.size(); ++i) {
        const auto c = static_cast<std::size_t>((static_cast<std::int64_t>(i) / stride) %
                                                static_cast<std::int64_t>(n));
        absmax[c] = std::max(absmax[c], std::abs(static_cast<double>(src[i])));
    }
    std::vector<float> scales(n);
    for (std::size_t c = 0; c < n; ++c) {
        double m = absmax[c];
        if (m == 0.0) m = kDegenerateRangeWidth;
        scales[c] = static_cast<float>(m / kQmax);
    }
    return QuantParams::per_channel(axis, std::move(scales), std::vector<std::int32_t>(n, 0));
}

/// Normalized fixed-point representation of a positive real multiplier:
/// multiplier ~= mantissa * 2^(shift - 31) with mantissa in [2^30, 2^31).
struct FixedMultiplier {
    std::int32_t mantissa = 0;
    int shift = 0;

    double real() const { return static_cast<double>(mantissa) * std::ldexp(1.0, shift - 31); }
};

inline FixedMultiplier compute_fixed_multiplier(double multiplier) {
    require(multiplier > 0.0 && multiplier < std::ldexp(1.0, 31),
            "fixed multiplier input must be in (0, 2^31)");
    int exp = 0;
    const double frac = std::frexp(multiplier, &exp); // frac in [0.5, 1)
    auto mantissa = static_cast<std::int64_t>(round_half_away(frac * std::ldexp(1.0, 31)));
    if (mantissa == (std::int64_t{1} << 31)) { // rounded up to 1.0
        mantissa >>= 1;
        ++exp;
    }
    return {static_cast<std::int32_t>(mantissa), exp};
}

/// round(acc * multiplier) in integer arithmetic only, rounding half away
/// from zero and saturating at int32 bounds.
inline std::int32_t rescale_i32(std::int32_t acc, FixedMultiplier m) {
    const std::int64_t prod = static_cast<std::int64_t>(acc) * m.mantissa;
    const int rshift = 31 - m.shift; // always >= 0 given multiplier < 2^31
    if (rshift == 0) return saturate_i32(prod);
    if (rshift >= 63) return 0; // |prod| < 2^62 <= half of 2^rshift
    const std::int64_t half = std::int64_t{1} << (rshift - 1);
    const std::int64_t r =
        prod >= 0 ? (prod + half) >> rshift : -((-prod + half) >> rshift);
    return saturate_i32(r);
}

} // namespace ttrk
