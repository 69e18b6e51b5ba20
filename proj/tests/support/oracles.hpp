#pragma once

// Independent reference implementations the library is tested against.
// Deliberately naive: padded buffers and plain loops, long double arithmetic,
// no shared code with the headers under test.

#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

namespace oracle {

struct ConvDims {
    std::int64_t h = 0, w = 0, c = 0;
};

inline std::int64_t out_dim(std::int64_t in, std::int64_t k, std::int64_t s, bool same) {
    if (same) return (in + s - 1) / s;
    return (in - k) / s + 1;
}

inline std::int64_t pad_before(std::int64_t in, std::int64_t k, std::int64_t s, bool same) {
    if (!same) return 0;
    const std::int64_t out = out_dim(in, k, s, true);
    const std::int64_t total = std::max<std::int64_t>((out - 1) * s + k - in, 0);
    return total / 2;
}

// int8 conv accumulator: the input is first materialized into a buffer padded
// with the input zero point, then convolved with plain loops. Weights are
// (out_c, kh, kw, in_c/groups), bias folds into the accumulator.
inline std::vector<std::int32_t> conv_acc_i8(const std::vector<std::int8_t>& x, std::int64_t in_h,
                                             std::int64_t in_w, std::int64_t in_c,
                                             std::int32_t z_in, const std::vector<std::int8_t>& w,
                                             std::int64_t out_c, std::int64_t kh, std::int64_t kw,
                                             const std::vector<std::int32_t>& bias,
                                             std::int64_t sh, std::int64_t sw, bool same,
                                             std::int64_t groups, ConvDims* dims = nullptr) {
    const std::int64_t out_h = out_dim(in_h, kh, sh, same);
    const std::int64_t out_w = out_dim(in_w, kw, sw, same);
    const std::int64_t pt = pad_before(in_h, kh, sh, same);
    const std::int64_t pl = pad_before(in_w, kw, sw, same);
    const std::int64_t ph = in_h + pt + std::max<std::int64_t>((out_h - 1) * sh + kh - in_h - pt, 0);
    const std::int64_t pw = in_w + pl + std::max<std::int64_t>((out_w - 1) * sw + kw - in_w - pl, 0);

    std::vector<std::int32_t> padded(static_cast<std::size_t>(ph * pw * in_c), z_in);
    for (std::int64_t y = 0; y < in_h; ++y)
        for (std::int64_t xx = 0; xx < in_w; ++xx)
            for (std::int64_t c = 0; c < in_c; ++c)
                padded[static_cast<std::size_t>(((y + pt) * pw + (xx + pl)) * in_c + c)] =
                    x[static_cast<std::size_t>((y * in_w + xx) * in_c + c)];

    const std::int64_t gin = in_c / groups;
    const std::int64_t gout = out_c / groups;
    std::vector<std::int32_t> acc(static_cast<std::size_t>(out_h * out_w * out_c));
    for (std::int64_t oy = 0; oy < out_h; ++oy)
        for (std::int64_t ox = 0; ox < out_w; ++ox)
            for (std::int64_t oc = 0; oc < out_c; ++oc) {
                std::int64_t sum = bias[static_cast<std::size_t>(oc)];
                const std::int64_t cbase = (oc / gout) * gin;
                for (std::int64_t ky = 0; ky < kh; ++ky)
                    for (std::int64_t kx = 0; kx < kw; ++kx)
                        for (std::int64_t ci = 0; ci < gin; ++ci) {
                            const std::int64_t iy = oy * sh + ky, ix = ox * sw + kx;
                            const std::int32_t v = padded[static_cast<std::size_t>(
                                (iy * pw + ix) * in_c + cbase + ci)];
                            const std::int32_t wv = w[static_cast<std::size_t>(
                                ((oc * kh + ky) * kw + kx) * gin + ci)];
                            sum += static_cast<std::int64_t>(v - z_in) * wv;
                        }
                acc[static_cast<std::size_t>((oy * out_w + ox) * out_c + oc)] =
                    static_cast<std::int32_t>(sum);
            }
    if (dims) *dims = {out_h, out_w, out_c};
    return acc;
}

// Depthwise accumulator, weights (1, kh, kw, c).
inline std::vector<std::int32_t> depthwise_acc_i8(const std::vector<std::int8_t>& x,
                                                  std::int64_t in_h, std::int64_t in_w,
                                                  std::int64_t ch, std::int32_t z_in,
                                                  const std::vector<std::int8_t>& w,
                                                  std::int64_t kh, std::int64_t kw,
                                                  const std::vector<std::int32_t>& bias,
                                                  std::int64_t sh, std::int64_t sw, bool same,
                                                  ConvDims* dims = nullptr) {
    const std::int64_t out_h = out_dim(in_h, kh, sh, same);
    const std::int64_t out_w = out_dim(in_w, kw, sw, same);
    const std::int64_t pt = pad_before(in_h, kh, sh, same);
    const std::int64_t pl = pad_before(in_w, kw, sw, same);
    const std::int64_t ph = in_h + pt + std::max<std::int64_t>((out_h - 1) * sh + kh - in_h - pt, 0);
    const std::int64_t pw = in_w + pl + std::max<std::int64_t>((out_w - 1) * sw + kw - in_w - pl, 0);

    std::vector<std::int32_t> padded(static_cast<std::size_t>(ph * pw * ch), z_in);
    for (std::int64_t y = 0; y < in_h; ++y)
        for (std::int64_t xx = 0; xx < in_w; ++xx)
            for (std::int64_t c = 0; c < ch; ++c)
                padded[static_cast<std::size_t>(((y + pt) * pw + (xx + pl)) * ch + c)] =
                    x[static_cast<std::size_t>((y * in_w + xx) * ch + c)];

    std::vector<std::int32_t> acc(static_cast<std::size_t>(out_h * out_w * ch));
    for (std::int64_t oy = 0; oy < out_h; ++oy)
        for (std::int64_t ox = 0; ox < out_w; ++ox)
            for (std::int64_t c = 0; c < ch; ++c) {
                std::int64_t sum = bias[static_cast<std::size_t>(c)];
                for (std::int64_t ky = 0; ky < kh; ++ky)
                    for (std::int64_t kx = 0; kx < kw; ++kx) {
                        const std::int64_t iy = oy * sh + ky, ix = ox * sw + kx;
                        sum += static_cast<std::int64_t>(
                                   padded[static_cast<std::size_t>((iy * pw + ix) * ch + c)] -
                                   z_in) *
                               w[static_cast<std::size_t>((ky * kw + kx) * ch + c)];
                    }
                acc[static_cast<std::size_t>((oy * out_w + ox) * ch + c)] =
                    static_cast<std::int32_t>(sum);
            }
    if (dims) *dims = {out_h, out_w, ch};
    return acc;
}

inline std::vector<std::int32_t> fc_acc_i8(const std::vector<std::int8_t>& x, std::int64_t batch,
                                           std::int64_t features, std::int32_t z_in,
                                           const std::vector<std::int8_t>& w, std::int64_t out_n,
                                           const std::vector<std::int32_t>& bias) {
    std::vector<std::int32_t> acc(static_cast<std::size_t>(batch * out_n));
    for (std::int64_t n = 0; n < batch; ++n)
        for (std::int64_t o = 0; o < out_n; ++o) {
            std::int64_t sum = bias[static_cast<std::size_t>(o)];
            for (std::int64_t i = 0; i < features; ++i)
                sum += static_cast<std::int64_t>(
                           x[static_cast<std::size_t>(n * features + i)] - z_in) *
                       w[static_cast<std::size_t>(o * features + i)];
            acc[static_cast<std::size_t>(n * out_n + o)] = static_cast<std::int32_t>(sum);
        }
    return acc;
}

// Exact reference for the fixed-point rescale: acc * mantissa is at most
// 2^62 in magnitude, so long double (64-bit mantissa) holds it exactly, and
// scaling by a power of two stays exact. roundl rounds half away from zero.
inline std::int32_t rescale_ref(std::int32_t acc, std::int32_t mantissa, int shift) {
    const long double prod =
        static_cast<long double>(acc) * static_cast<long double>(mantissa);
    const long double v = std::ldexp(prod, shift - 31);
    const long double r = std::round(v);
    if (r > 2147483647.0L) return std::numeric_limits<std::int32_t>::max();
    if (r < -2147483648.0L) return std::numeric_limits<std::int32_t>::min();
    return static_cast<std::int32_t>(r);
}

// Double-precision float convolution reference.
inline std::vector<double> conv_f64(const std::vector<float>& x, std::int64_t in_h,
                                    std::int64_t in_w, std::int64_t in_c,
                                    const std::vector<float>& w, std::int64_t out_c,
                                    std::int64_t kh, std::int64_t kw,
                                    const std::vector<float>& bias, std::int64_t sh,
                                    std::int64_t sw, bool same, std::int64_t groups,
                                    ConvDims* dims = nullptr) {
    const std::int64_t out_h = out_dim(in_h, kh, sh, same);
    const std::int64_t out_w = out_dim(in_w, kw, sw, same);
    const std::int64_t pt = pad_before(in_h, kh, sh, same);
    const std::int64_t pl = pad_before(in_w, kw, sw, same);
    const std::int64_t gin = in_c / groups;
    const std::int64_t gout = out_c / groups;
    std::vector<double> out(static_cast<std::size_t>(out_h * out_w * out_c));
    for (std::int64_t oy = 0; oy < out_h; ++oy)
        for (std::int64_t ox = 0; ox < out_w; ++ox)
            for (std::int64_t oc = 0; oc < out_c; ++oc) {
                double sum = bias[static_cast<std::size_t>(oc)];
                const std::int64_t cbase = (oc / gout) * gin;
                for (std::int64_t ky = 0; ky < kh; ++ky)
                    for (std::int64_t kx = 0; kx < kw; ++kx)
                        for (std::int64_t ci = 0; ci < gin; ++ci) {
                            const std::int64_t iy = oy * sh + ky - pt;
                            const std::int64_t ix = ox * sw + kx - pl;
                            if (iy < 0 || iy >= in_h || ix < 0 || ix >= in_w) continue;
                            sum += static_cast<double>(
                                       x[static_cast<std::size_t>((iy * in_w + ix) * in_c +
                                                                  cbase + ci)]) *
                                   w[static_cast<std::size_t>(((oc * kh + ky) * kw + kx) * gin +
                                                              ci)];
                        }
                out[static_cast<std::size_t>((oy * out_w + ox) * out_c + oc)] = sum;
            }
    if (dims) *dims = {out_h, out_w, out_c};
    return out;
}

// Count multiply-accumulates by enumeration (padding positions included, as
// the cost model defines).
inline std::int64_t conv_mac_enumerate(std::int64_t in_h, std::int64_t in_w, std::int64_t in_c,
                                       std::int64_t out_c, std::int64_t kh, std::int64_t kw,
                                       std::int64_t sh, std::int64_t sw, bool same,
                                       std::int64_t groups) {
    const std::int64_t out_h = out_dim(in_h, kh, sh, same);
    const std::int64_t out_w = out_dim(in_w, kw, sw, same);
    std::int64_t count = 0;
    for (std::int64_t oy = 0; oy < out_h; ++oy)
        for (std::int64_t ox = 0; ox < out_w; ++ox)
            for (std::int64_t oc = 0; oc < out_c; ++oc)
                for (std::int64_t ky = 0; ky < kh; ++ky)
                    for (std::int64_t kx = 0; kx < kw; ++kx)
                        for (std::int64_t ci = 0; ci < in_c / groups; ++ci) ++count;
    return count;
}

// Long double mean, plain sorted median.
inline double mean_ref(const std::vector<double>& v) {
    long double s = 0.0L;
    for (double x : v) s += x;
    return static_cast<double>(s / static_cast<long double>(v.size()));
}

} // namespace oracle
