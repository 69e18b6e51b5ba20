#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdint>
#include <vector>

#include "support/helpers.hpp"
#include "support/oracles.hpp"
#include "ttrk/ttrk.hpp"

using namespace ttrk;

namespace {

QuantParams random_act_qp(testsup::Rng& rng) {
    double a = rng.uniform(-6.0, 2.0);
    double b = rng.uniform(-2.0, 6.0);
    if (a > b) std::swap(a, b);
    return compute_quant_params(a, b, false);
}

std::vector<std::int8_t> codes_of(const Tensor& t) {
    return {t.q().begin(), t.q().end()};
}

} // namespace

TEST_CASE("activation code bounds") {
    const QuantParams qp = QuantParams::per_tensor(0.05f, -10);
    SECTION("none") {
        const auto [lo, hi] = activation_code_bounds(FusedActivation::None, qp);
        CHECK(lo == -128);
        CHECK(hi == 127);
    }
    SECTION("relu clips at the zero point") {
        const auto [lo, hi] = activation_code_bounds(FusedActivation::Relu, qp);
        CHECK(lo == -10);
        CHECK(hi == 127);
        const auto [lo2, hi2] =
            activation_code_bounds(FusedActivation::Relu, QuantParams::per_tensor(1.0f, -128));
        CHECK(lo2 == -128);
        CHECK(hi2 == 127);
    }
    SECTION("relu6 clips both ends") {
        const auto [lo, hi] = activation_code_bounds(FusedActivation::Relu6, qp);
        CHECK(lo == -10);
        CHECK(hi == 110); // -10 + round(6 / 0.05) = 110
        const auto [lo2, hi2] =
            activation_code_bounds(FusedActivation::Relu6, QuantParams::per_tensor(1.0f, 100));
        CHECK(lo2 == 100);
        CHECK(hi2 == 106);
        const auto [lo3, hi3] =
            activation_code_bounds(FusedActivation::Relu6, QuantParams::per_tensor(0.01f, 0));
        CHECK(lo3 == 0);
        CHECK(hi3 == 127);
    }
}

TEST_CASE("int8 conv accumulators are bit-exact against the padded reference") {
    testsup::Rng rng(201);
    for (int t = 0; t < 50; ++t) {
        const std::int64_t in_h = rng.integer(1, 8);
        const std::int64_t in_w = rng.integer(1, 8);
        const std::int64_t k = 2 * rng.integer(0, 2) + 1;
        const Padding pad = rng.integer(0, 1) ? Padding::Same : Padding::Valid;
        if (pad == Padding::Valid && (in_h < k || in_w < k)) continue;
        const std::int64_t groups = rng.integer(0, 3) == 0 ? 2 : 1;
        const std::int64_t in_c = groups * rng.integer(1, 3);
        const std::int64_t out_c = groups * rng.integer(1, 4);
        const auto s = static_cast<int>(rng.integer(1, 2));
        const auto z_in = static_cast<std::int32_t>(rng.integer(-128, 127));

        const QuantParams in_qp = QuantParams::per_tensor(0.05f, z_in);
        const QuantParams w_qp = QuantParams::per_channel(
            0, std::vector<float>(static_cast<std::size_t>(out_c), 0.01f),
            std::vector<std::int32_t>(static_cast<std::size_t>(out_c), 0));
        const Tensor x = testsup::random_i8(rng, Shape{1, in_h, in_w, in_c}, in_qp);
        const Tensor w = testsup::random_i8(rng, Shape{out_c, k, k, in_c / groups}, w_qp);
        std::vector<std::int32_t> bias(static_cast<std::size_t>(out_c));
        for (auto& v : bias) v = static_cast<std::int32_t>(rng.integer(-100000, 100000));
        const Tensor b = Tensor::i32(Shape{out_c}, bias);

        const Tensor acc = conv2d_i8_acc(x, w, b, s, s, pad, static_cast<int>(groups));
        oracle::ConvDims dims;
        const auto ref = oracle::conv_acc_i8(codes_of(x), in_h, in_w, in_c, z_in, codes_of(w),
                                             out_c, k, k, bias, s, s, pad == Padding::Same,
                                             groups, &dims);
        REQUIRE(acc.shape() == Shape{1, dims.h, dims.w, dims.c});
        const auto got = acc.i();
        REQUIRE(got.size() == ref.size());
        for (std::size_t i = 0; i < ref.size(); ++i) REQUIRE(got[i] == ref[i]);
    }
}

TEST_CASE("int8 depthwise accumulators are bit-exact against the padded reference") {
    testsup::Rng rng(211);
    for (int t = 0; t < 50; ++t) {
        const std::int64_t in_h = rng.integer(1, 8);
        const std::int64_t in_w = rng.integer(1, 8);
        const std::int64_t ch = rng.integer(1, 6);
        const std::int64_t k = 2 * rng.integer(0, 2) + 1;
        const Padding pad = rng.integer(0, 1) ? Padding::Same : Padding::Valid;
        if (pad == Padding::Valid && (in_h < k || in_w < k)) continue;
        const auto s = static_cast<int>(rng.integer(1, 2));
        const auto z_in = static_cast<std::int32_t>(rng.integer(-128, 127));

        const QuantParams in_qp = QuantParams::per_tensor(0.05f, z_in);
        const QuantParams w_qp = QuantParams::per_channel(
            3, std::vector<float>(static_cast<std::size_t>(ch), 0.01f),
            std::vector<std::int32_t>(static_cast<std::size_t>(ch), 0));
        const Tensor x = testsup::random_i8(rng, Shape{1, in_h, in_w, ch}, in_qp);
        const Tensor w = testsup::random_i8(rng, Shape{1, k, k, ch}, w_qp);
        std::vector<std::int32_t> bias(static_cast<std::size_t>(ch));
        for (auto& v : bias) v = static_cast<std::int32_t>(rng.integer(-100000, 100000));
        const Tensor b = Tensor::i32(Shape{ch}, bias);

        const Tensor acc = depthwise_conv2d_i8_acc(x, w, b, s, s, pad);
        oracle::ConvDims dims;
        const auto ref = oracle::depthwise_acc_i8(codes_of(x), in_h, in_w, ch, z_in, codes_of(w),
                                                  k, k, bias, s, s, pad == Padding::Same, &dims);
        REQUIRE(acc.shape() == Shape{1, dims.h, dims.w, dims.c});
        const auto got = acc.i();
        for (std::size_t i = 0; i < ref.size(); ++i) REQUIRE(got[i] == ref[i]);
    }
}

TEST_CASE("int8 fully connected accumulators are bit-exact") {
    testsup::Rng rng(221);
    for (int t = 0; t < 50; ++t) {
        const std::int64_t batch = rng.integer(1, 2);
        const std::int64_t features = rng.integer(1, 40);
        const std::int64_t out_n = rng.integer(1, 8);
        const auto z_in = static_cast<std::int32_t>(rng.integer(-128, 127));

        const QuantParams in_qp = QuantParams::per_tensor(0.05f, z_in);
        const QuantParams w_qp = QuantParams::per_channel(
            0, std::vector<float>(static_cast<std::size_t>(out_n), 0.01f),
            std::vector<std::int32_t>(static_cast<std::size_t>(out_n), 0));
        const Tensor x = testsup::random_i8(rng, Shape{batch, features}, in_qp);
        const Tensor w = testsup::random_i8(rng, Shape{out_n, features}, w_qp);
        std::vector<std::int32_t> bias(static_cast<std::size_t>(out_n));
        for (auto& v : bias) v = static_cast<std::int32_t>(rng.integer(-100000, 100000));
        const Tensor b = Tensor::i32(Shape{out_n}, bias);

        const Tensor acc = fully_connected_i8_acc(x, w, b);
        const auto ref = oracle::fc_acc_i8(codes_of(x), batch, features, z_in, codes_of(w), out_n,
                                           bias);
        REQUIRE(acc.shape() == Shape{batch, out_n});
        const auto got = acc.i();
        for (std::size_t i = 0; i < ref.size(); ++i) REQUIRE(got[i] == ref[i]);
    }
}

TEST_CASE("requantization tracks the real-valued product within half a step") {
    testsup::Rng rng(231);
    for (int t = 0; t < 30; ++t) {
        const std::int64_t ch = rng.integer(1, 5);
        const std::int64_t n = rng.integer(1, 6);
        const QuantParams in_qp = random_act_qp(rng);
        std::vector<float> ws(static_cast<std::size_t>(ch));
        for (auto& s : ws) s = static_cast<float>(rng.uniform(0.001, 0.05));
        const QuantParams w_qp = QuantParams::per_channel(
            0, ws, std::vector<std::int32_t>(static_cast<std::size_t>(ch), 0));
        const QuantParams out_qp = random_act_qp(rng);

        std::vector<std::int32_t> accv(static_cast<std::size_t>(n * ch));
        for (auto& a : accv) a = static_cast<std::int32_t>(rng.integer(-2000000, 2000000));
        const Tensor acc = Tensor::i32(Shape{1, 1, n, ch}, accv);
        const Tensor out = requantize_acc(acc, in_qp, w_qp, out_qp, FusedActivation::None);

        for (std::size_t i = 0; i < accv.size(); ++i) {
            const auto c = static_cast<std::size_t>(static_cast<std::int64_t>(i) % ch);
            const double real = static_cast<double>(accv[i]) * in_qp.scale() * ws[c];
            const double got = dequantize_value(out.q()[i], out_qp.scale(), out_qp.zero_point());
            const double lo_r =
                dequantize_value(-128, out_qp.scale(), out_qp.zero_point());
            const double hi_r = dequantize_value(127, out_qp.scale(), out_qp.zero_point());
            if (real <= lo_r || real >= hi_r) continue; // saturated
            REQUIRE(std::abs(got - real) <= 0.51 * static_cast<double>(out_qp.scale()));
        }
    }
}

TEST_CASE("requantization respects fused activation bounds") {
    testsup::Rng rng(241);
    const QuantParams in_qp = QuantParams::per_tensor(0.04f, 3);
    const QuantParams w_qp = QuantParams::per_tensor(0.02f, 0);
    const QuantParams out_qp = QuantParams::per_tensor(0.05f, -10);
    std::vector<std::int32_t> accv(64);
    for (auto& a : accv) a = static_cast<std::int32_t>(rng.integer(-500000, 500000));
    const Tensor acc = Tensor::i32(Shape{1, 1, 64, 1}, accv);

    const Tensor relu = requantize_acc(acc, in_qp, w_qp, out_qp, FusedActivation::Relu);
    for (auto q : relu.q()) CHECK(q >= -10);

    const Tensor relu6 = requantize_acc(acc, in_qp, w_qp, out_qp, FusedActivation::Relu6);
    for (auto q : relu6.q()) {
        CHECK(q >= -10);
        CHECK(q <= 110);
    }
}

TEST_CASE("fused int8 conv equals accumulate plus requantize") {
    testsup::Rng rng(251);
    const QuantParams in_qp = QuantParams::per_tensor(0.05f, -3);
    const QuantParams w_qp = QuantParams::per_channel(0, {0.01f, 0.02f}, {0, 0});
    const QuantParams out_qp = QuantParams::per_tensor(0.07f, 5);
    const Tensor x = testsup::random_i8(rng, Shape{1, 5, 5, 3}, in_qp);
    const Tensor w = testsup::random_i8(rng, Shape{2, 3, 3, 3}, w_qp);
    const Tensor b = Tensor::i32(Shape{2}, {1000, -2000});

    const Tensor fused = conv2d_i8(x, w, b, 1, 1, Padding::Same, 1, FusedActivation::Relu, out_qp);
    const Tensor acc = conv2d_i8_acc(x, w, b, 1, 1, Padding::Same, 1);
    const Tensor staged = requantize_acc(acc, in_qp, w_qp, out_qp, FusedActivation::Relu);
    CHECK(fused == staged);
}

TEST_CASE("int8 convolution agrees with the float path on its own dequantized inputs") {
    testsup::Rng rng(261);
    for (int t = 0; t < 25; ++t) {
        const std::int64_t in_h = rng.integer(2, 6);
        const std::int64_t in_w = rng.integer(2, 6);
        const std::int64_t in_c = rng.integer(1, 4);
        const std::int64_t out_c = rng.integer(1, 4);
        const std::int64_t k = 2 * rng.integer(0, 1) + 1;

        const Tensor xf = testsup::random_f32(rng, Shape{1, in_h, in_w, in_c}, -1.0, 1.0);
        const Tensor wf = testsup::random_f32(rng, Shape{out_c, k, k, in_c}, -0.6, 0.6);
        const QuantParams in_qp = compute_quant_params(-1.0, 1.0, false);
        const QuantParams w_qp = symmetric_per_channel_params(wf, 0);
        const Tensor xq = quantize(xf, in_qp);
        const Tensor wq = quantize(wf, w_qp);

        std::vector<double> bias_real(static_cast<std::size_t>(out_c));
        std::vector<std::int32_t> bias_q(static_cast<std::size_t>(out_c));
        for (std::int64_t c = 0; c < out_c; ++c) {
            const auto ci = static_cast<std::size_t>(c);
            const double br = rng.uniform(-0.3, 0.3);
            const double sb = static_cast<double>(in_qp.scale()) * w_qp.scales[ci];
            bias_q[ci] = saturate_i32(round_half_away(br / sb));
            bias_real[ci] = static_cast<double>(bias_q[ci]) * sb;
        }

        // Reference on the dequantized codes so input rounding is excluded.
        const Tensor xdt = dequantize(xq);
        const Tensor wdt = dequantize(wq);
        const std::vector<float> xd = {xdt.f().begin(), xdt.f().end()};
        const std::vector<float> wd = {wdt.f().begin(), wdt.f().end()};
        oracle::ConvDims dims;
        auto ref = oracle::conv_f64(xd, in_h, in_w, in_c, wd, out_c, k, k,
                                    std::vector<float>(static_cast<std::size_t>(out_c), 0.0f), 1,
                                    1, true, 1, &dims);
        for (std::size_t i = 0; i < ref.size(); ++i)
            ref[i] += bias_real[i % static_cast<std::size_t>(out_c)];

        double ref_lo = 0.0, ref_hi = 0.0;
        for (double v : ref) {
            ref_lo = std::min(ref_lo, v);
            ref_hi = std::max(ref_hi, v);
        }
        const QuantParams out_qp = compute_quant_params(ref_lo - 0.1, ref_hi + 0.1, false);

        const Tensor yq = conv2d_i8(xq, wq, Tensor::i32(Shape{out_c}, bias_q), 1, 1,
                                    Padding::Same, 1, FusedActivation::None, out_qp);
        for (std::size_t i = 0; i < ref.size(); ++i) {
            const double got =
                dequantize_value(yq.q()[i], out_qp.scale(), out_qp.zero_point());
            REQUIRE(std::abs(got - ref[i]) <= 0.51 * static_cast<double>(out_qp.scale()));
        }
    }
}

TEST_CASE("int8 global average pool") {
    const QuantParams qp = QuantParams::per_tensor(1.0f, 0);
    SECTION("rounds half away and keeps qparams") {
        const Tensor x = Tensor::i8(Shape{1, 2, 1, 1}, qp, {1, 2});
        const Tensor y = global_avg_pool_i8(x);
        REQUIRE(y.shape() == Shape{1, 1, 1, 1});
        CHECK(y.q()[0] == 2); // (1+2)/2 rounds up
        CHECK(y.qparams() == qp);

        const Tensor xn = Tensor::i8(Shape{1, 2, 1, 1}, qp, {-1, -2});
        CHECK(global_avg_pool_i8(xn).q()[0] == -2);
    }
    SECTION("tracks the float mean within half a step") {
        testsup::Rng rng(271);
        const QuantParams aqp = random_act_qp(rng);
        const Tensor x = testsup::random_i8(rng, Shape{1, 7, 5, 3}, aqp);
        const Tensor y = global_avg_pool_i8(x);
        const Tensor fx = global_avg_pool_f32(dequantize(x));
        for (std::size_t c = 0; c < 3; ++c) {
            const double got = dequantize_value(y.q()[c], aqp.scale(), aqp.zero_point());
            CHECK(std::abs(got - static_cast<double>(fx.f()[c])) <=
                  0.51 * static_cast<double>(aqp.scale()));
        }
    }
}

TEST_CASE("activation look-up tables") {
    const QuantParams in_qp = QuantParams::per_tensor(0.05f, -20);
    const QuantParams out_qp = QuantParams::per_tensor(0.03f, -100);

    SECTION("identity function with matching params is the identity table") {
        const auto lut = make_activation_lut([](double x) { return x; }, in_qp, in_qp);
        for (int q = -128; q <= 127; ++q)
            CHECK(lut[static_cast<std::size_t>(q + 128)] == static_cast<std::int8_t>(q));
    }
    SECTION("hard swish table is exact for every code") {
        const auto lut = make_hard_swish_lut(in_qp, out_qp);
        REQUIRE(lut.size() == 256);
        for (int q = -128; q <= 127; ++q) {
            const double x = static_cast<double>(in_qp.scale()) * (q - in_qp.zero_point());
            const double r = x * std::clamp(x + 3.0, 0.0, 6.0) / 6.0;
            const auto want =
                clamp_i8(round_half_away(r / static_cast<double>(out_qp.scale())) +
                         out_qp.zero_point());
            CHECK(lut[static_cast<std::size_t>(q + 128)] == want);
        }
    }
    SECTION("hard sigmoid table is exact for every code") {
        const auto lut = make_hard_sigmoid_lut(in_qp, out_qp);
        for (int q = -128; q <= 127; ++q) {
            const double x = static_cast<double>(in_qp.scale()) * (q - in_qp.zero_point());
            const double r = std::clamp(x + 3.0, 0.0, 6.0) / 6.0;
            const auto want =
                clamp_i8(round_half_away(r / static_cast<double>(out_qp.scale())) +
                         out_qp.zero_point());
            CHECK(lut[static_cast<std::size_t>(q + 128)] == want);
        }
    }
    SECTION("apply maps through the table") {
        std::vector<std::int8_t> lut(256);
        for (int i = 0; i < 256; ++i) lut[static_cast<std::size_t>(i)] = clamp_i8(255 - i - 128);
        const Tensor x = Tensor::i8(Shape{3}, in_qp, {-128, 0, 127});
        const Tensor y = apply_lut_i8(x, lut, out_qp);
        CHECK(y.q()[0] == 127);
        CHECK(y.q()[1] == -1);
        CHECK(y.q()[2] == -128);
        CHECK(y.qparams() == out_qp);
        CHECK_THROWS_AS(apply_lut_i8(x, std::vector<std::int8_t>(255), out_qp), invalid_input);
    }
}

TEST_CASE("int8 elementwise add") {
    SECTION("identity scales add codes directly") {
        const QuantParams qp = QuantParams::per_tensor(0.1f, 0);
        const Tensor a = Tensor::i8(Shape{1, 1, 1, 1}, qp, {3});
        const Tensor b = Tensor::i8(Shape{1, 1, 1, 1}, qp, {4});
        CHECK(elementwise_add_i8(a, b, qp).q()[0] == 7);
    }
    SECTION("mixed scales track the float sum within one step") {
        testsup::Rng rng(281);
        for (int t = 0; t < 20; ++t) {
            const QuantParams qa = random_act_qp(rng);
            const QuantParams qb = random_act_qp(rng);
            const Tensor a = testsup::random_i8(rng, Shape{1, 2, 3, 2}, qa);
            const Tensor b = testsup::random_i8(rng, Shape{1, 2, 3, 2}, qb);
            const double lo = -2.0 * (6.0 + 6.0), hi = 2.0 * (6.0 + 6.0);
            const QuantParams qo = compute_quant_params(lo, hi, false);
            const Tensor y = elementwise_add_i8(a, b, qo);
            const Tensor fa = dequantize(a);
            const Tensor fb = dequantize(b);
            for (std::size_t i = 0; i < static_cast<std::size_t>(y.elements()); ++i) {
                const double want = static_cast<double>(fa.f()[i]) + fb.f()[i];
                const double got = dequantize_value(y.q()[i], qo.scale(), qo.zero_point());
                REQUIRE(std::abs(got - want) <= 1.01 * static_cast<double>(qo.scale()));
            }
        }
    }
}

TEST_CASE("int8 channel gate multiply") {
    SECTION("unit scales multiply codes") {
        const QuantParams qp = QuantParams::per_tensor(1.0f, 0);
        const Tensor a = Tensor::i8(Shape{1, 1, 1, 1}, qp, {5});
        const Tensor g = Tensor::i8(Shape{1, 1, 1, 1}, qp, {3});
        CHECK(elementwise_mul_channels_i8(a, g, qp).q()[0] == 15);
    }
    SECTION("tracks the float product within half a step") {
        testsup::Rng rng(291);
        for (int t = 0; t < 20; ++t) {
            const QuantParams qa = random_act_qp(rng);
            const QuantParams qg = compute_quant_params(0.0, 1.0, false);
            const Tensor a = testsup::random_i8(rng, Shape{1, 2, 2, 3}, qa);
            const Tensor g = testsup::random_i8(rng, Shape{1, 1, 1, 3}, qg);
            const QuantParams qo = compute_quant_params(-8.0, 8.0, false);
            const Tensor y = elementwise_mul_channels_i8(a, g, qo);
            const Tensor fa = dequantize(a);
            const Tensor fg = dequantize(g);
            for (std::size_t i = 0; i < static_cast<std::size_t>(y.elements()); ++i) {
                const double want =
                    static_cast<double>(fa.f()[i]) * fg.f()[i % 3];
                const double got = dequantize_value(y.q()[i], qo.scale(), qo.zero_point());
                REQUIRE(std::abs(got - want) <= 0.51 * static_cast<double>(qo.scale()));
            }
        }
    }
}
