#pragma once

#include <random>
#include <string>
#include <vector>

#include "ttrk/graph.hpp"

#include <json.hpp>

namespace ttrk {

/// One inverted-residual stage of the backbone.
struct StageSpec {
    int kernel = 3;
    int expand_ch = 16;
    int out_ch = 16;
    bool se = false;
    bool hard_swish = false; // relu otherwise
    int stride = 1;
};

struct TinyTrackerConfig {
    int input_size = 112;
    int input_channels = 3; // grey + 2 crop-grid channels
    double width_multiplier = 1.0;
    int stem_channels = 16;
    std::vector<StageSpec> stages;
    int head_channels = 288;
    int fc_hidden = 128;
    int output_dim = 2;

    void validate() const {
        require(input_size >= 8 && input_size <= 1024, "input_size out of range");
        require(input_channels >= 1 && input_channels <= 16, "input_channels out of range");
        require(width_multiplier > 0.0 && width_multiplier <= 8.0,
                "width_multiplier out of range");
        require(stem_channels >= 1, "stem_channels must be positive");
        require(!stages.empty(), "at least one stage required");
        for (const StageSpec& s : stages) {
            require(s.kernel >= 1 && s.kernel % 2 == 1 && s.kernel <= 7,
                    "stage kernel must be odd and <= 7");
            require(s.expand_ch >= 1 && s.out_ch >= 1, "stage channels must be positive");
            require(s.stride == 1 || s.stride == 2, "stage stride must be 1 or 2");
        }
        require(head_channels >= 1, "head_channels must be positive");
        require(fc_hidden >= 1, "fc_hidden must be positive");
        require(output_dim == 2, "output_dim must be 2 (gaze x, y)");
    }
};

/// Round to a multiple of 8, half away from zero, clamped to at least 8.
inline int round_to_8(double ch) {
    const std::int64_t q = round_half_away(ch / 8.0) * 8;
    return static_cast<int>(std::max<std::int64_t>(8, q));
}

inline int scale_channels(int ch, double alpha) { return round_to_8(ch * alpha); }

inline TinyTrackerConfig default_config() {
    TinyTrackerConfig c;
    c.stages = {
        {3, 16, 16, true, false, 2},  //
        {3, 72, 24, false, false, 2}, //
        {3, 88, 24, false, false, 1}, //
        {5, 96, 40, true, true, 2},   //
        {5, 240, 40, true, true, 1},  //
        {5, 240, 40, true, true, 1},  //
        {5, 120, 48, true, true, 1},  //
        {5, 144, 48, true, true, 1},  //
        {5, 288, 96, true, true, 2},  //
        {5, 288, 96, true, true, 1},  //
    };
    return c;
}

inline TinyTrackerConfig config_from_json(const nlohmann::json& j) {
    require(j.is_object(), "model config must be a JSON object");
    TinyTrackerConfig c = default_config();
    if (j.contains("version"))
        require(j.at("version").get<int>() == 1, "unsupported model config version");
    if (j.contains("input_size")) c.input_size = j.at("input_size").get<int>();
    if (j.contains("input_channels")) c.input_channels = j.at("input_channels").get<int>();
    if (j.contains("width_multiplier"))
        c.width_multiplier = j.at("width_multiplier").get<double>();
    if (j.contains("stem_channels")) c.stem_channels = j.at("stem_channels").get<int>();
    if (j.contains("head_channels")) c.head_channels = j.at("head_channels").get<int>();
    if (j.contains("fc_hidden")) c.fc_hidden = j.at("fc_hidden").get<int>();
    if (j.contains("output_dim")) c.output_dim = j.at("output_dim").get<int>();
    if (j.contains("stages")) {
        c.stages.clear();
        for (const auto& js : j.at("stages")) {
            StageSpec s;
            s.kernel = js.at("kernel").get<int>();
            s.expand_ch = js.at("expand").get<int>();
            s.out_ch = js.at("out").get<int>();
            s.se = js.value("se", false);
            const std::string act = js.value("activation", "relu");
            if (act == "relu")
                s.hard_swish = false;
            else if (act == "hard_swish")
                s.hard_swish = true;
            else
                throw invalid_input("stage activation must be 'relu' or 'hard_swish', got '" +
                                    act + "'");
            s.stride = js.value("stride", 1);
            c.stages.push_back(s);
        }
    }
    c.validate();
    return c;
}

namespace detail {

/// Deterministic parameter stream. mt19937 output is fully specified, and the
/// mapping to floats below avoids distribution classes whose algorithms are
/// implementation defined, so the same seed gives the same weights everywhere.
class ParamRng {
public:
    explicit ParamRng(std::uint32_t seed) : gen_(seed) {}

    float uniform01() {
        return static_cast<float>((gen_() >> 8) * (1.0 / 16777216.0)); // 24-bit mantissa
    }

    float he_uniform(std::int64_t fan_in) {
        const float limit = std::sqrt(6.0f / static_cast<float>(fan_in));
        return (2.0f * uniform01() - 1.0f) * limit;
    }

private:
    std::mt19937 gen_;
};

struct ModelBuilder {
    Graph& g;
    ParamRng rng;

    int add_activation(const std::string& name) {
        return g.add_tensor({name, TensorRole::Activation, DType::F32, {}, {}, {}});
    }

    int add_weight(const std::string& name, Shape shape, std::int64_t fan_in) {
        std::vector<float> data(static_cast<std::size_t>(shape.elements()));
        for (float& v : data) v = rng.he_uniform(fan_in);
        Tensor t = Tensor::f32(shape, std::move(data));
        return g.add_tensor({name, TensorRole::Weight, DType::F32, shape, {}, std::move(t)});
    }

    int add_bias(const std::string& name, std::int64_t n) {
        Shape shape{n};
        Tensor t = Tensor::f32(shape);
        return g.add_tensor({name, TensorRole::Bias, DType::F32, shape, {}, std::move(t)});
    }

    int add_op(const std::string& name, OpKind kind, NodeAttrs attrs, std::vector<int> inputs,
               const std::string& out_name) {
        const int out = add_activation(out_name);
        OpNode n;
        n.name = name;
        n.kind = kind;
        n.attrs = std::move(attrs);
        n.inputs = std::move(inputs);
        n.output = out;
        g.add_node(std::move(n));
        return out;
    }

    // Conv + optional separate hard-swish. Returns the activation tensor id.
    int conv(const std::string& name, int in_id, std::int64_t in_c, std::int64_t out_c, int k,
             int stride, bool hswish, FusedActivation fused) {
        const int w = add_weight(name + "/weight", Shape{out_c, k, k, in_c},
                                 static_cast<std::int64_t>(k) * k * in_c);
        const int b = add_bias(name + "/bias", out_c);
        NodeAttrs a;
        a.stride_h = a.stride_w = stride;
        a.act = hswish ? FusedActivation::None : fused;
        int out = add_op(name, OpKind::Conv2d, a, {in_id, w, b}, name);
        if (hswish)
            out = add_op(name + "/hswish", OpKind::HardSwish, {}, {out}, name + "/hswish");
        return out;
    }

    int depthwise(const std::string& name, int in_id, std::int64_t ch, int k, int stride,
                  bool hswish, FusedActivation fused) {
        const int w = add_weight(name + "/weight", Shape{1, k, k, ch},
                                 static_cast<std::int64_t>(k) * k);
        const int b = add_bias(name + "/bias", ch);
        NodeAttrs a;
        a.stride_h = a.stride_w = stride;
        a.act = hswish ? FusedActivation::None : fused;
        int out = add_op(name, OpKind::DepthwiseConv2d, a, {in_id, w, b}, name);
        if (hswish)
            out = add_op(name + "/hswish", OpKind::HardSwish, {}, {out}, name + "/hswish");
        return out;
    }

    int squeeze_excite(const std::string& prefix, int in_id, std::int64_t ch) {
        const std::int64_t se_c = round_to_8(static_cast<double>(ch) / 4.0);
        int pooled = add_op(prefix + "/pool", OpKind::GlobalAvgPool, {}, {in_id},
                            prefix + "/pool");
        int reduced = conv(prefix + "/reduce", pooled, ch, se_c, 1, 1, false,
                           FusedActivation::Relu);
        int expanded = conv(prefix + "/expand", reduced, se_c, ch, 1, 1, false,
                            FusedActivation::None);
        int gate = add_op(prefix + "/gate", OpKind::HardSigmoid, {}, {expanded},
                          prefix + "/gate");
        return add_op(prefix + "/scale", OpKind::MulChannels, {}, {in_id, gate},
                      prefix + "/scale");
    }

    int fully_connected(const std::string& name, int in_id, std::int64_t in_n, std::int64_t out_n,
                        FusedActivation act, const std::string& out_name) {
        const int w = add_weight(name + "/weight", Shape{out_n, in_n}, in_n);
        const int b = add_bias(name + "/bias", out_n);
        NodeAttrs a;
        a.act = act;
        return add_op(name, OpKind::FullyConnected, a, {in_id, w, b}, out_name);
    }
};

} // namespace detail

inline constexpr std::uint32_t kParamSeed = 0x7474726b; // "ttrk"

/// Construct the float gaze network from a config. Weights are seeded
/// deterministically; the same config always yields the same graph bytes.
inline Graph build_tinytracker(const TinyTrackerConfig& cfg) {
    cfg.validate();
    Graph g;
    g.mode = GraphMode::Float;
    detail::ModelBuilder mb{g, detail::ParamRng(kParamSeed)};

    const double alpha = cfg.width_multiplier;
    const int input = g.add_tensor({"input", TensorRole::Activation, DType::F32,
                                    Shape{1, cfg.input_size, cfg.input_size, cfg.input_channels},
                                    {},
                                    {}});
    g.inputs = {input};

    std::int64_t ch = scale_channels(cfg.stem_channels, alpha);
    int cur = mb.conv("stem", input, cfg.input_channels, ch, 3, 2, true, FusedActivation::None);

    for (std::size_t i = 0; i < cfg.stages.size(); ++i) {
        const StageSpec& st = cfg.stages[i];
        const std::string name = "bneck" + std::to_string(i);
        const std::int64_t exp_c = scale_channels(st.expand_ch, alpha);
        const std::int64_t out_c = scale_channels(st.out_ch, alpha);
        const int block_in = cur;
        const std::int64_t in_c = ch;

        int x = cur;
        if (exp_c != in_c)
            x = mb.conv(name + "/expand", x, in_c, exp_c, 1, 1, st.hard_swish,
                        FusedActivation::Relu);
        x = mb.depthwise(name + "/dw", x, exp_c, st.kernel, st.stride, st.hard_swish,
                         FusedActivation::Relu);
        if (st.se) x = mb.squeeze_excite(name + "/se", x, exp_c);
        x = mb.conv(name + "/project", x, exp_c, out_c, 1, 1, false, FusedActivation::None);
        if (st.stride == 1 && out_c == in_c)
            x = mb.add_op(name + "/add", OpKind::Add, {}, {x, block_in}, name + "/add");
        cur = x;
        ch = out_c;
    }

    const std::int64_t head_c = scale_channels(cfg.head_channels, alpha);
    cur = mb.conv("head_conv", cur, ch, head_c, 1, 1, true, FusedActivation::None);
    cur = mb.add_op("pool", OpKind::GlobalAvgPool, {}, {cur}, "pool");
    cur = mb.fully_connected("fc1", cur, head_c, cfg.fc_hidden, FusedActivation::Relu, "fc1");
    cur = mb.fully_connected("fc2", cur, cfg.fc_hidden, cfg.output_dim, FusedActivation::None,
                             "gaze");
    g.outputs = {cur};

    g.infer_shapes();
    g.validate();
    return g;
}

} // namespace ttrk
