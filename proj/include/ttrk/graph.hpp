#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ttrk/ops.hpp"
#include "ttrk/ops_int8.hpp"

namespace ttrk {

enum class OpKind : std::uint32_t {
    Conv2d = 0,
    DepthwiseConv2d = 1,
    FullyConnected = 2,
    GlobalAvgPool = 3,
    HardSwish = 4,
    HardSigmoid = 5,
    Add = 6,
    MulChannels = 7,
    Dequantize = 8,
};

inline const char* op_kind_name(OpKind k) {
    switch (k) {
        case OpKind::Conv2d: return "conv2d";
        case OpKind::DepthwiseConv2d: return "depthwise_conv2d";
        case OpKind::FullyConnected: return "fully_connected";
        case OpKind::GlobalAvgPool: return "global_avg_pool";
        case OpKind::HardSwish: return "hard_swish";
        case OpKind::HardSigmoid: return "hard_sigmoid";
        case OpKind::Add: return "add";
        case OpKind::MulChannels: return "mul_channels";
        case OpKind::Dequantize: return "dequantize";
    }
    return "unknown";
}

enum class TensorRole : std::uint32_t { Activation = 0, Weight = 1, Bias = 2 };

enum class GraphMode : std::uint32_t { Float = 0, Quantized = 1 };

/// One tensor slot in the graph. Constants (weights, biases) carry a payload;
/// activations only carry metadata, filled in by shape inference and, for
/// quantized graphs, by calibration.
struct TensorEntry {
    std::string name;
    TensorRole role = TensorRole::Activation;
    DType dtype = DType::F32;
    Shape shape{};
    std::optional<QuantParams> qparams;
    std::optional<Tensor> payload;
};

struct NodeAttrs {
    int stride_h = 1;
    int stride_w = 1;
    Padding padding = Padding::Same;
    int groups = 1;
    FusedActivation act = FusedActivation::None;
    std::vector<std::int8_t> lut; // 256 entries for quantized hard_swish / hard_sigmoid
};

struct OpNode {
    int id = -1;
    std::string name;
    OpKind kind = OpKind::Conv2d;
    NodeAttrs attrs;
    std::vector<int> inputs; // tensor ids
    int output = -1;         // tensor id
};

class Graph {
public:
    GraphMode mode = GraphMode::Float;
    std::vector<TensorEntry> tensors;
    std::vector<OpNode> nodes;
    std::vector<int> inputs;  // tensor ids
    std::vector<int> outputs; // tensor ids

    int add_tensor(TensorEntry entry) {
        tensors.push_back(std::move(entry));
        return static_cast<int>(tensors.size()) - 1;
    }

    int add_node(OpNode node) {
        node.id = static_cast<int>(nodes.size());
        nodes.push_back(std::move(node));
        return nodes.back().id;
    }

    int find_tensor(const std::string& name) const {
        for (std::size_t i = 0; i < tensors.size(); ++i)
            if (tensors[i].name == name) return static_cast<int>(i);
        return -1;
    }

    const TensorEntry& tensor(int id) const { return tensors.at(static_cast<std::size_t>(id)); }
    TensorEntry& tensor(int id) { return tensors.at(static_cast<std::size_t>(id)); }

    void validate() const;
    void infer_shapes();
};

namespace detail {

[[noreturn]] inline void graph_fail(const std::string& where, const std::string& msg) {
    throw invalid_input("graph: " + where + ": " + msg);
}

inline void check_tensor_id(const Graph& g, int id, const std::string& where) {
    if (id < 0 || id >= static_cast<int>(g.tensors.size()))
        graph_fail(where, "tensor id " + std::to_string(id) + " out of range");
}

} // namespace detail

inline void Graph::validate() const {
    std::map<std::string, int> names;
    for (std::size_t i = 0; i < tensors.size(); ++i) {
        const TensorEntry& t = tensors[i];
        const std::string where = "tensor '" + t.name + "'";
        if (t.name.empty()) detail::graph_fail("tensor " + std::to_string(i), "empty name");
        if (!names.emplace(t.name, static_cast<int>(i)).second)
            detail::graph_fail(where, "duplicate tensor name");
        if (t.dtype == DType::I32 && t.qparams)
            detail::graph_fail(where, "int32 tensors must not carry quantization parameters");
        if (t.dtype == DType::I8 && t.payload && !t.qparams)
            detail::graph_fail(where, "int8 constant without quantization parameters");
        if (t.qparams) {
            t.qparams->validate();
            if (t.shape.rank() > 0) t.qparams->validate_for(t.shape);
        }
        if (t.payload) {
            if (t.role == TensorRole::Activation)
                detail::graph_fail(where, "activation tensors must not carry payload data");
            if (t.payload->dtype() != t.dtype)
                detail::graph_fail(where, "payload dtype does not match entry dtype");
            if (t.shape.rank() > 0 && !(t.payload->shape() == t.shape))
                detail::graph_fail(where, "payload shape does not match entry shape");
        } else if (t.role != TensorRole::Activation) {
            detail::graph_fail(where, "constant tensor without payload data");
        }
    }

    std::vector<int> writer(tensors.size(), -1);
    for (const OpNode& n : nodes) {
        const std::string where = "node '" + n.name + "'";
        if (n.name.empty()) detail::graph_fail("node " + std::to_string(n.id), "empty name");
        detail::check_tensor_id(*this, n.output, where);
        if (writer[static_cast<std::size_t>(n.output)] != -1)
            detail::graph_fail(where, "output tensor written twice");
        writer[static_cast<std::size_t>(n.output)] = n.id;
        if (tensor(n.output).role != TensorRole::Activation)
            detail::graph_fail(where, "node output must be an activation tensor");

        std::size_t expect = 0;
        switch (n.kind) {
            case OpKind::Conv2d:
            case OpKind::DepthwiseConv2d:
            case OpKind::FullyConnected: expect = 3; break;
            case OpKind::Add:
            case OpKind::MulChannels: expect = 2; break;
            default: expect = 1; break;
        }
        if (n.inputs.size() != expect)
            detail::graph_fail(where, "expected " + std::to_string(expect) + " inputs, got " +
                                          std::to_string(n.inputs.size()));
        for (int id : n.inputs) detail::check_tensor_id(*this, id, where);

        if (expect == 3) {
            if (tensor(n.inputs[0]).role != TensorRole::Activation)
                detail::graph_fail(where, "first input must be an activation");
            if (tensor(n.inputs[1]).role != TensorRole::Weight)
                detail::graph_fail(where, "second input must be a weight tensor");
            if (tensor(n.inputs[2]).role != TensorRole::Bias)
                detail::graph_fail(where, "third input must be a bias tensor");
        } else {
            for (int id : n.inputs)
                if (tensor(id).role != TensorRole::Activation)
                    detail::graph_fail(where, "inputs must be activation tensors");
        }
        if (n.attrs.stride_h < 1 || n.attrs.stride_w < 1)
            detail::graph_fail(where, "strides must be >= 1");
        if (n.attrs.groups < 1) detail::graph_fail(where, "groups must be >= 1");
        if (mode == GraphMode::Quantized &&
            (n.kind == OpKind::HardSwish || n.kind == OpKind::HardSigmoid) &&
            n.attrs.lut.size() != 256)
            detail::graph_fail(where, "quantized activation node needs a 256-entry lut");
    }

    for (int id : inputs) {
        detail::check_tensor_id(*this, id, "graph inputs");
        if (tensor(id).role != TensorRole::Activation)
            detail::graph_fail("graph inputs", "input tensor must be an activation");
        if (writer[static_cast<std::size_t>(id)] != -1)
            detail::graph_fail("graph inputs", "input tensor '" + tensor(id).name +
                                                   "' is written by a node");
    }
    for (int id : outputs) detail::check_tensor_id(*this, id, "graph outputs");
    if (inputs.empty()) detail::graph_fail("graph", "no input tensors declared");
    if (outputs.empty()) detail::graph_fail("graph", "no output tensors declared");

    // Activations must be produced before they are consumed.
    std::vector<bool> ready(tensors.size(), false);
    for (int id : inputs) ready[static_cast<std::size_t>(id)] = true;
    for (std::size_t i = 0; i < tensors.size(); ++i)
        if (tensors[i].role != TensorRole::Activation) ready[i] = true;
    for (const OpNode& n : nodes) {
        for (int id : n.inputs)
            if (!ready[static_cast<std::size_t>(id)])
                detail::graph_fail("node '" + n.name + "'",
                                   "input '" + tensor(id).name + "' not produced yet");
        ready[static_cast<std::size_t>(n.output)] = true;
    }
    for (int id : outputs)
        if (!ready[static_cast<std::size_t>(id)])
            detail::graph_fail("graph outputs", "output '" + tensor(id).name + "' never produced");
}

inline void Graph::infer_shapes() {
    for (const OpNode& n : nodes) {
        const std::string where = "node '" + n.name + "'";
        const Shape& in = tensor(n.inputs[0]).shape;
        Shape out;
        switch (n.kind) {
            case OpKind::Conv2d: {
                const Shape& w = tensor(n.inputs[1]).shape;
                if (in.rank() != 4 || w.rank() != 4)
                    detail::graph_fail(where, "conv expects rank-4 input and weights");
                const ConvGeometry g = conv_geometry(in[1], in[2], w[1], w[2], n.attrs.stride_h,
                                                     n.attrs.stride_w, n.attrs.padding);
                out = Shape{in[0], g.out_h, g.out_w, w[0]};
                break;
            }
            case OpKind::DepthwiseConv2d: {
                const Shape& w = tensor(n.inputs[1]).shape;
                if (in.rank() != 4 || w.rank() != 4)
                    detail::graph_fail(where, "depthwise conv expects rank-4 input and weights");
                const ConvGeometry g = conv_geometry(in[1], in[2], w[1], w[2], n.attrs.stride_h,
                                                     n.attrs.stride_w, n.attrs.padding);
                out = Shape{in[0], g.out_h, g.out_w, in[3]};
                break;
            }
            case OpKind::FullyConnected: {
                const Shape& w = tensor(n.inputs[1]).shape;
                if (w.rank() != 2) detail::graph_fail(where, "fc weights must be rank 2");
                if (in.elements() % in[0] != 0 || in.elements() / in[0] != w[1])
                    detail::graph_fail(where, "fc feature count mismatch");
                out = Shape{in[0], w[0]};
                break;
            }
            case OpKind::GlobalAvgPool:
                if (in.rank() != 4) detail::graph_fail(where, "pool expects rank-4 input");
                out = Shape{in[0], 1, 1, in[3]};
                break;
            case OpKind::Add: {
                const Shape& b = tensor(n.inputs[1]).shape;
                if (!(in == b)) detail::graph_fail(where, "add operand shapes differ");
                out = in;
                break;
            }
            case OpKind::MulChannels: {
                const Shape& s = tensor(n.inputs[1]).shape;
                if (in.rank() != 4 || !(s == Shape{1, 1, 1, in[3]}))
                    detail::graph_fail(where, "channel scale must be shaped (1,1,1,C)");
                out = in;
                break;
            }
            case OpKind::HardSwish:
            case OpKind::HardSigmoid:
            case OpKind::Dequantize: out = in; break;
        }
        TensorEntry& dst = tensor(n.output);
        if (dst.shape.rank() > 0 && !(dst.shape == out))
            detail::graph_fail(where, "declared output shape " + dst.shape.str() +
                                          " does not match inferred " + out.str());
        dst.shape = out;
    }
}

struct ExecStats {
    std::int64_t nodes_executed = 0;
    std::int64_t interior_float_ops = 0; // float-kernel dispatches other than dequantize
};

namespace detail {

inline Tensor constant_value(const Graph& g, int id) {
    const TensorEntry& t = g.tensor(id);
    if (!t.payload) graph_fail("tensor '" + t.name + "'", "constant has no payload");
    return *t.payload;
}

inline QuantParams out_qp(const Graph& g, const OpNode& n) {
    const TensorEntry& t = g.tensor(n.output);
    if (!t.qparams)
        graph_fail("node '" + n.name + "'", "quantized output lacks quantization parameters");
    return *t.qparams;
}

inline Tensor run_node_float(const OpNode& n, const std::vector<Tensor>& in) {
    switch (n.kind) {
        case OpKind::Conv2d:
            return conv2d_f32(in[0], in[1], in[2], n.attrs.stride_h, n.attrs.stride_w,
                              n.attrs.padding, n.attrs.groups, n.attrs.act);
        case OpKind::DepthwiseConv2d:
            return depthwise_conv2d_f32(in[0], in[1], in[2], n.attrs.stride_h, n.attrs.stride_w,
                                        n.attrs.padding, n.attrs.act);
        case OpKind::FullyConnected: return fully_connected_f32(in[0], in[1], in[2], n.attrs.act);
        case OpKind::GlobalAvgPool: return global_avg_pool_f32(in[0]);
        case OpKind::HardSwish: return hard_swish_f32(in[0]);
        case OpKind::HardSigmoid: return hard_sigmoid_f32(in[0]);
        case OpKind::Add: return elementwise_add_f32(in[0], in[1]);
        case OpKind::MulChannels: return elementwise_mul_channels_f32(in[0], in[1]);
        case OpKind::Dequantize: return in[0]; // float graphs carry float values already
    }
    graph_fail("node '" + n.name + "'", "unknown op kind");
}

inline Tensor run_node_i8(const Graph& g, const OpNode& n, const std::vector<Tensor>& in) {
    switch (n.kind) {
        case OpKind::Conv2d:
            return conv2d_i8(in[0], in[1], in[2], n.attrs.stride_h, n.attrs.stride_w,
                             n.attrs.padding, n.attrs.groups, n.attrs.act, out_qp(g, n));
        case OpKind::DepthwiseConv2d:
            return depthwise_conv2d_i8(in[0], in[1], in[2], n.attrs.stride_h, n.attrs.stride_w,
                                       n.attrs.padding, n.attrs.act, out_qp(g, n));
        case OpKind::FullyConnected:
            return fully_connected_i8(in[0], in[1], in[2], n.attrs.act, out_qp(g, n));
        case OpKind::GlobalAvgPool: return global_avg_pool_i8(in[0]);
        case OpKind::HardSwish:
        case OpKind::HardSigmoid: return apply_lut_i8(in[0], n.attrs.lut, out_qp(g, n));
        case OpKind::Add: return elementwise_add_i8(in[0], in[1], out_qp(g, n));
        case OpKind::MulChannels: return elementwise_mul_channels_i8(in[0], in[1], out_qp(g, n));
        case OpKind::Dequantize: return dequantize(in[0]);
    }
    graph_fail("node '" + n.name + "'", "unknown op kind");
}

} // namespace detail

/// Run the graph and return a value for every tensor slot (constants are
/// copied through). Float inputs to a quantized graph are quantized with the
/// graph's input parameters first.
inline std::vector<std::optional<Tensor>> execute_trace(const Graph& g,
                                                        const std::vector<Tensor>& inputs,
                                                        ExecStats* stats = nullptr) {
    require(inputs.size() == g.inputs.size(),
            "expected " + std::to_string(g.inputs.size()) + " graph inputs, got " +
                std::to_string(inputs.size()));
    std::vector<std::optional<Tensor>> values(g.tensors.size());
    for (std::size_t i = 0; i < g.tensors.size(); ++i)
        if (g.tensors[i].payload) values[i] = g.tensors[i].payload;

    for (std::size_t i = 0; i < inputs.size(); ++i) {
        const int id = g.inputs[i];
        const TensorEntry& slot = g.tensor(id);
        Tensor v = inputs[i];
        require(v.shape() == slot.shape,
                "input '" + slot.name + "' expects shape " + slot.shape.str() + ", got " +
                    v.shape().str());
        if (g.mode == GraphMode::Quantized && v.dtype() == DType::F32) {
            if (!slot.qparams)
                detail::graph_fail("input '" + slot.name + "'",
                                   "no quantization parameters to quantize float input with");
            v = quantize(v, *slot.qparams);
        }
        require(v.dtype() == slot.dtype, "input '" + slot.name + "' has wrong dtype");
        values[static_cast<std::size_t>(id)] = std::move(v);
    }

    for (const OpNode& n : g.nodes) {
        std::vector<Tensor> in;
        in.reserve(n.inputs.size());
        for (int id : n.inputs) {
            const auto& v = values[static_cast<std::size_t>(id)];
            if (!v)
                detail::graph_fail("node '" + n.name + "'",
                                   "input '" + g.tensor(id).name + "' has no value");
            in.push_back(*v);
        }
        const bool int_path = g.mode == GraphMode::Quantized && in[0].dtype() == DType::I8;
        Tensor out = int_path ? detail::run_node_i8(g, n, in) : detail::run_node_float(n, in);
        if (stats) {
            ++stats->nodes_executed;
            if (!int_path && n.kind != OpKind::Dequantize) ++stats->interior_float_ops;
        }
        values[static_cast<std::size_t>(n.output)] = std::move(out);
    }
    return values;
}

inline std::vector<Tensor> execute(const Graph& g, const std::vector<Tensor>& inputs,
                                   ExecStats* stats = nullptr) {
    auto values = execute_trace(g, inputs, stats);
    std::vector<Tensor> out;
    out.reserve(g.outputs.size());
    for (int id : g.outputs) {
        auto& v = values[static_cast<std::size_t>(id)];
        if (!v) detail::graph_fail("graph outputs", "output '" + g.tensor(id).name + "' unset");
        out.push_back(std::move(*v));
    }
    return out;
}

} // namespace ttrk
