#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ttrk/graph.hpp"

namespace ttrk {

/// Observed value range of one activation tensor over the calibration set.
struct TensorRange {
    double min = std::numeric_limits<double>::infinity();
    double max = -std::numeric_limits<double>::infinity();
    std::int64_t samples = 0;

    void absorb(const Tensor& t) {
        for (float v : t.f()) {
            require(std::isfinite(v), "calibration saw a non-finite activation value");
            min = std::min(min, static_cast<double>(v));
            max = std::max(max, static_cast<double>(v));
        }
        samples += t.elements();
    }
};

struct CalibrationStats {
    std::vector<std::optional<TensorRange>> ranges; // indexed by tensor id

    const TensorRange& range_for(const Graph& g, int id) const {
        const auto& r = ranges.at(static_cast<std::size_t>(id));
        if (!r)
            throw invalid_input("no calibration range for tensor '" + g.tensor(id).name + "'");
        return *r;
    }
};

/// Trace the float graph over every calibration batch and record min/max of
/// each activation (graph inputs included, values taken post-activation).
inline CalibrationStats calibrate(const Graph& float_graph,
                                  const std::vector<std::vector<Tensor>>& batches) {
    require(float_graph.mode == GraphMode::Float, "calibration runs on the float graph");
    require(!batches.empty(), "calibration needs at least one input batch");
    CalibrationStats stats;
    stats.ranges.resize(float_graph.tensors.size());
    for (const auto& batch : batches) {
        auto values = execute_trace(float_graph, batch);
        for (std::size_t id = 0; id < values.size(); ++id) {
            if (float_graph.tensors[id].role != TensorRole::Activation) continue;
            if (!values[id]) continue;
            if (!stats.ranges[id]) stats.ranges[id].emplace();
            stats.ranges[id]->absorb(*values[id]);
        }
    }
    return stats;
}

namespace detail {

inline int weight_channel_axis(OpKind kind, const Shape& weight_shape) {
    switch (kind) {
        case OpKind::Conv2d: return 0;
        case OpKind::DepthwiseConv2d: return static_cast<int>(weight_shape.rank()) - 1;
        case OpKind::FullyConnected: return 0;
        default: break;
    }
    throw invalid_input("op has no weight tensor");
}

inline Tensor quantize_bias(const Tensor& bias, double s_in, const QuantParams& w_qp) {
    auto b = bias.f();
    std::vector<std::int32_t> out(b.size());
    for (std::size_t c = 0; c < b.size(); ++c) {
        const double s_w = w_qp.per_channel_scheme() ? w_qp.scales[c] : w_qp.scale();
        out[c] = saturate_i32(round_half_away(static_cast<double>(b[c]) / (s_in * s_w)));
    }
    return Tensor::i32(bias.shape(), std::move(out));
}

} // namespace detail

/// Build the int8 graph from the float graph plus calibration statistics.
/// Deterministic: the same float graph and stats always yield the same result.
///
/// Activations get asymmetric per-tensor parameters from their observed
/// range, except average-pool outputs, which reuse the pool input's
/// parameters. Weights get symmetric per-channel parameters along the output
/// channel axis; biases become int32 at scale s_in * s_w,c and carry no
/// parameters of their own. A dequantize node is appended after each graph
/// output so callers always receive float values.
inline Graph quantize_graph(const Graph& float_graph, const CalibrationStats& stats) {
    require(float_graph.mode == GraphMode::Float, "quantize_graph expects a float graph");
    float_graph.validate();
    require(stats.ranges.size() == float_graph.tensors.size(),
            "calibration stats do not match the graph");

    Graph q;
    q.mode = GraphMode::Quantized;
    q.inputs = float_graph.inputs;
    q.nodes = float_graph.nodes;
    q.tensors.reserve(float_graph.tensors.size());
    for (std::size_t id = 0; id < float_graph.tensors.size(); ++id) {
        const TensorEntry& t = float_graph.tensors[id];
        TensorEntry e;
        e.name = t.name;
        e.role = t.role;
        e.shape = t.shape;
        e.dtype = t.dtype;
        if (t.role == TensorRole::Activation) {
            e.dtype = DType::I8;
            const TensorRange& r = stats.range_for(float_graph, static_cast<int>(id));
            e.qparams = compute_quant_params(r.min, r.max, /*symmetric=*/false);
        }
        q.tensors.push_back(std::move(e));
    }

    // Pool outputs reuse their input's parameters. Node order is topological,
    // so chained pools resolve front to back.
    for (const OpNode& n : q.nodes)
        if (n.kind == OpKind::GlobalAvgPool)
            q.tensor(n.output).qparams = q.tensor(n.inputs[0]).qparams;

    std::vector<int> constant_consumer(float_graph.tensors.size(), -1);
    for (OpNode& n : q.nodes) {
        switch (n.kind) {
            case OpKind::Conv2d:
            case OpKind::DepthwiseConv2d:
            case OpKind::FullyConnected: {
                const int wid = n.inputs[1], bid = n.inputs[2];
                for (int cid : {wid, bid}) {
                    require(constant_consumer[static_cast<std::size_t>(cid)] == -1,
                            "constant '" + q.tensor(cid).name +
                                "' feeds multiple nodes; cannot pick one bias scale");
                    constant_consumer[static_cast<std::size_t>(cid)] = n.id;
                }
                const TensorEntry& wf = float_graph.tensor(wid);
                require(wf.payload && wf.payload->dtype() == DType::F32,
                        "weight '" + wf.name + "' must be a float constant");
                const int axis = detail::weight_channel_axis(n.kind, wf.shape);
                const QuantParams w_qp = symmetric_per_channel_params(*wf.payload, axis);
                TensorEntry& wq = q.tensor(wid);
                wq.dtype = DType::I8;
                wq.qparams = w_qp;
                wq.payload = quantize(*wf.payload, w_qp);

                const double s_in = q.tensor(n.inputs[0]).qparams->scale();
                const TensorEntry& bf = float_graph.tensor(bid);
                require(bf.payload && bf.payload->dtype() == DType::F32,
                        "bias '" + bf.name + "' must be a float constant");
                TensorEntry& bq = q.tensor(bid);
                bq.dtype = DType::I32;
                bq.qparams.reset();
                bq.payload = detail::quantize_bias(*bf.payload, s_in, w_qp);
                break;
            }
            case OpKind::HardSwish:
                n.attrs.lut = make_hard_swish_lut(*q.tensor(n.inputs[0]).qparams,
                                                  *q.tensor(n.output).qparams);
                break;
            case OpKind::HardSigmoid:
                n.attrs.lut = make_hard_sigmoid_lut(*q.tensor(n.inputs[0]).qparams,
                                                    *q.tensor(n.output).qparams);
                break;
            default: break;
        }
    }

    q.outputs.clear();
    for (int id : float_graph.outputs) {
        const std::string name = q.tensor(id).name + "/dequant";
        const int out =
            q.add_tensor({name, TensorRole::Activation, DType::F32, q.tensor(id).shape, {}, {}});
        OpNode n;
        n.name = name;
        n.kind = OpKind::Dequantize;
        n.inputs = {id};
        n.output = out;
        q.add_node(std::move(n));
        q.outputs.push_back(out);
    }

    q.validate();
    return q;
}

/// Per-layer int8-vs-float comparison on one shared input.
struct QuantLayerError {
    int node_id = -1;
    std::string name;
    double max_abs_err = 0.0;
    double mean_abs_err = 0.0;
    double sqnr_db = 0.0; // capped to [-200, 200]
};

inline std::vector<QuantLayerError> quantization_error_report(const Graph& float_graph,
                                                              const Graph& quant_graph,
                                                              const std::vector<Tensor>& inputs) {
    auto fv = execute_trace(float_graph, inputs);
    auto qv = execute_trace(quant_graph, inputs);

    std::map<std::string, const OpNode*> by_name;
    for (const OpNode& n : quant_graph.nodes)
        if (n.kind != OpKind::Dequantize) by_name[n.name] = &n;

    std::vector<QuantLayerError> report;
    for (const OpNode& fn : float_graph.nodes) {
        auto it = by_name.find(fn.name);
        if (it == by_name.end()) continue;
        const auto& fopt = fv[static_cast<std::size_t>(fn.output)];
        const auto& qopt = qv[static_cast<std::size_t>(it->second->output)];
        if (!fopt || !qopt) continue;
        const Tensor qdeq = qopt->dtype() == DType::F32 ? *qopt : dequantize(*qopt);
        require(fopt->shape() == qdeq.shape(),
                "node '" + fn.name + "' output shapes diverge between graphs");

        auto f = fopt->f();
        auto d = qdeq.f();
        double max_err = 0.0, sum_err = 0.0, sig = 0.0, noise = 0.0;
        for (std::size_t i = 0; i < f.size(); ++i) {
            const double e = std::abs(static_cast<double>(f[i]) - d[i]);
            max_err = std::max(max_err, e);
            sum_err += e;
            sig += static_cast<double>(f[i]) * f[i];
            noise += e * e;
        }
        QuantLayerError le;
        le.node_id = fn.id;
        le.name = fn.name;
        le.max_abs_err = max_err;
        le.mean_abs_err = f.empty() ? 0.0 : sum_err / static_cast<double>(f.size());
        if (noise == 0.0)
            le.sqnr_db = 200.0;
        else if (sig == 0.0)
            le.sqnr_db = -200.0;
        else
            le.sqnr_db = std::clamp(10.0 * std::log10(sig / noise), -200.0, 200.0);
        report.push_back(std::move(le));
    }
    return report;
}

} // namespace ttrk
