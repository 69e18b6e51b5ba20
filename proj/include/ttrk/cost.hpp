#pragma once

#include <string>
#include <vector>

#include "ttrk/container.hpp"
#include "ttrk/graph.hpp"

namespace ttrk {

struct NodeCost {
    int node_id = -1;
    std::string name;
    std::int64_t macs = 0;
    std::int64_t params = 0;
};

struct CostBreakdown {
    std::vector<NodeCost> nodes;
    std::int64_t total_macs = 0;
    std::int64_t total_params = 0;
    std::int64_t model_bytes = 0; // serialized container size
};

/// Static cost model. One MAC is one multiply-accumulate:
///   conv:        out_h * out_w * out_c * kh * kw * (in_c / groups)
///   depthwise:   out_h * out_w * c * kh * kw
///   fc:          batch * out_features * in_features
/// Pooling, elementwise, and table lookups count zero MACs. Parameters are
/// weight plus bias elements of the node that owns them.
inline CostBreakdown count_costs(const Graph& g) {
    g.validate();
    CostBreakdown cb;
    for (const OpNode& n : g.nodes) {
        NodeCost nc;
        nc.node_id = n.id;
        nc.name = n.name;
        const Shape& out = g.tensor(n.output).shape;
        switch (n.kind) {
            case OpKind::Conv2d: {
                const Shape& w = g.tensor(n.inputs[1]).shape;
                nc.macs = out.elements() * w[1] * w[2] * w[3];
                nc.params = w.elements() + g.tensor(n.inputs[2]).shape.elements();
                break;
            }
            case OpKind::DepthwiseConv2d: {
                const Shape& w = g.tensor(n.inputs[1]).shape;
                nc.macs = out.elements() * w[1] * w[2];
                nc.params = w.elements() + g.tensor(n.inputs[2]).shape.elements();
                break;
            }
            case OpKind::FullyConnected: {
                const Shape& w = g.tensor(n.inputs[1]).shape;
                nc.macs = out.elements() * w[1];
                nc.params = w.elements() + g.tensor(n.inputs[2]).shape.elements();
                break;
            }
            default: break;
        }
        cb.total_macs += nc.macs;
        cb.total_params += nc.params;
        cb.nodes.push_back(std::move(nc));
    }
    cb.model_bytes = static_cast<std::int64_t>(serialize_model(g).size());
    return cb;
}

inline std::int64_t count_macs(const Graph& g) { return count_costs(g).total_macs; }
inline std::int64_t count_params(const Graph& g) { return count_costs(g).total_params; }

} // namespace ttrk
