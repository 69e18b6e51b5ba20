#pragma once

#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <span>
#include <string>
#include <vector>

#include "ttrk/graph.hpp"

namespace ttrk {

static_assert(std::endian::native == std::endian::little,
              "container code assumes a little-endian host");

// "TTRK" model container, version 1. All integers little-endian.
//
//   header:  magic "TTRK", version u32, mode u32, tensor_count u32,
//            node_count u32, input_count u32, output_count u32, data_size u64
//   tensors: name(u32+bytes), role u32, dtype u32, rank u32, dims i64[rank],
//            qparams flag u8 [scheme u32, axis i32, count u32, scales f32[],
//            zero_points i32[]], payload flag u8 [offset u64, size u64]
//   nodes:   name(u32+bytes), kind u32, stride_h u32, stride_w u32,
//            padding u32, groups u32, act u32, input_count u32,
//            input ids u32[], output id u32
//   io:      input tensor ids u32[], output tensor ids u32[]
//   data:    zero padding to 8-byte alignment, then payload blobs packed in
//            tensor order, each blob 8-aligned, gaps zeroed
//
// The writer is canonical: serializing any given graph always produces the
// same bytes, and the reader rejects non-canonical layouts, so
// save -> load -> save round trips byte-identically. Activation tables for
// quantized graphs are not stored; they are rebuilt from the quantization
// parameters on load.

inline constexpr std::uint32_t kContainerVersion = 1;
inline constexpr char kContainerMagic[4] = {'T', 'T', 'R', 'K'};

namespace detail {

inline constexpr std::uint32_t kMaxTableEntries = 1u << 20;
inline constexpr std::uint32_t kMaxNameLen = 4096;
inline constexpr std::uint32_t kMaxRank = 4;
inline constexpr std::int64_t kMaxDim = 1 << 20;
inline constexpr std::int64_t kMaxElements = std::int64_t{1} << 28;
inline constexpr std::uint32_t kMaxQparamCount = 1u << 16;
inline constexpr std::uint32_t kMaxNodeInputs = 8;

struct ByteWriter {
    std::vector<std::uint8_t> bytes;

    void raw(const void* p, std::size_t n) {
        const auto* b = static_cast<const std::uint8_t*>(p);
        bytes.insert(bytes.end(), b, b + n);
    }
    void u8(std::uint8_t v) { bytes.push_back(v); }
    void u32(std::uint32_t v) { raw(&v, 4); }
    void i32(std::int32_t v) { raw(&v, 4); }
    void u64(std::uint64_t v) { raw(&v, 8); }
    void i64(std::int64_t v) { raw(&v, 8); }
    void f32(float v) { raw(&v, 4); }
    void str(const std::string& s) {
        u32(static_cast<std::uint32_t>(s.size()));
        raw(s.data(), s.size());
    }
    void pad_to(std::size_t alignment) {
        while (bytes.size() % alignment != 0) bytes.push_back(0);
    }
};

class ByteReader {
public:
    explicit ByteReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

    std::size_t pos() const { return pos_; }
    std::size_t remaining() const { return bytes_.size() - pos_; }

    void raw(void* out, std::size_t n) {
        if (n > remaining()) throw format_error("container truncated");
        std::memcpy(out, bytes_.data() + pos_, n);
        pos_ += n;
    }
    std::uint8_t u8() {
        std::uint8_t v;
        raw(&v, 1);
        return v;
    }
    std::uint32_t u32() {
        std::uint32_t v;
        raw(&v, 4);
        return v;
    }
    std::int32_t i32() {
        std::int32_t v;
        raw(&v, 4);
        return v;
    }
    std::uint64_t u64() {
        std::uint64_t v;
        raw(&v, 8);
        return v;
    }
    std::int64_t i64() {
        std::int64_t v;
        raw(&v, 8);
        return v;
    }
    float f32() {
        float v;
        raw(&v, 4);
        return v;
    }
    std::string str() {
        const std::uint32_t n = u32();
        if (n > kMaxNameLen) throw format_error("container name too long");
        std::string s(n, '\0');
        raw(s.data(), n);
        return s;
    }
    void align_to(std::size_t alignment) {
        while (pos_ % alignment != 0) {
            if (u8() != 0) throw format_error("container padding not zeroed");
        }
    }

private:
    std::span<const std::uint8_t> bytes_;
    std::size_t pos_ = 0;
};

inline std::size_t align8(std::size_t n) { return (n + 7u) & ~std::size_t{7}; }

inline void write_tensor_entry(ByteWriter& w, const TensorEntry& t, std::uint64_t offset,
                               std::uint64_t size) {
    w.str(t.name);
    w.u32(static_cast<std::uint32_t>(t.role));
    w.u32(static_cast<std::uint32_t>(t.dtype));
    w.u32(static_cast<std::uint32_t>(t.shape.rank()));
    for (int a = 0; a < t.shape.rank(); ++a) w.i64(t.shape[a]);
    w.u8(t.qparams ? 1 : 0);
    if (t.qparams) {
        w.u32(static_cast<std::uint32_t>(t.qparams->scheme));
        w.i32(t.qparams->axis);
        w.u32(static_cast<std::uint32_t>(t.qparams->scales.size()));
        for (float s : t.qparams->scales) w.f32(s);
        for (std::int32_t z : t.qparams->zero_points) w.i32(z);
    }
    w.u8(t.payload ? 1 : 0);
    if (t.payload) {
        w.u64(offset);
        w.u64(size);
    }
}

inline void write_node(ByteWriter& w, const OpNode& n) {
    w.str(n.name);
    w.u32(static_cast<std::uint32_t>(n.kind));
    w.u32(static_cast<std::uint32_t>(n.attrs.stride_h));
    w.u32(static_cast<std::uint32_t>(n.attrs.stride_w));
    w.u32(static_cast<std::uint32_t>(n.attrs.padding));
    w.u32(static_cast<std::uint32_t>(n.attrs.groups));
    w.u32(static_cast<std::uint32_t>(n.attrs.act));
    w.u32(static_cast<std::uint32_t>(n.inputs.size()));
    for (int id : n.inputs) w.u32(static_cast<std::uint32_t>(id));
    w.u32(static_cast<std::uint32_t>(n.output));
}

} // namespace detail

inline std::vector<std::uint8_t> serialize_model(const Graph& g) {
    g.validate();
    require(g.tensors.size() < detail::kMaxTableEntries &&
                g.nodes.size() < detail::kMaxTableEntries,
            "graph too large to serialize");

    // Payload blobs are packed in tensor order, each 8-aligned.
    std::vector<std::uint64_t> offsets(g.tensors.size(), 0), sizes(g.tensors.size(), 0);
    std::uint64_t data_size = 0;
    for (std::size_t i = 0; i < g.tensors.size(); ++i) {
        if (!g.tensors[i].payload) continue;
        data_size = detail::align8(data_size);
        offsets[i] = data_size;
        sizes[i] = g.tensors[i].payload->byte_size();
        data_size += sizes[i];
    }

    detail::ByteWriter w;
    w.raw(kContainerMagic, 4);
    w.u32(kContainerVersion);
    w.u32(static_cast<std::uint32_t>(g.mode));
    w.u32(static_cast<std::uint32_t>(g.tensors.size()));
    w.u32(static_cast<std::uint32_t>(g.nodes.size()));
    w.u32(static_cast<std::uint32_t>(g.inputs.size()));
    w.u32(static_cast<std::uint32_t>(g.outputs.size()));
    w.u64(data_size);
    for (std::size_t i = 0; i < g.tensors.size(); ++i)
        detail::write_tensor_entry(w, g.tensors[i], offsets[i], sizes[i]);
    for (const OpNode& n : g.nodes) detail::write_node(w, n);
    for (int id : g.inputs) w.u32(static_cast<std::uint32_t>(id));
    for (int id : g.outputs) w.u32(static_cast<std::uint32_t>(id));

    w.pad_to(8);
    const std::size_t data_base = w.bytes.size();
    w.bytes.resize(data_base + data_size, 0);
    for (std::size_t i = 0; i < g.tensors.size(); ++i) {
        if (!g.tensors[i].payload) continue;
        std::memcpy(w.bytes.data() + data_base + offsets[i], g.tensors[i].payload->raw_data(),
                    static_cast<std::size_t>(sizes[i]));
    }
    return std::move(w.bytes);
}

inline Graph parse_model(std::span<const std::uint8_t> bytes) {
    detail::ByteReader r(bytes);

    char magic[4];
    r.raw(magic, 4);
    if (std::memcmp(magic, kContainerMagic, 4) != 0)
        throw format_error("bad container magic");
    const std::uint32_t version = r.u32();
    if (version != kContainerVersion)
        throw format_error("unsupported container version " + std::to_string(version));
    const std::uint32_t mode = r.u32();
    if (mode > 1) throw format_error("bad container mode");
    const std::uint32_t tensor_count = r.u32();
    const std::uint32_t node_count = r.u32();
    const std::uint32_t input_count = r.u32();
    const std::uint32_t output_count = r.u32();
    const std::uint64_t data_size = r.u64();
    if (tensor_count == 0 || tensor_count > detail::kMaxTableEntries ||
        node_count > detail::kMaxTableEntries || input_count > tensor_count ||
        output_count > tensor_count)
        throw format_error("container counts out of range");
    if (data_size > bytes.size()) throw format_error("container data size exceeds file");

    Graph g;
    g.mode = static_cast<GraphMode>(mode);

    struct PayloadRef {
        std::uint64_t offset = 0, size = 0;
        bool present = false;
    };
    std::vector<PayloadRef> refs(tensor_count);
    std::uint64_t expected_offset = 0;

    g.tensors.reserve(tensor_count);
    for (std::uint32_t i = 0; i < tensor_count; ++i) {
        TensorEntry t;
        t.name = r.str();
        const std::uint32_t role = r.u32();
        if (role > 2) throw format_error("bad tensor role");
        t.role = static_cast<TensorRole>(role);
        const std::uint32_t dtype = r.u32();
        if (dtype > 2) throw format_error("bad tensor dtype");
        t.dtype = static_cast<DType>(dtype);
        const std::uint32_t rank = r.u32();
        if (rank == 0 || rank > detail::kMaxRank) throw format_error("bad tensor rank");
        std::int64_t elems = 1;
        std::vector<std::int64_t> dims(rank);
        for (std::uint32_t a = 0; a < rank; ++a) {
            dims[a] = r.i64();
            if (dims[a] < 1 || dims[a] > detail::kMaxDim) throw format_error("bad tensor dim");
            elems *= dims[a];
            if (elems > detail::kMaxElements) throw format_error("tensor too large");
        }
        t.shape = Shape(std::move(dims));
        const std::uint8_t qflag = r.u8();
        if (qflag > 1) throw format_error("bad qparams flag");
        if (qflag == 1) {
            QuantParams qp;
            const std::uint32_t scheme = r.u32();
            if (scheme > 1) throw format_error("bad quant scheme");
            qp.scheme = static_cast<QuantScheme>(scheme);
            qp.axis = r.i32();
            const std::uint32_t count = r.u32();
            if (count == 0 || count > detail::kMaxQparamCount)
                throw format_error("bad quant param count");
            qp.scales.resize(count);
            qp.zero_points.resize(count);
            for (auto& s : qp.scales) s = r.f32();
            for (auto& z : qp.zero_points) z = r.i32();
            t.qparams = std::move(qp);
        }
        const std::uint8_t payload_flag = r.u8();
        if (payload_flag > 1) throw format_error("bad payload flag");
        if (payload_flag == 1) {
            refs[i].present = true;
            refs[i].offset = r.u64();
            refs[i].size = r.u64();
            const std::uint64_t want =
                static_cast<std::uint64_t>(elems) * dtype_size(t.dtype);
            if (refs[i].size != want) throw format_error("payload size mismatch");
            if (refs[i].offset != detail::align8(expected_offset))
                throw format_error("payload offsets not canonically packed");
            expected_offset = refs[i].offset + refs[i].size;
            if (expected_offset > data_size) throw format_error("payload exceeds data section");
        }
        g.tensors.push_back(std::move(t));
    }
    if (expected_offset != data_size)
        throw format_error("container data section has trailing bytes");

    g.nodes.reserve(node_count);
    for (std::uint32_t i = 0; i < node_count; ++i) {
        OpNode n;
        n.id = static_cast<int>(i);
        n.name = r.str();
        const std::uint32_t kind = r.u32();
        if (kind > 8) throw format_error("bad node kind");
        n.kind = static_cast<OpKind>(kind);
        const std::uint32_t sh = r.u32(), sw = r.u32();
        if (sh == 0 || sh > 8 || sw == 0 || sw > 8) throw format_error("bad node stride");
        n.attrs.stride_h = static_cast<int>(sh);
        n.attrs.stride_w = static_cast<int>(sw);
        const std::uint32_t padding = r.u32();
        if (padding > 1) throw format_error("bad node padding");
        n.attrs.padding = static_cast<Padding>(padding);
        const std::uint32_t groups = r.u32();
        if (groups == 0 || groups > 4096) throw format_error("bad node groups");
        n.attrs.groups = static_cast<int>(groups);
        const std::uint32_t act = r.u32();
        if (act > 2) throw format_error("bad node activation");
        n.attrs.act = static_cast<FusedActivation>(act);
        const std::uint32_t nin = r.u32();
        if (nin == 0 || nin > detail::kMaxNodeInputs) throw format_error("bad node input count");
        n.inputs.resize(nin);
        for (auto& id : n.inputs) {
            const std::uint32_t v = r.u32();
            if (v >= tensor_count) throw format_error("node input id out of range");
            id = static_cast<int>(v);
        }
        const std::uint32_t out = r.u32();
        if (out >= tensor_count) throw format_error("node output id out of range");
        n.output = static_cast<int>(out);
        g.nodes.push_back(std::move(n));
    }

    g.inputs.resize(input_count);
    for (auto& id : g.inputs) {
        const std::uint32_t v = r.u32();
        if (v >= tensor_count) throw format_error("graph input id out of range");
        id = static_cast<int>(v);
    }
    g.outputs.resize(output_count);
    for (auto& id : g.outputs) {
        const std::uint32_t v = r.u32();
        if (v >= tensor_count) throw format_error("graph output id out of range");
        id = static_cast<int>(v);
    }

    r.align_to(8);
    const std::size_t data_base = r.pos();
    if (bytes.size() - data_base != data_size)
        throw format_error("container length does not match data size");

    for (std::uint32_t i = 0; i < tensor_count; ++i) {
        TensorEntry& t = g.tensors[i];
        if (!refs[i].present) continue;
        const std::uint8_t* p = bytes.data() + data_base + refs[i].offset;
        const std::size_t n = static_cast<std::size_t>(t.shape.elements());
        try {
            switch (t.dtype) {
                case DType::F32: {
                    std::vector<float> v(n);
                    std::memcpy(v.data(), p, refs[i].size);
                    t.payload = Tensor::f32(t.shape, std::move(v));
                    break;
                }
                case DType::I8: {
                    if (!t.qparams)
                        throw format_error("int8 payload '" + t.name + "' lacks quant params");
                    std::vector<std::int8_t> v(n);
                    std::memcpy(v.data(), p, refs[i].size);
                    t.payload = Tensor::i8(t.shape, *t.qparams, std::move(v));
                    break;
                }
                case DType::I32: {
                    std::vector<std::int32_t> v(n);
                    std::memcpy(v.data(), p, refs[i].size);
                    t.payload = Tensor::i32(t.shape, std::move(v));
                    break;
                }
            }
        } catch (const invalid_input& e) {
            throw format_error(std::string("container tensor rejected: ") + e.what());
        }
    }

    try {
        if (g.mode == GraphMode::Quantized) {
            for (OpNode& n : g.nodes) {
                if (n.kind != OpKind::HardSwish && n.kind != OpKind::HardSigmoid) continue;
                const auto& in_qp = g.tensor(n.inputs.at(0)).qparams;
                const auto& out_qp = g.tensor(n.output).qparams;
                if (!in_qp || !out_qp)
                    throw format_error("activation node '" + n.name + "' lacks quant params");
                in_qp->validate();
                out_qp->validate();
                n.attrs.lut = n.kind == OpKind::HardSwish
                                  ? make_hard_swish_lut(*in_qp, *out_qp)
                                  : make_hard_sigmoid_lut(*in_qp, *out_qp);
            }
        }
        g.validate();
        g.infer_shapes(); // stored shapes must agree with inference
    } catch (const invalid_input& e) {
        throw format_error(std::string("container graph rejected: ") + e.what());
    }
    return g;
}

inline std::vector<std::uint8_t> save_model(const Graph& g, const std::filesystem::path& path) {
    std::vector<std::uint8_t> bytes = serialize_model(g);
    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        require(f.good(), "cannot open '" + tmp.string() + "' for writing");
        f.write(reinterpret_cast<const char*>(bytes.data()),
                static_cast<std::streamsize>(bytes.size()));
        require(f.good(), "write to '" + tmp.string() + "' failed");
    }
    std::filesystem::rename(tmp, path);
    return bytes;
}

inline std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f.good()) throw invalid_input("cannot open '" + path.string() + "'");
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)),
                                    std::istreambuf_iterator<char>());
    return bytes;
}

inline Graph load_model(const std::filesystem::path& path) {
    const auto bytes = read_file_bytes(path);
    return parse_model(bytes);
}

} // namespace ttrk
