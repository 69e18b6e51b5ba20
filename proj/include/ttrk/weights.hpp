#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "ttrk/graph.hpp"
#include "ttrk/json_io.hpp"

namespace ttrk {

// Float weight exchange format: a JSON manifest naming each parameter tensor
// plus one raw little-endian f32 blob per tensor, paths relative to the
// manifest.
//
//   { "version": 1,
//     "tensors": [ {"name": "stem/weight", "dims": [16,3,3,3],
//                   "dtype": "f32", "file": "stem_weight.bin"}, ... ] }

namespace detail {

struct ManifestEntry {
    std::string name;
    Shape shape;
    std::filesystem::path file;
};

inline std::vector<ManifestEntry> parse_weight_manifest(const nlohmann::json& j,
                                                        const std::filesystem::path& base_dir) {
    try {
        if (!j.is_object() || !j.contains("tensors") || !j.at("tensors").is_array())
            throw format_error("weight manifest must be an object with a 'tensors' array");
        if (j.value("version", 1) != 1) throw format_error("unsupported weight manifest version");
        std::vector<ManifestEntry> out;
        for (const auto& jt : j.at("tensors")) {
            ManifestEntry e;
            e.name = jt.at("name").get<std::string>();
            const std::string dtype = jt.at("dtype").get<std::string>();
            if (dtype != "f32")
                throw format_error("tensor '" + e.name + "': only dtype 'f32' is supported");
            std::vector<std::int64_t> dims;
            for (const auto& d : jt.at("dims")) dims.push_back(d.get<std::int64_t>());
            e.shape = Shape(std::move(dims));
            e.shape.validate();
            e.file = base_dir / jt.at("file").get<std::string>();
            out.push_back(std::move(e));
        }
        return out;
    } catch (const nlohmann::json::exception& e) {
        throw format_error(std::string("malformed weight manifest: ") + e.what());
    }
}

inline std::vector<float> read_f32_blob(const std::filesystem::path& path,
                                        std::int64_t expected_elems) {
    std::ifstream f(path, std::ios::binary | std::ios::ate);
    if (!f.good()) throw invalid_input("cannot open weight blob '" + path.string() + "'");
    const auto size = static_cast<std::int64_t>(f.tellg());
    if (size != expected_elems * 4)
        throw invalid_input("weight blob '" + path.string() + "' is " + std::to_string(size) +
                            " bytes, expected " + std::to_string(expected_elems * 4));
    f.seekg(0);
    std::vector<float> v(static_cast<std::size_t>(expected_elems));
    f.read(reinterpret_cast<char*>(v.data()), size);
    require(f.good(), "read of '" + path.string() + "' failed");
    return v;
}

inline std::string blob_filename(const std::string& tensor_name) {
    std::string s = tensor_name;
    for (char& c : s)
        if (c == '/') c = '_';
    return s + ".bin";
}

} // namespace detail

/// Replace every parameter tensor of a float graph with values from the
/// manifest. Strict: each graph parameter must be matched exactly once, each
/// manifest entry must name a graph parameter, and shapes must agree.
inline void import_weights(Graph& g, const std::filesystem::path& manifest_path) {
    require(g.mode == GraphMode::Float, "weights import into a float graph only");
    const auto entries = detail::parse_weight_manifest(load_json_file(manifest_path),
                                                       manifest_path.parent_path());

    std::map<std::string, int> params;
    for (std::size_t i = 0; i < g.tensors.size(); ++i)
        if (g.tensors[i].role != TensorRole::Activation)
            params.emplace(g.tensors[i].name, static_cast<int>(i));

    std::set<std::string> seen;
    for (const auto& e : entries) {
        if (!seen.insert(e.name).second)
            throw invalid_input("weight manifest lists tensor '" + e.name + "' twice");
        auto it = params.find(e.name);
        if (it == params.end())
            throw invalid_input("weight manifest names unknown tensor '" + e.name + "'");
        TensorEntry& t = g.tensor(it->second);
        if (!(t.shape == e.shape))
            throw invalid_input("tensor '" + e.name + "': manifest shape " + e.shape.str() +
                                " does not match model shape " + t.shape.str());
        t.payload = Tensor::f32(t.shape, detail::read_f32_blob(e.file, t.shape.elements()));
    }
    for (const auto& [name, id] : params)
        if (!seen.count(name))
            throw invalid_input("weight manifest is missing tensor '" + name + "'");
    g.validate();
}

/// Write every parameter tensor of a float graph as blobs plus a manifest.
inline std::filesystem::path export_weights(const Graph& g, const std::filesystem::path& dir,
                                            const std::string& manifest_name = "weights.json") {
    require(g.mode == GraphMode::Float, "weights export from a float graph only");
    std::filesystem::create_directories(dir);
    nlohmann::json tensors = nlohmann::json::array();
    for (const TensorEntry& t : g.tensors) {
        if (t.role == TensorRole::Activation) continue;
        require(t.payload && t.payload->dtype() == DType::F32,
                "tensor '" + t.name + "' has no float payload to export");
        const std::string file = detail::blob_filename(t.name);
        auto data = t.payload->f();
        {
            const std::filesystem::path tmp = (dir / file).string() + ".tmp";
            std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
            require(f.good(), "cannot open '" + tmp.string() + "' for writing");
            f.write(reinterpret_cast<const char*>(data.data()),
                    static_cast<std::streamsize>(data.size() * 4));
            require(f.good(), "write to '" + tmp.string() + "' failed");
            std::filesystem::rename(tmp, dir / file);
        }
        nlohmann::json jt;
        jt["name"] = t.name;
        jt["dims"] = t.shape.dims;
        jt["dtype"] = "f32";
        jt["file"] = file;
        tensors.push_back(std::move(jt));
    }
    nlohmann::json manifest;
    manifest["version"] = 1;
    manifest["tensors"] = std::move(tensors);
    const std::filesystem::path out = dir / manifest_name;
    write_text_atomic(out, manifest.dump(2) + "\n");
    return out;
}

} // namespace ttrk
