#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include "ttrk/graph.hpp"
#include "ttrk/image.hpp"
#include "ttrk/json_io.hpp"
#include "ttrk/preprocess.hpp"

namespace ttrk {

struct GazeSample {
    std::filesystem::path image;
    CropBox crop;
    double gaze_x_cm = 0.0;
    double gaze_y_cm = 0.0;
};

/// Dataset manifest: one JSON object per line, blank lines ignored.
///   {"image": "frames/0001.pgm", "crop": [x0, y0, w, h],
///    "frame": [width, height], "gaze_cm": [x, y]}
/// Image paths are resolved relative to the manifest's directory.
inline std::vector<GazeSample> load_dataset_manifest(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f.good()) throw invalid_input("cannot open '" + path.string() + "'");
    const std::filesystem::path base = path.parent_path();
    std::vector<GazeSample> samples;
    std::string line;
    int line_no = 0;
    while (std::getline(f, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const std::string where = path.string() + ":" + std::to_string(line_no);
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw format_error(where + ": invalid JSON: " + e.what());
        }
        try {
            GazeSample s;
            s.image = base / j.at("image").get<std::string>();
            const auto& crop = j.at("crop");
            const auto& frame = j.at("frame");
            if (!crop.is_array() || crop.size() != 4 || !frame.is_array() || frame.size() != 2)
                throw format_error(where + ": crop must be [x0,y0,w,h], frame [w,h]");
            s.crop.x0 = crop[0].get<std::int64_t>();
            s.crop.y0 = crop[1].get<std::int64_t>();
            s.crop.w = crop[2].get<std::int64_t>();
            s.crop.h = crop[3].get<std::int64_t>();
            s.crop.frame_w = frame[0].get<std::int64_t>();
            s.crop.frame_h = frame[1].get<std::int64_t>();
            const auto& gaze = j.at("gaze_cm");
            if (!gaze.is_array() || gaze.size() != 2)
                throw format_error(where + ": gaze_cm must be [x,y]");
            s.gaze_x_cm = gaze[0].get<double>();
            s.gaze_y_cm = gaze[1].get<double>();
            try {
                s.crop.validate();
            } catch (const invalid_input& e) {
                throw format_error(where + ": " + e.what());
            }
            samples.push_back(std::move(s));
        } catch (const nlohmann::json::exception& e) {
            throw format_error(where + ": " + e.what());
        }
    }
    if (samples.empty()) throw invalid_input("dataset '" + path.string() + "' has no samples");
    return samples;
}

inline double euclidean_error_cm(double pred_x, double pred_y, double true_x, double true_y) {
    return std::hypot(pred_x - true_x, pred_y - true_y);
}

struct EvalResult {
    std::int64_t count = 0;
    double mean_error_cm = 0.0;
    double median_error_cm = 0.0;
    double max_error_cm = 0.0;
    std::vector<double> errors; // per sample, in dataset order
};

/// Mean is accumulated over the sorted errors, so the result is bit-stable
/// under any permutation of the samples. Median is the lower middle element.
inline EvalResult summarize_errors(std::vector<double> errors) {
    require(!errors.empty(), "cannot summarize an empty error list");
    EvalResult r;
    r.errors = errors;
    r.count = static_cast<std::int64_t>(errors.size());
    std::sort(errors.begin(), errors.end());
    double sum = 0.0;
    for (double e : errors) sum += e;
    r.mean_error_cm = sum / static_cast<double>(errors.size());
    r.median_error_cm = errors[(errors.size() - 1) / 2];
    r.max_error_cm = errors.back();
    return r;
}

namespace detail {

inline Tensor preprocess_sample(const GazeSample& s, std::int64_t input_size) {
    try {
        return preprocess_frame(load_image(s.image), s.crop, input_size);
    } catch (const format_error& e) {
        throw format_error("sample '" + s.image.string() + "': " + e.what());
    } catch (const invalid_input& e) {
        throw invalid_input("sample '" + s.image.string() + "': " + e.what());
    }
}

inline std::pair<double, double> predict_gaze(const Graph& g, const Tensor& input) {
    auto out = execute(g, {input});
    require(out.size() == 1 && out[0].dtype() == DType::F32 && out[0].elements() == 2,
            "model does not produce a single (x, y) output");
    auto v = out[0].f();
    return {static_cast<double>(v[0]), static_cast<double>(v[1])};
}

inline std::int64_t graph_input_size(const Graph& g) {
    const Shape& in = g.tensor(g.inputs.at(0)).shape;
    require(in.rank() == 4 && in[1] == in[2], "graph input must be square (1,s,s,c)");
    return in[1];
}

} // namespace detail

inline EvalResult evaluate(const Graph& g, const std::vector<GazeSample>& samples) {
    require(!samples.empty(), "evaluation needs at least one sample");
    const std::int64_t size = detail::graph_input_size(g);
    std::vector<double> errors;
    errors.reserve(samples.size());
    for (const GazeSample& s : samples) {
        const auto [px, py] = detail::predict_gaze(g, detail::preprocess_sample(s, size));
        errors.push_back(euclidean_error_cm(px, py, s.gaze_x_cm, s.gaze_y_cm));
    }
    return summarize_errors(std::move(errors));
}

struct PairedEval {
    EvalResult float_eval;
    EvalResult quant_eval;
    double mean_delta_cm = 0.0; // quantized mean minus float mean
};

/// Evaluate both graphs on bit-identical preprocessed inputs, so the delta
/// isolates quantization alone.
inline PairedEval compare_float_int8(const Graph& float_graph, const Graph& quant_graph,
                                     const std::vector<GazeSample>& samples) {
    require(!samples.empty(), "evaluation needs at least one sample");
    const std::int64_t size = detail::graph_input_size(float_graph);
    require(size == detail::graph_input_size(quant_graph),
            "graphs disagree on the input size");
    std::vector<double> f_err, q_err;
    f_err.reserve(samples.size());
    q_err.reserve(samples.size());
    for (const GazeSample& s : samples) {
        const Tensor input = detail::preprocess_sample(s, size);
        const auto [fx, fy] = detail::predict_gaze(float_graph, input);
        const auto [qx, qy] = detail::predict_gaze(quant_graph, input);
        f_err.push_back(euclidean_error_cm(fx, fy, s.gaze_x_cm, s.gaze_y_cm));
        q_err.push_back(euclidean_error_cm(qx, qy, s.gaze_x_cm, s.gaze_y_cm));
    }
    PairedEval pe;
    pe.float_eval = summarize_errors(std::move(f_err));
    pe.quant_eval = summarize_errors(std::move(q_err));
    pe.mean_delta_cm = pe.quant_eval.mean_error_cm - pe.float_eval.mean_error_cm;
    return pe;
}

} // namespace ttrk
