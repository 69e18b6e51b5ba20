// Command line front end for the gaze runtime: model building, weight
// import/export, post-training quantization, inference, evaluation, and the
// edge metrics profiler.
//
// Exit codes: 0 success, 2 bad usage or invalid arguments, 3 malformed input
// file, 1 anything unexpected.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "ttrk/ttrk.hpp"

#include <CLI11.hpp>

namespace fs = std::filesystem;

namespace {

ttrk::CropBox parse_crop_values(const std::vector<std::int64_t>& v) {
    ttrk::CropBox box;
    box.x0 = v[0];
    box.y0 = v[1];
    box.w = v[2];
    box.h = v[3];
    box.frame_w = v[4];
    box.frame_h = v[5];
    box.validate();
    return box;
}

ttrk::CropBox load_crop_sidecar(const fs::path& image_path) {
    fs::path sidecar = image_path;
    sidecar.replace_extension(".crop");
    std::ifstream f(sidecar);
    if (!f.good())
        throw ttrk::invalid_input("no --crop given and no sidecar '" + sidecar.string() + "'");
    std::vector<std::int64_t> v(6);
    for (auto& x : v)
        if (!(f >> x))
            throw ttrk::format_error("crop sidecar '" + sidecar.string() +
                                     "' must hold six integers: x0 y0 w h frame_w frame_h");
    try {
        return parse_crop_values(v);
    } catch (const ttrk::invalid_input& e) {
        throw ttrk::format_error("crop sidecar '" + sidecar.string() + "': " + e.what());
    }
}

struct CalibSample {
    fs::path image;
    ttrk::CropBox crop;
};

std::vector<CalibSample> scan_calib_dir(const fs::path& dir) {
    if (!fs::is_directory(dir))
        throw ttrk::invalid_input("calibration directory '" + dir.string() + "' does not exist");
    std::vector<fs::path> images;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (!entry.is_regular_file()) continue;
        const std::string ext = entry.path().extension().string();
        if (ext == ".pgm" || ext == ".ppm") images.push_back(entry.path());
    }
    std::sort(images.begin(), images.end());
    if (images.empty())
        throw ttrk::invalid_input("no .pgm/.ppm images in '" + dir.string() + "'");
    std::vector<CalibSample> out;
    for (const auto& p : images) out.push_back({p, load_crop_sidecar(p)});
    return out;
}

std::int64_t model_input_size(const ttrk::Graph& g) {
    const ttrk::Shape& s = g.tensor(g.inputs.at(0)).shape;
    return s[1];
}

int cmd_build(const std::string& config_path, const std::string& output) {
    ttrk::TinyTrackerConfig cfg = ttrk::default_config();
    if (!config_path.empty())
        cfg = ttrk::config_from_json(ttrk::load_json_file(config_path));
    ttrk::Graph g = ttrk::build_tinytracker(cfg);
    const auto bytes = ttrk::save_model(g, output);
    const ttrk::CostBreakdown cost = ttrk::count_costs(g);
    std::cout << "model: " << output << "\n"
              << "params: " << cost.total_params << "\n"
              << "macs: " << cost.total_macs << "\n"
              << "container_bytes: " << bytes.size() << "\n";
    return 0;
}

int cmd_import(const std::string& model, const std::string& weights, const std::string& output) {
    ttrk::Graph g = ttrk::load_model(model);
    ttrk::import_weights(g, weights);
    const auto bytes = ttrk::save_model(g, output);
    std::cout << "model: " << output << "\n"
              << "container_bytes: " << bytes.size() << "\n";
    return 0;
}

int cmd_export_weights(const std::string& model, const std::string& output_dir) {
    ttrk::Graph g = ttrk::load_model(model);
    const fs::path manifest = ttrk::export_weights(g, output_dir);
    std::cout << "manifest: " << manifest.string() << "\n";
    return 0;
}

int cmd_quantize(const std::string& model, const std::string& calib_dir,
                 const std::string& output, const std::string& report_path) {
    ttrk::Graph g = ttrk::load_model(model);
    if (g.mode != ttrk::GraphMode::Float)
        throw ttrk::invalid_input("model '" + model + "' is already quantized");
    const auto samples = scan_calib_dir(calib_dir);
    const std::int64_t size = model_input_size(g);

    std::vector<std::vector<ttrk::Tensor>> batches;
    for (const auto& s : samples)
        batches.push_back({ttrk::preprocess_frame(ttrk::load_image(s.image), s.crop, size)});

    const ttrk::CalibrationStats stats = ttrk::calibrate(g, batches);
    ttrk::Graph q = ttrk::quantize_graph(g, stats);
    const auto bytes = ttrk::save_model(q, output);

    // Sanity pass on the first calibration input: the interior must run
    // entirely in int8.
    ttrk::ExecStats es;
    ttrk::execute(q, batches.front(), &es);

    std::cout << "model: " << output << "\n"
              << "calibration_images: " << samples.size() << "\n"
              << "container_bytes: " << bytes.size() << "\n"
              << "interior_float_ops: " << es.interior_float_ops << "\n";

    const auto report = ttrk::quantization_error_report(g, q, batches.front());
    double worst_sqnr = 200.0;
    std::string worst_layer = "-";
    for (const auto& le : report)
        if (le.sqnr_db < worst_sqnr) {
            worst_sqnr = le.sqnr_db;
            worst_layer = le.name;
        }
    std::cout << "worst_layer_sqnr_db: " << worst_layer << " "
              << ttrk::detail::fmt("%.2f", worst_sqnr) << "\n";

    if (!report_path.empty()) {
        nlohmann::json jr = nlohmann::json::array();
        for (const auto& le : report) {
            nlohmann::json jl;
            jl["node_id"] = le.node_id;
            jl["name"] = le.name;
            jl["max_abs_err"] = le.max_abs_err;
            jl["mean_abs_err"] = le.mean_abs_err;
            jl["sqnr_db"] = le.sqnr_db;
            jr.push_back(std::move(jl));
        }
        ttrk::write_text_atomic(report_path, jr.dump(2) + "\n");
        std::cout << "report: " << report_path << "\n";
    }
    return 0;
}

int cmd_infer(const std::string& model, const std::string& image,
              const std::vector<std::int64_t>& crop_values) {
    ttrk::Graph g = ttrk::load_model(model);
    const ttrk::CropBox box =
        crop_values.empty() ? load_crop_sidecar(image) : parse_crop_values(crop_values);
    const ttrk::Tensor input =
        ttrk::preprocess_frame(ttrk::load_image(image), box, model_input_size(g));
    auto out = ttrk::execute(g, {input});
    auto v = out.at(0).f();
    std::printf("gaze_cm: %.5f %.5f\n", static_cast<double>(v[0]), static_cast<double>(v[1]));
    return 0;
}

int cmd_eval(const std::string& model, const std::string& dataset, const std::string& compare) {
    const auto samples = ttrk::load_dataset_manifest(dataset);
    ttrk::Graph g = ttrk::load_model(model);
    if (compare.empty()) {
        const ttrk::EvalResult r = ttrk::evaluate(g, samples);
        std::cout << "samples: " << r.count << "\n"
                  << "mean_error_cm: " << ttrk::detail::fmt("%.6f", r.mean_error_cm) << "\n"
                  << "median_error_cm: " << ttrk::detail::fmt("%.6f", r.median_error_cm) << "\n"
                  << "max_error_cm: " << ttrk::detail::fmt("%.6f", r.max_error_cm) << "\n";
    } else {
        ttrk::Graph q = ttrk::load_model(compare);
        const ttrk::PairedEval pe = ttrk::compare_float_int8(g, q, samples);
        std::cout << "samples: " << pe.float_eval.count << "\n"
                  << "float_mean_error_cm: " << ttrk::detail::fmt("%.6f", pe.float_eval.mean_error_cm)
                  << "\n"
                  << "quant_mean_error_cm: " << ttrk::detail::fmt("%.6f", pe.quant_eval.mean_error_cm)
                  << "\n"
                  << "mean_delta_cm: " << ttrk::detail::fmt("%.6f", pe.mean_delta_cm) << "\n";
    }
    return 0;
}

int cmd_profile(const std::string& model, const std::string& platforms) {
    ttrk::Graph g = ttrk::load_model(model);
    const ttrk::CostBreakdown cost = ttrk::count_costs(g);
    std::cout << "params: " << cost.total_params << "\n"
              << "macs: " << cost.total_macs << "\n"
              << "container_bytes: " << cost.model_bytes << "\n\n";
    const auto specs = ttrk::load_platform_specs(platforms);
    const ttrk::MetricsReport report = ttrk::compute_metrics(specs, cost.total_macs);
    std::cout << ttrk::render_report_text(report);
    return 0;
}

int cmd_bench(const std::string& model, const std::string& platforms, const std::string& csv) {
    ttrk::Graph g = ttrk::load_model(model);
    const ttrk::CostBreakdown cost = ttrk::count_costs(g);
    const auto specs = ttrk::load_platform_specs(platforms);
    const ttrk::MetricsReport report = ttrk::compute_metrics(specs, cost.total_macs);
    ttrk::write_text_atomic(csv, ttrk::render_report_csv(report));
    std::cout << "wrote " << csv << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"int8 gaze-estimation runtime and edge metrics profiler"};
    app.require_subcommand(1);

    std::string config_path, model, weights, output, calib_dir, report_path, image, dataset,
        compare, platforms, csv = "metrics.csv";
    std::vector<std::int64_t> crop_values;

    CLI::App* build = app.add_subcommand("build", "build a float model container");
    build->add_option("--config", config_path, "model config JSON (defaults used if omitted)");
    build->add_option("--output", output, "output .ttrk path")->required();

    CLI::App* import_ = app.add_subcommand("import", "import float weights into a model");
    import_->add_option("--model", model, "float .ttrk container")->required();
    import_->add_option("--weights", weights, "weight manifest JSON")->required();
    import_->add_option("--output", output, "output .ttrk path")->required();

    CLI::App* exportw = app.add_subcommand("export-weights", "write weights as manifest + blobs");
    exportw->add_option("--model", model, "float .ttrk container")->required();
    exportw->add_option("--output", output, "output directory")->required();

    CLI::App* quantize = app.add_subcommand("quantize", "calibrate and quantize a float model");
    quantize->add_option("--model", model, "float .ttrk container")->required();
    quantize->add_option("--calib", calib_dir,
                         "directory of .pgm/.ppm images with .crop sidecars")
        ->required();
    quantize->add_option("--output", output, "output .ttrk path")->required();
    quantize->add_option("--report", report_path, "write per-layer error report JSON");

    CLI::App* infer = app.add_subcommand("infer", "run one image through a model");
    infer->add_option("--model", model, ".ttrk container")->required();
    infer->add_option("--image", image, "input .pgm/.ppm frame")->required();
    infer->add_option("--crop", crop_values, "crop: x0 y0 w h frame_w frame_h")->expected(6);

    CLI::App* eval = app.add_subcommand("eval", "evaluate gaze error on a dataset");
    eval->add_option("--model", model, ".ttrk container")->required();
    eval->add_option("--dataset", dataset, "JSON-lines dataset manifest")->required();
    eval->add_option("--compare", compare, "second .ttrk to compare on identical inputs");

    CLI::App* profile = app.add_subcommand("profile", "static costs plus edge metrics report");
    profile->add_option("--model", model, ".ttrk container")->required();
    profile->add_option("--platforms", platforms, "platform measurements JSON")->required();

    CLI::App* bench = app.add_subcommand("bench", "write the metrics table as CSV");
    bench->add_option("--model", model, ".ttrk container")->required();
    bench->add_option("--platforms", platforms, "platform measurements JSON")->required();
    bench->add_option("--csv", csv, "output CSV path (default metrics.csv)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (build->parsed()) return cmd_build(config_path, output);
        if (import_->parsed()) return cmd_import(model, weights, output);
        if (exportw->parsed()) return cmd_export_weights(model, output);
        if (quantize->parsed()) return cmd_quantize(model, calib_dir, output, report_path);
        if (infer->parsed()) return cmd_infer(model, image, crop_values);
        if (eval->parsed()) return cmd_eval(model, dataset, compare);
        if (profile->parsed()) return cmd_profile(model, platforms);
        if (bench->parsed()) return cmd_bench(model, platforms, csv);
    } catch (const ttrk::format_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const ttrk::invalid_input& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "unexpected error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
