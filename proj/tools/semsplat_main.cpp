// Command-line pipeline driver: synth -> fuse -> render -> eval/sparsify.
//
// Exit codes: 0 success, 1 I/O, 2 format, 3 dimension/contract, 4 bad flags.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "semsplat/evaluation.hpp"
#include "semsplat/image_io.hpp"
#include "semsplat/prob_render.hpp"
#include "semsplat/scene_io.hpp"
#include "semsplat/semantic_fusion.hpp"
#include "semsplat/splat_raster.hpp"
#include "semsplat/synthetic.hpp"

namespace fs = std::filesystem;
using namespace semsplat;

namespace {

// Aggregated run settings; filled from flags with config-file fallback.
struct RunConfig {
    int num_classes = 0;
    double prior_value = 0.001;
    double background_value = 0.001;
    int sparsification_bins = 20;
    int tile_size = 16;
    int thread_count = 1;   // 0 = auto

    std::string scene_path;
    std::string cameras_path;
    std::string state_path;
    std::string out_dir;

    RasterConfig raster() const { return {tile_size, thread_count}; }
};

std::string channel_suffix(int c) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "_c%02d", c);
    return buf;
}

// Per-channel Pf files, or one Pf with channels stacked vertically.
void write_channel_maps(const fs::path& dir, const std::string& stem, const ImageF& map,
                        bool interleaved) {
    if (map.channels == 1) {
        write_pfm((dir / (stem + ".pfm")).string(), map);
        return;
    }
    if (interleaved) {
        ImageF stacked(map.width, map.height * map.channels, 1);
        for (int c = 0; c < map.channels; ++c) {
            for (int y = 0; y < map.height; ++y) {
                for (int x = 0; x < map.width; ++x) {
                    stacked.at(x, c * map.height + y) = map.at(x, y, c);
                }
            }
        }
        write_pfm((dir / (stem + ".pfm")).string(), stacked);
        return;
    }
    for (int c = 0; c < map.channels; ++c) {
        ImageF channel(map.width, map.height, 1);
        for (int y = 0; y < map.height; ++y) {
            for (int x = 0; x < map.width; ++x) channel.at(x, y) = map.at(x, y, c);
        }
        write_pfm((dir / (stem + channel_suffix(c) + ".pfm")).string(), channel);
    }
}

ImageF png_to_float(const ImageU8& img) {
    ImageF out(img.width, img.height, img.channels);
    for (std::size_t i = 0; i < img.data.size(); ++i) out.data[i] = img.data[i] / 255.0;
    return out;
}

LabelImage load_view_labels(const fs::path& cameras_path, const CameraView& cam,
                            int num_classes) {
    if (cam.label_path.empty()) {
        throw FormatError("camera entry has no label_path");
    }
    fs::path label_path(cam.label_path);
    if (label_path.is_relative()) label_path = cameras_path.parent_path() / label_path;
    LabelImage labels = load_label_image(label_path.string(), num_classes);
    if (labels.width != cam.width || labels.height != cam.height) {
        throw DimensionError("label image " + label_path.string() +
                             " does not match camera dimensions");
    }
    return labels;
}

int run_fuse(const RunConfig& cfg, int max_views) {
    const GaussianCloud cloud = load_gaussian_ply(cfg.scene_path);
    std::vector<CameraView> cams = load_cameras(cfg.cameras_path);
    if (max_views > 0 && static_cast<std::size_t>(max_views) < cams.size()) {
        cams.resize(max_views);
    }

    SemanticState state = init_state(cloud.size(), cfg.num_classes, cfg.prior_value);
    state.background.assign(cfg.num_classes, cfg.background_value);

    if (cams.empty()) {
        std::cout << "warning: no views to fuse; writing prior state\n";
    }
    for (std::size_t v = 0; v < cams.size(); ++v) {
        const LabelImage labels = load_view_labels(cfg.cameras_path, cams[v], cfg.num_classes);
        fuse_view(state, cloud, cams[v], labels, cfg.raster());
        std::cout << "view " << (v + 1) << "/" << cams.size()
                  << " accumulated_mass=" << total_accumulated_mass(state) << "\n";
    }
    save_semantic_state(cfg.state_path, state);
    std::cout << "state written to " << cfg.state_path
              << " total_mass=" << total_accumulated_mass(state) << "\n";
    return 0;
}

int run_render(const RunConfig& cfg, int view_index, bool render_color_flag,
               bool color_pfm, bool interleaved, const std::vector<double>& bg_color) {
    const GaussianCloud cloud = load_gaussian_ply(cfg.scene_path);
    const SemanticState state = load_semantic_state(cfg.state_path);
    const std::vector<CameraView> cams = load_cameras(cfg.cameras_path);
    if (view_index < 0 || static_cast<std::size_t>(view_index) >= cams.size()) {
        throw DimensionError("view index out of range");
    }
    const CameraView& cam = cams[view_index];

    fs::create_directories(cfg.out_dir);
    const fs::path dir(cfg.out_dir);

    const PixelDistributionMaps maps = rasterize_semantics(state, cloud, cam, cfg.raster());

    ImageU8 argmax(maps.argmax_category.width, maps.argmax_category.height, 1);
    argmax.data = maps.argmax_category.data;
    write_png((dir / "argmax.png").string(), argmax);
    write_png((dir / "argmax_color.png").string(), colorize_labels(argmax));

    write_channel_maps(dir, "expectation", maps.expectation, interleaved);
    write_channel_maps(dir, "variance", maps.variance, interleaved);
    write_channel_maps(dir, "background", maps.background_weight, interleaved);
    write_channel_maps(dir, "top_expectation", maps.top_expectation, interleaved);
    write_channel_maps(dir, "top_variance", maps.top_variance, interleaved);

    const ImageF confidence = pixel_confidence_heuristic(state, cloud, cam, cfg.raster());
    write_channel_maps(dir, "confidence", confidence, interleaved);

    if (render_color_flag || color_pfm) {
        const Eigen::Vector3d bg(bg_color[0], bg_color[1], bg_color[2]);
        const ImageF color = render_color(cloud, cam, bg, cfg.raster());
        if (render_color_flag) write_png((dir / "color.png").string(), quantize_to_u8(color));
        if (color_pfm) write_pfm((dir / "color.pfm").string(), color);
    }

    const ImageUncertainty u = image_uncertainty(maps);
    char line[128];
    std::snprintf(line, sizeof(line), "u_var=%.12g u_exp=%.12g\n", u.u_var, u.u_exp);
    std::cout << line;
    return 0;
}

int run_eval(const std::string& pred_path, const std::string& gt_path,
             const std::string& mask_path, int num_classes,
             const std::string& rendered_path, const std::string& reference_path,
             const std::string& out_path) {
    const ImageU8 pred_img = read_png(pred_path);
    if (pred_img.channels != 1) throw FormatError("prediction PNG must be single-channel");
    const LabelImage gt = load_label_image(gt_path, num_classes);

    ImageU8 mask;
    if (!mask_path.empty()) {
        mask = read_png(mask_path);
        if (mask.channels != 1) throw FormatError("mask PNG must be single-channel");
    }

    const ConfusionMatrix cm = confusion(pred_img, gt, mask, num_classes);
    const MetricsSummary metrics = miou_accuracy(cm);

    nlohmann::json report;
    auto iou_list = nlohmann::json::array();
    for (const auto& iou : metrics.per_class_iou) {
        if (iou) iou_list.push_back(*iou);
        else iou_list.push_back(nullptr);
    }
    report["per_class_iou"] = std::move(iou_list);
    report["miou"] = metrics.miou;
    report["accuracy"] = metrics.accuracy;
    report["evaluated_pixels"] = cm.total();

    auto cm_json = nlohmann::json::array();
    for (int g = 0; g < cm.num_classes; ++g) {
        auto row = nlohmann::json::array();
        for (int p = 0; p < cm.num_classes; ++p) row.push_back(cm.at(g, p));
        cm_json.push_back(std::move(row));
    }
    report["confusion"] = std::move(cm_json);

    if (!rendered_path.empty() && !reference_path.empty()) {
        report["psnr"] = psnr(png_to_float(read_png(rendered_path)),
                              png_to_float(read_png(reference_path)));
    }

    const std::string text = report.dump(2) + "\n";
    if (out_path.empty()) {
        std::cout << text;
    } else {
        std::ofstream out(out_path);
        if (!out) throw IoError("cannot open report for writing: " + out_path);
        out << text;
    }
    return 0;
}

SparsifyOrdering parse_ordering(const std::string& name) {
    if (name == "by_uncertainty") return SparsifyOrdering::by_uncertainty;
    if (name == "oracle") return SparsifyOrdering::oracle;
    if (name == "random") return SparsifyOrdering::random;
    throw CLI::ValidationError("--orderings", "unknown ordering '" + name + "'");
}

void write_curves_csv(const std::string& path,
                      const std::vector<SparsificationCurve>& curves) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open CSV for writing: " + path);
    out << "fraction_removed";
    for (const auto& c : curves) out << "," << c.ordering;
    out << "\n";
    const std::size_t rows = curves.empty() ? 0 : curves.front().fractions_removed.size();
    out.precision(12);
    for (std::size_t r = 0; r < rows; ++r) {
        out << curves.front().fractions_removed[r];
        for (const auto& c : curves) out << "," << c.metric_values[r];
        out << "\n";
    }
    if (!out) throw IoError("CSV write failed: " + path);
}

int run_sparsify_pixels(const std::string& uncertainty_path, const std::string& errors_path,
                        int bins, const std::vector<std::string>& orderings,
                        std::uint64_t seed, const std::string& out_path) {
    const ImageF uncertainty = read_pfm(uncertainty_path);
    if (uncertainty.channels != 1) throw FormatError("uncertainty PFM must be single-channel");
    const ImageU8 errors_img = read_png(errors_path);
    if (errors_img.channels != 1) throw FormatError("errors PNG must be single-channel");
    if (errors_img.width != uncertainty.width || errors_img.height != uncertainty.height) {
        throw DimensionError("uncertainty and errors dimensions disagree");
    }

    std::vector<SparsificationCurve> curves;
    for (const auto& name : orderings) {
        curves.push_back(sparsify_pixels(uncertainty.data, errors_img.data, bins,
                                         parse_ordering(name), seed));
        curves.back().ordering = name;
    }
    write_curves_csv(out_path, curves);
    return 0;
}

int run_sparsify_images(const std::string& values_path, int bins,
                        const std::vector<std::string>& orderings, std::uint64_t seed,
                        const std::string& out_path) {
    std::ifstream in(values_path);
    if (!in) throw IoError("cannot open values CSV: " + values_path);
    std::string line;
    if (!std::getline(in, line)) throw FormatError("empty values CSV");
    std::vector<double> uncertainty, psnr_values;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string u, p;
        if (!std::getline(ls, u, ',') || !std::getline(ls, p)) {
            throw FormatError("values CSV rows must be 'uncertainty,psnr'");
        }
        uncertainty.push_back(std::stod(u));
        psnr_values.push_back(std::stod(p));
    }

    std::vector<SparsificationCurve> curves;
    for (const auto& name : orderings) {
        curves.push_back(sparsify_images(uncertainty, psnr_values, bins,
                                         parse_ordering(name), seed));
        curves.back().ordering = name;
    }
    write_curves_csv(out_path, curves);
    return 0;
}

int run_synth(std::uint64_t seed, int num_gaussians, int num_classes, double extent,
              int num_cameras, int image_size, double noise, bool write_images,
              const std::string& out_dir, const RunConfig& cfg) {
    SyntheticScene scene;
    {
        SceneParams params;
        params.num_cameras = num_cameras;
        params.image_size = image_size;
        scene = generate_scene(seed, num_gaussians, num_classes, extent, params);
    }

    const fs::path dir(out_dir);
    fs::create_directories(dir / "labels");
    if (write_images) fs::create_directories(dir / "images");

    save_gaussian_ply((dir / "scene.ply").string(), scene.cloud);

    {
        std::ofstream csv(dir / "categories.csv");
        if (!csv) throw IoError("cannot write categories.csv");
        csv << "index,category\n";
        for (std::size_t i = 0; i < scene.gaussian_categories.size(); ++i) {
            csv << i << "," << static_cast<int>(scene.gaussian_categories[i]) << "\n";
        }
    }

    std::vector<CameraView> cams = scene.cameras;
    for (std::size_t v = 0; v < cams.size(); ++v) {
        char name[64];
        std::snprintf(name, sizeof(name), "labels/label_%04zu.png", v);
        const LabelImage labels =
            render_labels_oracle(scene, cams[v], noise, seed * 1000003ull + v);
        save_label_image((dir / name).string(), labels);
        cams[v].label_path = name;

        if (write_images) {
            std::snprintf(name, sizeof(name), "images/view_%04zu.png", v);
            const ImageF color =
                render_color(scene.cloud, cams[v], Eigen::Vector3d::Zero(), cfg.raster());
            write_png((dir / name).string(), quantize_to_u8(color));
            cams[v].image_path = name;
        }
        std::cout << "view " << (v + 1) << "/" << cams.size() << " written\n";
    }
    save_cameras((dir / "cameras.json").string(), cams);
    std::cout << "scene written to " << out_dir << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Probabilistic semantic splatting: fuse labeled views into a "
                 "splat scene, render semantics with uncertainty, evaluate."};
    app.require_subcommand(1);
    app.set_config("--config", "", "key=value config file; flags take precedence");

    RunConfig cfg;

    auto add_raster_options = [&cfg](CLI::App* cmd) {
        cmd->add_option("--tile-size", cfg.tile_size, "rasterizer tile size in pixels")
            ->capture_default_str();
        cmd->add_option("--threads", cfg.thread_count, "worker threads (0 = all cores)")
            ->capture_default_str();
    };

    // fuse
    auto* fuse_cmd = app.add_subcommand("fuse", "fuse labeled views into a semantic state");
    int max_views = 0;
    fuse_cmd->add_option("--scene", cfg.scene_path, "splat PLY")->required();
    fuse_cmd->add_option("--cameras", cfg.cameras_path, "cameras JSON")->required();
    fuse_cmd->add_option("--num-classes", cfg.num_classes, "category count")->required();
    fuse_cmd->add_option("--prior", cfg.prior_value, "Dirichlet prior concentration")
        ->capture_default_str();
    fuse_cmd->add_option("--background", cfg.background_value, "background concentration")
        ->capture_default_str();
    fuse_cmd->add_option("--state-out", cfg.state_path, "output state file")->required();
    fuse_cmd->add_option("--max-views", max_views, "fuse only the first K views (0 = all)")
        ->capture_default_str();
    add_raster_options(fuse_cmd);

    // render
    auto* render_cmd = app.add_subcommand("render", "render semantics and uncertainty maps");
    int view_index = 0;
    bool render_color_flag = false;
    bool color_pfm = false;
    bool interleaved = false;
    std::vector<double> bg_color = {0.0, 0.0, 0.0};
    render_cmd->add_option("--scene", cfg.scene_path, "splat PLY")->required();
    render_cmd->add_option("--state", cfg.state_path, "semantic state file")->required();
    render_cmd->add_option("--cameras", cfg.cameras_path, "cameras JSON")->required();
    render_cmd->add_option("--view-index", view_index, "camera entry to render")
        ->capture_default_str();
    render_cmd->add_option("--out-dir", cfg.out_dir, "output directory")->required();
    render_cmd->add_flag("--render-color", render_color_flag, "also write a color render");
    render_cmd->add_flag("--color-pfm", color_pfm, "write the color render as raw float PFM");
    render_cmd->add_flag("--interleaved", interleaved,
                         "stack channels into one PFM instead of one file per channel");
    render_cmd->add_option("--background-color", bg_color, "color render background RGB")
        ->expected(3);
    add_raster_options(render_cmd);

    // eval
    auto* eval_cmd = app.add_subcommand("eval", "confusion/mIoU/accuracy report");
    std::string pred_path, gt_path, mask_path, rendered_path, reference_path, report_path;
    eval_cmd->add_option("--pred", pred_path, "predicted categories PNG")->required();
    eval_cmd->add_option("--gt", gt_path, "ground-truth label PNG")->required();
    eval_cmd->add_option("--num-classes", cfg.num_classes, "category count")->required();
    eval_cmd->add_option("--mask", mask_path, "optional mask PNG (0 = exclude)");
    eval_cmd->add_option("--rendered", rendered_path, "rendered image for PSNR");
    eval_cmd->add_option("--reference", reference_path, "reference image for PSNR");
    eval_cmd->add_option("--out", report_path, "write JSON here instead of stdout");

    // sparsify
    auto* sparsify_cmd = app.add_subcommand("sparsify", "sparsification curves as CSV");
    bool image_mode = false;
    std::string uncertainty_path, errors_path, values_path, csv_path;
    std::vector<std::string> orderings = {"by_uncertainty", "oracle", "random"};
    std::uint64_t seed = 0;
    sparsify_cmd->add_flag("--image", image_mode, "image-level mode (PSNR metric)");
    sparsify_cmd->add_option("--uncertainty", uncertainty_path, "pixel uncertainty PFM");
    sparsify_cmd->add_option("--errors", errors_path, "pixel errors PNG (nonzero = wrong)");
    sparsify_cmd->add_option("--values", values_path, "image-level CSV 'uncertainty,psnr'");
    sparsify_cmd->add_option("--bins", cfg.sparsification_bins, "bin count")
        ->capture_default_str();
    sparsify_cmd->add_option("--orderings", orderings, "orderings to emit")
        ->delimiter(',')
        ->capture_default_str();
    sparsify_cmd->add_option("--seed", seed, "seed for the random ordering")
        ->capture_default_str();
    sparsify_cmd->add_option("--out", csv_path, "output CSV")->required();

    // synth
    auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic scene directory");
    std::uint64_t synth_seed = 0;
    int num_gaussians = 50;
    double extent = 4.0;
    int num_cameras = 20;
    int image_size = 64;
    double noise = 0.0;
    bool write_images = false;
    synth_cmd->add_option("--seed", synth_seed, "scene seed")->capture_default_str();
    synth_cmd->add_option("--num-gaussians", num_gaussians, "gaussian count")
        ->capture_default_str();
    synth_cmd->add_option("--num-classes", cfg.num_classes, "category count")->required();
    synth_cmd->add_option("--extent", extent, "scene box side length")->capture_default_str();
    synth_cmd->add_option("--num-cameras", num_cameras, "ring camera count")
        ->capture_default_str();
    synth_cmd->add_option("--image-size", image_size, "square image size")
        ->capture_default_str();
    synth_cmd->add_option("--noise", noise, "label noise rate in [0,1)")
        ->capture_default_str();
    synth_cmd->add_flag("--write-images", write_images, "write color renders + image_path");
    synth_cmd->add_option("--out-dir", cfg.out_dir, "output directory")->required();
    add_raster_options(synth_cmd);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 4;
    }

    try {
        if (fuse_cmd->parsed()) return run_fuse(cfg, max_views);
        if (render_cmd->parsed()) {
            return run_render(cfg, view_index, render_color_flag, color_pfm, interleaved,
                              bg_color);
        }
        if (eval_cmd->parsed()) {
            return run_eval(pred_path, gt_path, mask_path, cfg.num_classes, rendered_path,
                            reference_path, report_path);
        }
        if (sparsify_cmd->parsed()) {
            if (image_mode) {
                if (values_path.empty()) {
                    std::cerr << "error: --image mode requires --values\n";
                    return 4;
                }
                return run_sparsify_images(values_path, cfg.sparsification_bins, orderings,
                                           seed, csv_path);
            }
            if (uncertainty_path.empty() || errors_path.empty()) {
                std::cerr << "error: pixel mode requires --uncertainty and --errors\n";
                return 4;
            }
            return run_sparsify_pixels(uncertainty_path, errors_path,
                                       cfg.sparsification_bins, orderings, seed, csv_path);
        }
        if (synth_cmd->parsed()) {
            return run_synth(synth_seed, num_gaussians, cfg.num_classes, extent, num_cameras,
                             image_size, noise, write_images, cfg.out_dir, cfg);
        }
    } catch (const IoError& e) {
        std::cerr << "I/O error: " << e.what() << "\n";
        return 1;
    } catch (const FormatError& e) {
        std::cerr << "format error: " << e.what() << "\n";
        return 2;
    } catch (const DimensionError& e) {
        std::cerr << "dimension error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
