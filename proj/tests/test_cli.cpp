#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "semsplat/image_io.hpp"
#include "semsplat/scene_io.hpp"
#include "semsplat/synthetic.hpp"
#include "test_util.hpp"

using namespace semsplat;
using test_util::TempDir;

namespace {

#ifndef SEMSPLAT_CLI_PATH
#error "SEMSPLAT_CLI_PATH must point at the built binary"
#endif

int run(const std::string& args, std::string* output = nullptr) {
    const std::string log = std::filesystem::temp_directory_path() /
                            ("semsplat_cli_out_" + std::to_string(::getpid()) + ".log");
    const std::string cmd = std::string(SEMSPLAT_CLI_PATH) + " " + args + " > " + log + " 2>&1";
    const int status = std::system(cmd.c_str());
    if (output) *output = test_util::read_file(log);
    std::filesystem::remove(log);
    return WEXITSTATUS(status);
}

// One small scene directory shared by the whole suite.
struct Fixture {
    TempDir dir{"cli"};
    std::string root;

    Fixture() {
        root = dir.path().string();
        const int code =
            run("synth --seed 2 --num-gaussians 30 --num-classes 4 --extent 3 "
                "--num-cameras 6 --image-size 24 --write-images --out-dir " +
                root + "/scene");
        REQUIRE(code == 0);
    }
    std::string scene() const { return root + "/scene/scene.ply"; }
    std::string cameras() const { return root + "/scene/cameras.json"; }
};

} // namespace

TEST_CASE("cli: synth emits a loadable scene directory") {
    Fixture fx;
    const GaussianCloud cloud = load_gaussian_ply(fx.scene());
    CHECK(cloud.size() == 30);
    const auto cams = load_cameras(fx.cameras());
    REQUIRE(cams.size() == 6);
    for (const auto& cam : cams) {
        CHECK(!cam.label_path.empty());
        CHECK(!cam.image_path.empty());
    }
    const LabelImage labels = load_label_image(fx.root + "/scene/labels/label_0000.png", 4);
    CHECK(labels.width == 24);

    std::ifstream csv(fx.root + "/scene/categories.csv");
    std::string header;
    std::getline(csv, header);
    CHECK(header == "index,category");
    int rows = 0;
    std::string line;
    while (std::getline(csv, line)) {
        if (!line.empty()) ++rows;
    }
    CHECK(rows == 30);
}

TEST_CASE("cli: fuse then render round trip") {
    Fixture fx;
    std::string out;
    int code = run("fuse --scene " + fx.scene() + " --cameras " + fx.cameras() +
                       " --num-classes 4 --state-out " + fx.root + "/state.cssd",
                   &out);
    CHECK(code == 0);
    CHECK(out.find("view 6/6") != std::string::npos);
    CHECK(out.find("accumulated_mass=") != std::string::npos);

    const SemanticState state = load_semantic_state(fx.root + "/state.cssd");
    CHECK(state.num_gaussians == 30);
    CHECK(state.num_classes == 4);
    CHECK(total_accumulated_mass(state) > 0.0);

    code = run("render --scene " + fx.scene() + " --state " + fx.root +
                   "/state.cssd --cameras " + fx.cameras() +
                   " --view-index 0 --render-color --color-pfm --out-dir " + fx.root +
                   "/render",
               &out);
    CHECK(code == 0);
    CHECK(out.find("u_var=") != std::string::npos);
    CHECK(out.find("u_exp=") != std::string::npos);
    for (const char* name :
         {"argmax.png", "argmax_color.png", "expectation_c00.pfm", "expectation_c03.pfm",
          "variance_c00.pfm", "background.pfm", "confidence.pfm", "top_expectation.pfm",
          "top_variance.pfm", "color.png"}) {
        CHECK(std::filesystem::exists(fx.root + "/render/" + name));
    }
    // The raw float render quantizes to exactly the bytes of the PNG.
    const ImageF raw = read_pfm(fx.root + "/render/color.pfm");
    const ImageU8 png = read_png(fx.root + "/render/color.png");
    REQUIRE(raw.channels == 3);
    CHECK(quantize_to_u8(raw).data == png.data);
}

TEST_CASE("cli: render on a fresh prior state is uniform") {
    Fixture fx;
    // Zero views: the prior state is written untouched, with a warning.
    save_cameras(fx.root + "/none.json", {});
    std::string out;
    int code = run("fuse --scene " + fx.scene() + " --cameras " + fx.root +
                       "/none.json --num-classes 4 --state-out " + fx.root + "/prior.cssd",
                   &out);
    CHECK(code == 0);
    CHECK(out.find("warning") != std::string::npos);

    code = run("render --scene " + fx.scene() + " --state " + fx.root +
                   "/prior.cssd --cameras " + fx.cameras() + " --view-index 0 --out-dir " +
                   fx.root + "/prior_render",
               &out);
    CHECK(code == 0);
    // Uniform expectation: u_exp = 1 - 1/C = 0.75.
    CHECK(out.find("u_exp=0.75") != std::string::npos);
}

TEST_CASE("cli: eval reports a perfect score against itself") {
    Fixture fx;
    const std::string gt = fx.root + "/scene/labels/label_0001.png";
    std::string out;
    const int code =
        run("eval --pred " + gt + " --gt " + gt + " --num-classes 4", &out);
    CHECK(code == 0);
    const auto report = nlohmann::json::parse(out);
    CHECK(report["miou"].get<double>() == 1.0);
    CHECK(report["accuracy"].get<double>() == 1.0);
    CHECK(report["confusion"].is_array());
}

TEST_CASE("cli: sparsify oracle curve is monotone") {
    Fixture fx;
    // Build input maps from a render against ground truth.
    REQUIRE(run("fuse --scene " + fx.scene() + " --cameras " + fx.cameras() +
                " --num-classes 4 --state-out " + fx.root + "/state.cssd") == 0);
    REQUIRE(run("render --scene " + fx.scene() + " --state " + fx.root +
                "/state.cssd --cameras " + fx.cameras() + " --view-index 1 --out-dir " +
                fx.root + "/r1") == 0);

    const ImageU8 pred = read_png(fx.root + "/r1/argmax.png");
    const LabelImage gt = load_label_image(fx.root + "/scene/labels/label_0001.png", 4);
    ImageU8 errors(pred.width, pred.height, 1, 0);
    for (std::size_t i = 0; i < pred.data.size(); ++i) {
        errors.data[i] = (gt.category_ids[i] != kIgnoreLabel &&
                          pred.data[i] != gt.category_ids[i])
                             ? 1
                             : 0;
    }
    write_png(fx.root + "/errors.png", errors);

    const int code = run("sparsify --uncertainty " + fx.root +
                         "/r1/top_variance.pfm --errors " + fx.root +
                         "/errors.png --bins 8 --orderings oracle --out " + fx.root +
                         "/curve.csv");
    CHECK(code == 0);

    std::ifstream csv(fx.root + "/curve.csv");
    std::string header;
    std::getline(csv, header);
    CHECK(header == "fraction_removed,oracle");
    double prev = -1.0;
    std::string line;
    while (std::getline(csv, line)) {
        if (line.empty()) continue;
        const auto comma = line.find(',');
        const double value = std::stod(line.substr(comma + 1));
        CHECK(value >= prev);
        prev = value;
    }
}

TEST_CASE("cli: sparsify image mode consumes uncertainty/psnr rows") {
    TempDir dir("cli_sparsify_img");
    const std::string root = dir.path().string();
    test_util::write_file(root + "/values.csv",
                          "uncertainty,psnr\n0.9,10\n0.5,20\n0.1,30\n0.7,15\n");
    REQUIRE(run("sparsify --image --values " + root +
                "/values.csv --bins 4 --orderings by_uncertainty,oracle --out " + root +
                "/curve.csv") == 0);
    std::ifstream csv(root + "/curve.csv");
    std::string header, row;
    std::getline(csv, header);
    CHECK(header == "fraction_removed,by_uncertainty,oracle");
    int rows = 0;
    std::string last;
    while (std::getline(csv, row)) {
        if (!row.empty()) {
            last = row;
            ++rows;
        }
    }
    CHECK(rows == 4);
    // Uncertainty order equals inverse PSNR order here, so the final bin
    // holds the best image in both columns.
    CHECK(last.substr(last.find(',') + 1) == "30,30");
}

TEST_CASE("cli: eval honors masks and reports PSNR") {
    Fixture fx;
    const std::string gt = fx.root + "/scene/labels/label_0000.png";

    // A mask that keeps nothing yields an empty matrix -> dimension error.
    ImageU8 empty_mask(24, 24, 1, 0);
    write_png(fx.root + "/mask0.png", empty_mask);
    CHECK(run("eval --pred " + gt + " --gt " + gt + " --num-classes 4 --mask " + fx.root +
              "/mask0.png") == 3);

    ImageU8 full_mask(24, 24, 1, 1);
    write_png(fx.root + "/mask1.png", full_mask);
    std::string out;
    REQUIRE(run("eval --pred " + gt + " --gt " + gt + " --num-classes 4 --mask " + fx.root +
                    "/mask1.png --rendered " + fx.root + "/scene/images/view_0000.png" +
                    " --reference " + fx.root + "/scene/images/view_0000.png",
                &out) == 0);
    const auto report = nlohmann::json::parse(out);
    CHECK(report["accuracy"].get<double>() == 1.0);
    CHECK(report["psnr"].get<double>() == 99.0);   // identical images cap
}

TEST_CASE("cli: stable exit codes") {
    Fixture fx;
    SUBCASE("missing file is an I/O error (1)") {
        CHECK(run("fuse --scene /nonexistent.ply --cameras " + fx.cameras() +
                  " --num-classes 4 --state-out /tmp/x.cssd") == 1);
    }
    SUBCASE("malformed scene is a format error (2)") {
        test_util::write_file(fx.root + "/bad.ply", "not a ply at all");
        CHECK(run("fuse --scene " + fx.root + "/bad.ply --cameras " + fx.cameras() +
                  " --num-classes 4 --state-out /tmp/x.cssd") == 2);
    }
    SUBCASE("mismatched label dimensions are a dimension error (3)") {
        // Point one camera entry at a label image of the wrong size.
        auto cams = load_cameras(fx.cameras());
        LabelImage wrong;
        wrong.width = wrong.height = 64;
        wrong.category_ids.assign(64 * 64, 0);
        save_label_image(fx.root + "/wrong.png", wrong);
        cams[0].label_path = "../wrong.png";
        save_cameras(fx.root + "/scene/cams_bad.json", cams);
        CHECK(run("fuse --scene " + fx.scene() + " --cameras " + fx.root +
                  "/scene/cams_bad.json --num-classes 4 --state-out /tmp/x.cssd") == 3);
    }
    SUBCASE("unknown flag is a usage error (4)") {
        CHECK(run("fuse --nope") == 4);
        CHECK(run("frobnicate") == 4);
    }
    SUBCASE("--help exits 0") {
        CHECK(run("--help") == 0);
    }
}

TEST_CASE("cli: commands are idempotent and thread-count invariant") {
    Fixture fx;
    auto fuse_with = [&](const std::string& tag, int threads) {
        REQUIRE(run("fuse --scene " + fx.scene() + " --cameras " + fx.cameras() +
                    " --num-classes 4 --threads " + std::to_string(threads) +
                    " --state-out " + fx.root + "/" + tag + ".cssd") == 0);
        return test_util::read_file(fx.root + "/" + tag + ".cssd");
    };
    const std::string once = fuse_with("a", 1);
    const std::string twice = fuse_with("b", 1);
    CHECK(once == twice);   // idempotent

    CHECK(fuse_with("t2", 2) == once);
    CHECK(fuse_with("t8", 8) == once);

    auto render_with = [&](const std::string& tag, int threads) {
        REQUIRE(run("render --scene " + fx.scene() + " --state " + fx.root +
                    "/a.cssd --cameras " + fx.cameras() + " --view-index 2 --threads " +
                    std::to_string(threads) + " --out-dir " + fx.root + "/" + tag) == 0);
        return test_util::read_file(fx.root + "/" + tag + "/argmax.png") +
               test_util::read_file(fx.root + "/" + tag + "/variance_c01.pfm") +
               test_util::read_file(fx.root + "/" + tag + "/top_variance.pfm");
    };
    const std::string r1 = render_with("r1", 1);
    CHECK(render_with("r2", 2) == r1);
    CHECK(render_with("r8", 8) == r1);
}

TEST_CASE("cli: config file supplies defaults, flags win") {
    Fixture fx;
    std::ostringstream config;
    config << "[fuse]\n"
           << "scene = \"" << fx.scene() << "\"\n"
           << "cameras = \"" << fx.cameras() << "\"\n"
           << "num-classes = 4\n"
           << "prior = 0.5\n"
           << "state-out = \"" << fx.root << "/from_config.cssd\"\n";
    test_util::write_file(fx.root + "/run.conf", config.str());

    REQUIRE(run("--config " + fx.root + "/run.conf fuse") == 0);
    const SemanticState from_config = load_semantic_state(fx.root + "/from_config.cssd");
    CHECK(from_config.prior_value == 0.5);

    // The explicit flag overrides the config value.
    REQUIRE(run("--config " + fx.root + "/run.conf fuse --prior 0.25 --state-out " +
                fx.root + "/override.cssd") == 0);
    const SemanticState overridden = load_semantic_state(fx.root + "/override.cssd");
    CHECK(overridden.prior_value == 0.25);
}

TEST_CASE("cli: held-out view carries higher variance uncertainty") {
    // Fuse only a short arc of the ring; a camera opposite the arc must
    // report a higher u_var than a training camera.
    TempDir dir("cli_heldout");
    const std::string root = dir.path().string();
    REQUIRE(run("synth --seed 5 --num-gaussians 40 --num-classes 4 --extent 3 "
                "--num-cameras 12 --image-size 32 --out-dir " +
                root + "/scene") == 0);
    REQUIRE(run("fuse --scene " + root + "/scene/scene.ply --cameras " + root +
                "/scene/cameras.json --num-classes 4 --max-views 3 --state-out " + root +
                "/state.cssd") == 0);

    auto u_var_of = [&](int view) {
        std::string out;
        REQUIRE(run("render --scene " + root + "/scene/scene.ply --state " + root +
                        "/state.cssd --cameras " + root +
                        "/scene/cameras.json --view-index " + std::to_string(view) +
                        " --out-dir " + root + "/r" + std::to_string(view),
                    &out) == 0);
        const auto pos = out.find("u_var=");
        REQUIRE(pos != std::string::npos);
        return std::stod(out.substr(pos + 6));
    };
    const double training = u_var_of(1);    // inside the fused arc
    const double held_out = u_var_of(7);    // opposite side of the ring
    CHECK(held_out > training);
}

TEST_CASE("cli: fused predictions beat the noisy input labels") {
    // Same scene twice: clean labels as ground truth, 20%-noise labels as the
    // fusion input. The rendered argmax must out-score the raw noisy labels.
    TempDir dir("cli_smooth");
    const std::string root = dir.path().string();
    const std::string base = "synth --seed 6 --num-gaussians 40 --num-classes 4 "
                             "--extent 3 --num-cameras 10 --image-size 32 ";
    REQUIRE(run(base + "--noise 0.0 --out-dir " + root + "/clean") == 0);
    REQUIRE(run(base + "--noise 0.2 --out-dir " + root + "/noisy") == 0);
    REQUIRE(run("fuse --scene " + root + "/noisy/scene.ply --cameras " + root +
                "/noisy/cameras.json --num-classes 4 --state-out " + root +
                "/state.cssd") == 0);
    REQUIRE(run("render --scene " + root + "/noisy/scene.ply --state " + root +
                "/state.cssd --cameras " + root +
                "/noisy/cameras.json --view-index 4 --out-dir " + root + "/render") == 0);

    auto accuracy_of = [&](const std::string& pred) {
        std::string out;
        REQUIRE(run("eval --pred " + pred + " --gt " + root +
                        "/clean/labels/label_0004.png --num-classes 4",
                    &out) == 0);
        return nlohmann::json::parse(out)["accuracy"].get<double>();
    };
    const double fused = accuracy_of(root + "/render/argmax.png");
    const double noisy = accuracy_of(root + "/noisy/labels/label_0004.png");
    CHECK(noisy < 0.9);   // the input really is degraded
    CHECK(fused > noisy);
}

TEST_CASE("cli: interleaved maps stack channels into one PFM") {
    Fixture fx;
    REQUIRE(run("fuse --scene " + fx.scene() + " --cameras " + fx.cameras() +
                " --num-classes 4 --state-out " + fx.root + "/state.cssd") == 0);
    REQUIRE(run("render --scene " + fx.scene() + " --state " + fx.root +
                "/state.cssd --cameras " + fx.cameras() +
                " --view-index 0 --interleaved --out-dir " + fx.root + "/ri") == 0);
    const ImageF stacked = read_pfm(fx.root + "/ri/expectation.pfm");
    CHECK(stacked.width == 24);
    CHECK(stacked.height == 24 * 4);
    CHECK(!std::filesystem::exists(fx.root + "/ri/expectation_c00.pfm"));
}
