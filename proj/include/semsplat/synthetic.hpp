#pragma once

#include <cstdint>
#include <vector>

#include "semsplat/prob_render.hpp"
#include "semsplat/semantic_fusion.hpp"
#include "semsplat/splat_raster.hpp"
#include "semsplat/types.hpp"

namespace semsplat {

// Fully-known scene for oracle-based testing: every gaussian carries a
// ground-truth category, and a camera ring observes the bounding sphere.
struct SyntheticScene {
    GaussianCloud cloud;
    std::vector<std::uint8_t> gaussian_categories;
    std::vector<CameraView> cameras;
    std::uint64_t seed = 0;
    int num_classes = 0;
    double extent = 0.0;
};

struct SceneParams {
    int num_cameras = 20;
    int image_size = 64;
    double ring_radius_factor = 1.8;    // times extent
    double ring_height_factor = 0.4;    // times extent
};

// Deterministic per seed across platforms (randomness is hand-rolled from
// mt19937_64 words). Positions uniform in a centered box, scales log-uniform
// in [0.02, 0.3]*extent, opacities uniform in [0.5, 0.95], rotations uniform
// on the quaternion sphere, colors keyed to category via the fixed palette.
SyntheticScene generate_scene(std::uint64_t seed, int num_gaussians,
                              int num_classes, double extent,
                              const SceneParams& params = {});

// Simulated segmentation output: per pixel, the category of the gaussian with
// the largest compositing weight; background-dominated pixels (kappa_b > 0.5)
// get kIgnoreLabel. With probability noise_rate the label is resampled
// uniformly over the other C-1 categories. Requires 0 <= noise_rate < 1.
LabelImage render_labels_oracle(const SyntheticScene& scene, const CameraView& cam,
                                double noise_rate, std::uint64_t seed);

struct BruteForceRender {
    ImageF color;                    // H x W x 3
    PixelContributionMap contributions;
};

// Literal per-pixel transcription of the splatting equations: every gaussian
// with a valid depth is evaluated at every pixel, no tiling, no screen
// culling, same clamping constants as the tiled path. N <= 500 enforced.
BruteForceRender brute_force_render(const GaussianCloud& cloud, const CameraView& cam,
                                    const Eigen::Vector3d& background_color);

// Triple-loop reference for fuse_view. Returns the updated copy.
SemanticState brute_force_fuse(const SemanticState& state, const GaussianCloud& cloud,
                               const CameraView& cam, const LabelImage& labels);

// Triple-loop reference for rasterize_semantics.
PixelDistributionMaps brute_force_rasterize(const SemanticState& state,
                                            const GaussianCloud& cloud,
                                            const CameraView& cam);

} // namespace semsplat
