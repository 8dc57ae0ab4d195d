#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "semsplat/types.hpp"

namespace semsplat {

// Compositing constants shared by the tiled rasterizer, composite_weights and
// every brute-force oracle. Values follow the reference splatting stack.
inline constexpr double kCovarianceDilation = 0.3;          // px^2, low-pass
inline constexpr double kAlphaClamp = 0.99;
inline constexpr double kAlphaSkipThreshold = 1.0 / 255.0;
inline constexpr double kTransmittanceStop = 1e-4;

// Screen extent of a splat in units of sigma. Past this radius alpha' drops
// below kAlphaSkipThreshold for any opacity < 1, so binning at this extent
// loses nothing relative to an unculled per-pixel pass.
double extent_sigma();

struct Splat2D {
    int gaussian_index = -1;
    Eigen::Vector2d mean2d = Eigen::Vector2d::Zero();   // pixels
    Eigen::Matrix2d cov2d = Eigen::Matrix2d::Zero();    // pixels^2, dilated
    double view_depth = 0.0;                            // camera z, meters
    double opacity = 0.0;
};

struct PixelContribution {
    int gaussian_index = -1;
    double kappa = 0.0;    // compositing weight in [0,1]
};

// Per-pixel compositing input: depth-sorted opacity-times-kernel samples.
struct SplatSample {
    int gaussian_index = -1;
    double view_depth = 0.0;
    double alpha_prime = 0.0;
};

struct RasterConfig {
    int tile_size = 16;
    int num_threads = 1;   // 0 = all logical cores
};

// Projects gaussian `index` to a 2D splat. Returns nullopt when the center
// depth is outside (near, far). No screen-bounds culling here.
std::optional<Splat2D> project_splat(const GaussianCloud& cloud, int index,
                                     const CameraView& cam);

// All splats with a valid depth whose screen extent touches the image,
// in input order. Sorting is the caller's concern.
std::vector<Splat2D> project_splats(const GaussianCloud& cloud, const CameraView& cam);

// Binning/culling radius in pixels: extent_sigma() times the largest
// standard deviation of cov2d.
double splat_extent_radius(const Splat2D& splat);

// exp(-0.5 d^T cov2d^{-1} d); 1.0 exactly at the splat center.
double kernel_eval(const Splat2D& splat, const Eigen::Vector2d& pixel);

struct CompositeResult {
    std::vector<PixelContribution> contributions;
    double background_weight = 0.0;
};

// Front-to-back alpha compositing over one pixel. Samples must be sorted by
// ascending view_depth (DimensionError otherwise). alpha' is clamped to
// [0, 0.99]; samples below 1/255 are skipped; traversal stops before the
// sample that would push transmittance below 1e-4.
CompositeResult composite_weights(std::span<const SplatSample> samples);

// Per-pixel contribution lists for a whole view, flattened row-major.
struct PixelContributionMap {
    int width = 0;
    int height = 0;
    std::vector<std::uint32_t> offsets;        // size W*H+1
    std::vector<PixelContribution> entries;    // depth-ordered per pixel
    ImageF background;                         // H x W

    std::span<const PixelContribution> at(int x, int y) const {
        const std::size_t p = static_cast<std::size_t>(y) * width + x;
        return {entries.data() + offsets[p], offsets[p + 1] - offsets[p]};
    }
};

PixelContributionMap pixel_contributions(const GaussianCloud& cloud,
                                         const CameraView& cam,
                                         const RasterConfig& config = {});

// Alpha-composited color render, 3 channels in [0,1].
ImageF render_color(const GaussianCloud& cloud, const CameraView& cam,
                    const Eigen::Vector3d& background_color,
                    const RasterConfig& config = {});

} // namespace semsplat
