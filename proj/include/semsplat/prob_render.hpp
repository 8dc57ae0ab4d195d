#pragma once

#include "semsplat/semantic_fusion.hpp"
#include "semsplat/splat_raster.hpp"
#include "semsplat/types.hpp"

namespace semsplat {

// Per-pixel Dirichlet mixture moments plus derived argmax layers.
struct PixelDistributionMaps {
    int num_classes = 0;
    ImageF expectation;         // H x W x C, simplex per pixel
    ImageF variance;            // H x W x C, >= 0
    ImageF background_weight;   // H x W
    ImageU8 argmax_category;    // H x W, ties -> lowest index
    ImageF top_expectation;     // H x W, expectation at argmax
    ImageF top_variance;        // H x W, variance at argmax
};

struct ImageUncertainty {
    double u_var = 0.0;   // geometric mean of top_variance
    double u_exp = 0.0;   // 1 - mean top_expectation
};

// Blends per-gaussian Dirichlet moments through the compositing weights:
// E(pixel) = sum kappa_n E_n + kappa_b E_b, Var(pixel) = sum kappa_n^2 Var_n
// + kappa_b^2 Var_b, with the background treated as one more ellipsoid whose
// moments come from Dir(state.background). Per-gaussian moments are computed
// once per call, not per pixel.
PixelDistributionMaps rasterize_semantics(const SemanticState& state,
                                          const GaussianCloud& cloud,
                                          const CameraView& cam,
                                          const RasterConfig& config = {});

// exp(mean log(top_variance + 1e-12)). DimensionError on an empty map.
double image_uncertainty_from_variance(const PixelDistributionMaps& maps);

// 1 - mean(top_expectation). DimensionError on an empty map.
double image_uncertainty_from_expectation(const PixelDistributionMaps& maps);

ImageUncertainty image_uncertainty(const PixelDistributionMaps& maps);

// Observation-count heuristic: per pixel, the kappa-weighted average of the
// contributing rows' Dirichlet normalization constants; 0 with no splats.
ImageF pixel_confidence_heuristic(const SemanticState& state,
                                  const GaussianCloud& cloud,
                                  const CameraView& cam,
                                  const RasterConfig& config = {});

} // namespace semsplat
