#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "semsplat/splat_raster.hpp"
#include "semsplat/types.hpp"

namespace semsplat {

// Fused Dirichlet belief over the scene: one concentration row per gaussian.
// Concentrations are pseudo-counts; they start at prior_value and only grow.
// Stored in double — fusion is millions of small additive increments.
struct SemanticState {
    std::size_t num_gaussians = 0;
    std::size_t num_classes = 0;
    double prior_value = 0.0;
    std::vector<double> background;       // length C, > 0
    std::vector<double> concentrations;   // N x C row-major, >= prior_value

    double at(std::size_t n, std::size_t c) const {
        return concentrations[n * num_classes + c];
    }
    double& at(std::size_t n, std::size_t c) {
        return concentrations[n * num_classes + c];
    }
    std::span<const double> row(std::size_t n) const {
        return {concentrations.data() + n * num_classes, num_classes};
    }
};

struct DirichletMoments {
    std::vector<double> expectation;   // sums to 1
    std::vector<double> variance;      // in [0, 0.25]
};

// Uniform prior state: every concentration and background entry = prior_value.
// Requires N >= 1, C >= 2, prior_value > 0.
SemanticState init_state(std::size_t num_gaussians, std::size_t num_classes,
                         double prior_value);

// E_c = a_c / sum(a), Var_c = E_c (1 - E_c) / (1 + sum(a)). Entries must be > 0.
DirichletMoments dirichlet_moments(std::span<const double> concentration_row);

// One labeled view folded into the belief: for every non-ignore pixel with
// category c and every contributing splat n, concentrations[n][c] += kappa.
// Contribution lists are computed in parallel; increments are applied serially
// in row-major pixel order, so the result is identical for any thread count.
void fuse_view(SemanticState& state, const GaussianCloud& cloud,
               const CameraView& cam, const LabelImage& labels,
               const RasterConfig& config = {});

// Sequential fuse_view over paired views/labels.
void fuse_dataset(SemanticState& state, const GaussianCloud& cloud,
                  std::span<const CameraView> cams,
                  std::span<const LabelImage> labels,
                  const RasterConfig& config = {});

// Dirichlet normalization constant of row n: sum_c concentrations[n][c].
double observation_mass(const SemanticState& state, std::size_t n);

// Evidence accumulated beyond the prior, summed over the whole state.
double total_accumulated_mass(const SemanticState& state);

} // namespace semsplat
