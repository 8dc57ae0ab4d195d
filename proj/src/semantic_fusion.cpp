#include "semsplat/semantic_fusion.hpp"

#include <cmath>

#include "semsplat/errors.hpp"

namespace semsplat {

SemanticState init_state(std::size_t num_gaussians, std::size_t num_classes,
                         double prior_value) {
    if (num_gaussians < 1) throw DimensionError("init_state: N must be >= 1");
    if (num_classes < 2) throw DimensionError("init_state: C must be >= 2");
    if (!(prior_value > 0.0) || !std::isfinite(prior_value)) {
        throw DimensionError("init_state: prior must be positive");
    }
    SemanticState state;
    state.num_gaussians = num_gaussians;
    state.num_classes = num_classes;
    state.prior_value = prior_value;
    state.background.assign(num_classes, prior_value);
    state.concentrations.assign(num_gaussians * num_classes, prior_value);
    return state;
}

DirichletMoments dirichlet_moments(std::span<const double> concentration_row) {
    if (concentration_row.empty()) {
        throw DimensionError("dirichlet_moments: empty concentration vector");
    }
    double sum = 0.0;
    for (double a : concentration_row) {
        if (!(a > 0.0) || !std::isfinite(a)) {
            throw DimensionError("dirichlet_moments: concentrations must be > 0");
        }
        sum += a;
    }
    DirichletMoments m;
    m.expectation.resize(concentration_row.size());
    m.variance.resize(concentration_row.size());
    const double inv_sum = 1.0 / sum;
    const double inv_denom = 1.0 / (1.0 + sum);
    for (std::size_t c = 0; c < concentration_row.size(); ++c) {
        const double e = concentration_row[c] * inv_sum;
        m.expectation[c] = e;
        m.variance[c] = e * (1.0 - e) * inv_denom;
    }
    return m;
}

void fuse_view(SemanticState& state, const GaussianCloud& cloud,
               const CameraView& cam, const LabelImage& labels,
               const RasterConfig& config) {
    if (state.num_gaussians != cloud.size()) {
        throw DimensionError("fuse_view: state rows do not match cloud size");
    }
    if (labels.width != cam.width || labels.height != cam.height) {
        throw DimensionError("fuse_view: label image does not match camera dimensions");
    }

    const PixelContributionMap contribs = pixel_contributions(cloud, cam, config);

    // Serial application in row-major pixel order keeps the accumulation
    // sequence independent of the thread count.
    const std::size_t num_classes = state.num_classes;
    for (std::size_t p = 0; p < labels.category_ids.size(); ++p) {
        const std::uint8_t label = labels.category_ids[p];
        if (label == kIgnoreLabel) continue;
        if (label >= num_classes) {
            throw DimensionError("fuse_view: label value exceeds num_classes");
        }
        const std::uint32_t lo = contribs.offsets[p];
        const std::uint32_t hi = contribs.offsets[p + 1];
        for (std::uint32_t k = lo; k < hi; ++k) {
            const PixelContribution& c = contribs.entries[k];
            state.concentrations[static_cast<std::size_t>(c.gaussian_index) * num_classes +
                                 label] += c.kappa;
        }
    }
}

void fuse_dataset(SemanticState& state, const GaussianCloud& cloud,
                  std::span<const CameraView> cams,
                  std::span<const LabelImage> labels,
                  const RasterConfig& config) {
    if (cams.size() != labels.size()) {
        throw DimensionError("fuse_dataset: camera and label counts disagree");
    }
    for (std::size_t v = 0; v < cams.size(); ++v) {
        fuse_view(state, cloud, cams[v], labels[v], config);
    }
}

double observation_mass(const SemanticState& state, std::size_t n) {
    if (n >= state.num_gaussians) throw DimensionError("observation_mass: row out of range");
    double sum = 0.0;
    for (std::size_t c = 0; c < state.num_classes; ++c) sum += state.at(n, c);
    return sum;
}

double total_accumulated_mass(const SemanticState& state) {
    double sum = 0.0;
    for (double a : state.concentrations) sum += a - state.prior_value;
    return sum;
}

} // namespace semsplat
