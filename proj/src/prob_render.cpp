#include "semsplat/prob_render.hpp"

#include <cmath>

#include "raster_engine.hpp"
#include "semsplat/errors.hpp"

namespace semsplat {

namespace {

constexpr double kLogEpsilon = 1e-12;   // guards log(Var = 0)

// N x C moment tables, one dirichlet_moments pass per gaussian.
struct MomentTable {
    std::vector<double> expectation;
    std::vector<double> variance;
};

MomentTable per_gaussian_moments(const SemanticState& state) {
    MomentTable table;
    table.expectation.resize(state.concentrations.size());
    table.variance.resize(state.concentrations.size());
    const std::size_t c = state.num_classes;
    for (std::size_t n = 0; n < state.num_gaussians; ++n) {
        const DirichletMoments m = dirichlet_moments(state.row(n));
        std::copy(m.expectation.begin(), m.expectation.end(),
                  table.expectation.begin() + n * c);
        std::copy(m.variance.begin(), m.variance.end(), table.variance.begin() + n * c);
    }
    return table;
}

} // namespace

PixelDistributionMaps rasterize_semantics(const SemanticState& state,
                                          const GaussianCloud& cloud,
                                          const CameraView& cam,
                                          const RasterConfig& config) {
    if (state.num_gaussians != cloud.size()) {
        throw DimensionError("rasterize_semantics: state rows do not match cloud size");
    }
    validate_camera(cam);

    const std::size_t num_classes = state.num_classes;
    const MomentTable table = per_gaussian_moments(state);
    const DirichletMoments background = dirichlet_moments(state.background);

    PixelDistributionMaps maps;
    maps.num_classes = static_cast<int>(num_classes);
    maps.expectation = ImageF(cam.width, cam.height, static_cast<int>(num_classes));
    maps.variance = ImageF(cam.width, cam.height, static_cast<int>(num_classes));
    maps.background_weight = ImageF(cam.width, cam.height, 1);
    maps.argmax_category = ImageU8(cam.width, cam.height, 1);
    maps.top_expectation = ImageF(cam.width, cam.height, 1);
    maps.top_variance = ImageF(cam.width, cam.height, 1);

    const detail::RasterEngine engine(cloud, cam, config);
    engine.sweep([&](int x, int y, std::span<const PixelContribution> contribs,
                     double bg_weight) {
        const std::size_t base =
            (static_cast<std::size_t>(y) * cam.width + x) * num_classes;
        double* exp_px = maps.expectation.data.data() + base;
        double* var_px = maps.variance.data.data() + base;
        for (std::size_t c = 0; c < num_classes; ++c) {
            exp_px[c] = bg_weight * background.expectation[c];
            var_px[c] = bg_weight * bg_weight * background.variance[c];
        }
        for (const PixelContribution& pc : contribs) {
            const double kappa = pc.kappa;
            const double kappa_sq = kappa * kappa;
            const double* e_row =
                table.expectation.data() + static_cast<std::size_t>(pc.gaussian_index) * num_classes;
            const double* v_row =
                table.variance.data() + static_cast<std::size_t>(pc.gaussian_index) * num_classes;
            for (std::size_t c = 0; c < num_classes; ++c) {
                exp_px[c] += kappa * e_row[c];
                var_px[c] += kappa_sq * v_row[c];
            }
        }

        std::size_t best = 0;
        for (std::size_t c = 1; c < num_classes; ++c) {
            if (exp_px[c] > exp_px[best]) best = c;   // ties keep the lowest index
        }
        maps.background_weight.at(x, y) = bg_weight;
        maps.argmax_category.at(x, y) = static_cast<std::uint8_t>(best);
        maps.top_expectation.at(x, y) = exp_px[best];
        maps.top_variance.at(x, y) = var_px[best];
    });
    return maps;
}

double image_uncertainty_from_variance(const PixelDistributionMaps& maps) {
    const std::size_t n = maps.top_variance.pixel_count();
    if (n == 0) throw DimensionError("image uncertainty of an empty image");
    double log_sum = 0.0;
    for (double v : maps.top_variance.data) log_sum += std::log(v + kLogEpsilon);
    return std::exp(log_sum / static_cast<double>(n));
}

double image_uncertainty_from_expectation(const PixelDistributionMaps& maps) {
    const std::size_t n = maps.top_expectation.pixel_count();
    if (n == 0) throw DimensionError("image uncertainty of an empty image");
    double sum = 0.0;
    for (double e : maps.top_expectation.data) sum += e;
    return 1.0 - sum / static_cast<double>(n);
}

ImageUncertainty image_uncertainty(const PixelDistributionMaps& maps) {
    return {image_uncertainty_from_variance(maps),
            image_uncertainty_from_expectation(maps)};
}

ImageF pixel_confidence_heuristic(const SemanticState& state,
                                  const GaussianCloud& cloud,
                                  const CameraView& cam,
                                  const RasterConfig& config) {
    if (state.num_gaussians != cloud.size()) {
        throw DimensionError("pixel_confidence_heuristic: state rows do not match cloud");
    }
    validate_camera(cam);

    std::vector<double> mass(state.num_gaussians);
    for (std::size_t n = 0; n < state.num_gaussians; ++n) mass[n] = observation_mass(state, n);

    ImageF confidence(cam.width, cam.height, 1);
    const detail::RasterEngine engine(cloud, cam, config);
    engine.sweep([&](int x, int y, std::span<const PixelContribution> contribs, double) {
        double sum_kappa = 0.0;
        double weighted = 0.0;
        for (const PixelContribution& pc : contribs) {
            sum_kappa += pc.kappa;
            weighted += pc.kappa * mass[pc.gaussian_index];
        }
        confidence.at(x, y) = sum_kappa > 0.0 ? weighted / sum_kappa : 0.0;
    });
    return confidence;
}

} // namespace semsplat
