#include "semsplat/splat_raster.hpp"

#include <algorithm>
#include <cmath>

#include "raster_engine.hpp"
#include "semsplat/errors.hpp"

namespace semsplat {

double extent_sigma() {
    // Radius where exp(-r^2/2) falls below the 1/255 skip threshold.
    static const double v = std::sqrt(2.0 * std::log(255.0));
    return v;
}

std::optional<Splat2D> project_splat(const GaussianCloud& cloud, int index,
                                     const CameraView& cam) {
    const Eigen::Vector3d p = cam.world_to_camera(cloud.positions[index]);
    const double z = p.z();
    if (!(z > cam.near_plane && z < cam.far_plane)) return std::nullopt;

    Splat2D splat;
    splat.gaussian_index = index;
    splat.view_depth = z;
    splat.opacity = cloud.opacities[index];
    splat.mean2d = {cam.fx * p.x() / z + cam.cx, cam.fy * p.y() / z + cam.cy};

    // Local affine approximation of the pinhole map, with the point clamped
    // to 1.3x the field of view so the Jacobian stays bounded at the fringe.
    const double lim_x = 1.3 * (0.5 * cam.width / cam.fx);
    const double lim_y = 1.3 * (0.5 * cam.height / cam.fy);
    const double tx = std::clamp(p.x() / z, -lim_x, lim_x) * z;
    const double ty = std::clamp(p.y() / z, -lim_y, lim_y) * z;

    Eigen::Matrix<double, 2, 3> jacobian;
    jacobian << cam.fx / z, 0.0, -cam.fx * tx / (z * z),
                0.0, cam.fy / z, -cam.fy * ty / (z * z);

    const Eigen::Matrix3d rot = cloud.rotations[index].toRotationMatrix();
    const Eigen::Matrix3d cov_world =
        rot * cloud.scales[index].cwiseProduct(cloud.scales[index]).asDiagonal() *
        rot.transpose();

    const Eigen::Matrix<double, 2, 3> m = jacobian * cam.rotation().transpose();
    Eigen::Matrix2d cov = m * cov_world * m.transpose();
    const double off = 0.5 * (cov(0, 1) + cov(1, 0));
    cov(0, 1) = cov(1, 0) = off;
    cov(0, 0) += kCovarianceDilation;
    cov(1, 1) += kCovarianceDilation;
    splat.cov2d = cov;
    return splat;
}

double splat_extent_radius(const Splat2D& splat) {
    const double a = splat.cov2d(0, 0), b = splat.cov2d(0, 1), c = splat.cov2d(1, 1);
    const double mid = 0.5 * (a + c);
    const double lambda_max = mid + std::sqrt(std::max(0.0, mid * mid - (a * c - b * b)));
    return extent_sigma() * std::sqrt(std::max(0.0, lambda_max));
}

std::vector<Splat2D> project_splats(const GaussianCloud& cloud, const CameraView& cam) {
    std::vector<Splat2D> out;
    out.reserve(cloud.size());
    for (int i = 0; i < static_cast<int>(cloud.size()); ++i) {
        auto splat = project_splat(cloud, i, cam);
        if (!splat) continue;
        // Keep only splats whose screen extent can reach a pixel sample.
        const double r = splat_extent_radius(*splat);
        if (splat->mean2d.x() + r < 0.0 || splat->mean2d.x() - r > cam.width - 1 ||
            splat->mean2d.y() + r < 0.0 || splat->mean2d.y() - r > cam.height - 1) {
            continue;
        }
        out.push_back(*splat);
    }
    return out;
}

double kernel_eval(const Splat2D& splat, const Eigen::Vector2d& pixel) {
    const double det = splat.cov2d(0, 0) * splat.cov2d(1, 1) -
                       splat.cov2d(0, 1) * splat.cov2d(1, 0);
    if (!(det > 0.0)) throw DimensionError("kernel_eval: cov2d not invertible");
    const detail::Conic conic = detail::conic_of(splat.cov2d);
    const double dx = pixel.x() - splat.mean2d.x();
    const double dy = pixel.y() - splat.mean2d.y();
    const double q = conic.a * dx * dx + 2.0 * conic.b * dx * dy + conic.c * dy * dy;
    return std::exp(-0.5 * std::max(0.0, q));
}

CompositeResult composite_weights(std::span<const SplatSample> samples) {
    for (std::size_t i = 1; i < samples.size(); ++i) {
        if (samples[i].view_depth < samples[i - 1].view_depth) {
            throw DimensionError("composite_weights: samples not sorted by depth");
        }
    }
    CompositeResult result;
    double transmittance = 1.0;
    double sum_kappa = 0.0;
    for (const SplatSample& s : samples) {
        const double alpha = std::max(0.0, s.alpha_prime);
        bool stop = false;
        const double kappa = detail::composite_step(alpha, transmittance, stop);
        if (stop) break;
        if (kappa < 0.0) continue;
        result.contributions.push_back({s.gaussian_index, kappa});
        sum_kappa += kappa;
    }
    result.background_weight = std::clamp(1.0 - sum_kappa, 0.0, 1.0);
    return result;
}

PixelContributionMap pixel_contributions(const GaussianCloud& cloud,
                                         const CameraView& cam,
                                         const RasterConfig& config) {
    validate_camera(cam);
    const detail::RasterEngine engine(cloud, cam, config);

    // Phase 1 (parallel): per-tile arenas of depth-ordered entries.
    struct TileArena {
        std::vector<PixelContribution> entries;
        std::vector<std::uint32_t> offsets;      // local pixel count + 1
        std::vector<double> background;          // per local pixel
    };
    std::vector<TileArena> arenas(engine.tile_count());
    parallel_for(resolve_thread_count(config.num_threads), engine.tile_count(),
                 [&](std::size_t begin, std::size_t end) {
                     std::vector<PixelContribution> scratch;
                     for (std::size_t t = begin; t < end; ++t) {
                         TileArena& arena = arenas[t];
                         arena.offsets.push_back(0);
                         engine.sweep_tile(t, scratch,
                                           [&](int, int, std::span<const PixelContribution> c,
                                               double bg) {
                                               arena.entries.insert(arena.entries.end(),
                                                                    c.begin(), c.end());
                                               arena.offsets.push_back(
                                                   static_cast<std::uint32_t>(arena.entries.size()));
                                               arena.background.push_back(bg);
                                           });
                     }
                 });

    PixelContributionMap map;
    map.width = cam.width;
    map.height = cam.height;
    map.background = ImageF(cam.width, cam.height, 1);
    map.offsets.assign(cam.pixel_count() + 1, 0);

    std::size_t total = 0;
    for (const auto& arena : arenas) total += arena.entries.size();
    map.entries.reserve(total);

    // Phase 2 (serial): stitch per-tile arenas into row-major order.
    for (int y = 0; y < cam.height; ++y) {
        for (int x = 0; x < cam.width; ++x) {
            const std::size_t t = engine.tile_index_of(x, y);
            const detail::RasterEngine::TileRect rect = engine.tile_rect(t);
            const std::size_t local =
                static_cast<std::size_t>(y - rect.y0) * (rect.x1 - rect.x0) + (x - rect.x0);
            const TileArena& arena = arenas[t];
            const std::uint32_t lo = arena.offsets[local];
            const std::uint32_t hi = arena.offsets[local + 1];
            map.entries.insert(map.entries.end(), arena.entries.begin() + lo,
                               arena.entries.begin() + hi);
            const std::size_t p = static_cast<std::size_t>(y) * cam.width + x;
            map.offsets[p + 1] = static_cast<std::uint32_t>(map.entries.size());
            map.background.at(x, y) = arena.background[local];
        }
    }
    return map;
}

ImageF render_color(const GaussianCloud& cloud, const CameraView& cam,
                    const Eigen::Vector3d& background_color,
                    const RasterConfig& config) {
    validate_camera(cam);
    const detail::RasterEngine engine(cloud, cam, config);
    ImageF image(cam.width, cam.height, 3);
    engine.sweep([&](int x, int y, std::span<const PixelContribution> contribs,
                     double background) {
        Eigen::Vector3d color = Eigen::Vector3d::Zero();
        for (const PixelContribution& c : contribs) {
            color += c.kappa * cloud.base_colors[c.gaussian_index];
        }
        color += background * background_color;
        image.at(x, y, 0) = color.x();
        image.at(x, y, 1) = color.y();
        image.at(x, y, 2) = color.z();
    });
    return image;
}

} // namespace semsplat
