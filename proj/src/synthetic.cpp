#include "semsplat/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "semsplat/errors.hpp"
#include "semsplat/image_io.hpp"

namespace semsplat {

namespace {

// Hand-rolled draws over mt19937_64 words so fixtures are bit-stable across
// standard libraries (std distributions are implementation-defined).
class Random {
public:
    explicit Random(std::uint64_t seed) : rng_(seed) {}

    double uniform() { return static_cast<double>(rng_() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    std::uint64_t integer(std::uint64_t n) { return rng_() % n; }

    Eigen::Quaterniond quaternion() {
        // Shoemake's subgroup method: uniform on the unit sphere in R^4.
        const double u1 = uniform(), u2 = uniform(), u3 = uniform();
        const double a = std::sqrt(1.0 - u1), b = std::sqrt(u1);
        const double t2 = 2.0 * M_PI * u2, t3 = 2.0 * M_PI * u3;
        return Eigen::Quaterniond(b * std::cos(t3), a * std::sin(t2),
                                  a * std::cos(t2), b * std::sin(t3));
    }

private:
    std::mt19937_64 rng_;
};

CameraView look_at(const Eigen::Vector3d& pos, const Eigen::Vector3d& target,
                   int image_size, double near_plane, double far_plane) {
    const Eigen::Vector3d forward = (target - pos).normalized();
    const Eigen::Vector3d world_up(0.0, 0.0, 1.0);
    Eigen::Vector3d right = world_up.cross(forward);
    if (right.norm() < 1e-9) right = Eigen::Vector3d::UnitX();   // looking straight up/down
    right.normalize();
    const Eigen::Vector3d down = forward.cross(right);

    CameraView cam;
    cam.width = cam.height = image_size;
    cam.fx = cam.fy = 0.9 * image_size;
    cam.cx = cam.cy = (image_size - 1) / 2.0;
    cam.near_plane = near_plane;
    cam.far_plane = far_plane;
    cam.camera_to_world = Eigen::Matrix4d::Identity();
    cam.camera_to_world.block<3, 1>(0, 0) = right;
    cam.camera_to_world.block<3, 1>(0, 1) = down;
    cam.camera_to_world.block<3, 1>(0, 2) = forward;
    cam.camera_to_world.block<3, 1>(0, 3) = pos;
    return cam;
}

} // namespace

SyntheticScene generate_scene(std::uint64_t seed, int num_gaussians, int num_classes,
                              double extent, const SceneParams& params) {
    if (num_gaussians < 1) throw DimensionError("generate_scene: N must be >= 1");
    if (num_classes < 2 || num_classes > 255) {
        throw DimensionError("generate_scene: C must be in [2, 255]");
    }
    if (!(extent > 0.0)) throw DimensionError("generate_scene: extent must be > 0");

    Random rng(seed);
    SyntheticScene scene;
    scene.seed = seed;
    scene.num_classes = num_classes;
    scene.extent = extent;

    const auto& palette = label_palette();
    const double half = 0.5 * extent;
    const double log_lo = std::log(0.02 * extent);
    const double log_hi = std::log(0.3 * extent);

    // Categories are spatially coherent, like objects: the box is carved into
    // C Voronoi cells and each gaussian takes the category of its cell.
    // IID categories would make every splat overlap a category conflict,
    // which no real scene exhibits.
    std::vector<Eigen::Vector3d> cell_centers;
    for (int c = 0; c < num_classes; ++c) {
        cell_centers.emplace_back(rng.uniform(-half, half), rng.uniform(-half, half),
                                  rng.uniform(-half, half));
    }

    for (int i = 0; i < num_gaussians; ++i) {
        const Eigen::Vector3d position(rng.uniform(-half, half), rng.uniform(-half, half),
                                       rng.uniform(-half, half));
        scene.cloud.positions.push_back(position);
        scene.cloud.rotations.push_back(rng.quaternion().normalized());
        scene.cloud.scales.emplace_back(std::exp(rng.uniform(log_lo, log_hi)),
                                        std::exp(rng.uniform(log_lo, log_hi)),
                                        std::exp(rng.uniform(log_lo, log_hi)));
        scene.cloud.opacities.push_back(rng.uniform(0.5, 0.95));

        std::uint8_t category = 0;
        double best = std::numeric_limits<double>::max();
        for (int c = 0; c < num_classes; ++c) {
            const double d2 = (position - cell_centers[c]).squaredNorm();
            if (d2 < best) {
                best = d2;
                category = static_cast<std::uint8_t>(c);
            }
        }
        scene.gaussian_categories.push_back(category);
        const auto& rgb = palette[category % palette.size()];
        scene.cloud.base_colors.emplace_back(rgb[0] / 255.0, rgb[1] / 255.0, rgb[2] / 255.0);
    }

    const double ring_radius = params.ring_radius_factor * extent;
    const double ring_height = params.ring_height_factor * extent;
    for (int k = 0; k < params.num_cameras; ++k) {
        const double angle = 2.0 * M_PI * k / params.num_cameras;
        const Eigen::Vector3d pos(ring_radius * std::cos(angle),
                                  ring_radius * std::sin(angle), ring_height);
        scene.cameras.push_back(look_at(pos, Eigen::Vector3d::Zero(), params.image_size,
                                        0.05 * extent, 100.0 * extent));
    }
    return scene;
}

namespace {

// Scalar re-derivation of the projection used by the oracles; deliberately
// free of the production code path.
struct OracleSplat {
    int index = -1;
    double depth = 0.0;
    double mean_x = 0.0, mean_y = 0.0;
    double inv_a = 0.0, inv_b = 0.0, inv_c = 0.0;
    double opacity = 0.0;
};

std::vector<OracleSplat> oracle_project(const GaussianCloud& cloud, const CameraView& cam) {
    double w2c[3][3];
    double cam_pos[3] = {cam.camera_to_world(0, 3), cam.camera_to_world(1, 3),
                         cam.camera_to_world(2, 3)};
    for (int r = 0; r < 3; ++r) {
        for (int c = 0; c < 3; ++c) w2c[r][c] = cam.camera_to_world(c, r);   // transpose
    }

    std::vector<OracleSplat> splats;
    for (int i = 0; i < static_cast<int>(cloud.size()); ++i) {
        double d[3] = {cloud.positions[i].x() - cam_pos[0],
                       cloud.positions[i].y() - cam_pos[1],
                       cloud.positions[i].z() - cam_pos[2]};
        double px = w2c[0][0] * d[0] + w2c[0][1] * d[1] + w2c[0][2] * d[2];
        double py = w2c[1][0] * d[0] + w2c[1][1] * d[1] + w2c[1][2] * d[2];
        double pz = w2c[2][0] * d[0] + w2c[2][1] * d[1] + w2c[2][2] * d[2];
        if (!(pz > cam.near_plane && pz < cam.far_plane)) continue;

        // Rotation matrix from the unit quaternion.
        const double qw = cloud.rotations[i].w(), qx = cloud.rotations[i].x();
        const double qy = cloud.rotations[i].y(), qz = cloud.rotations[i].z();
        double rot[3][3] = {
            {1 - 2 * (qy * qy + qz * qz), 2 * (qx * qy - qw * qz), 2 * (qx * qz + qw * qy)},
            {2 * (qx * qy + qw * qz), 1 - 2 * (qx * qx + qz * qz), 2 * (qy * qz - qw * qx)},
            {2 * (qx * qz - qw * qy), 2 * (qy * qz + qw * qx), 1 - 2 * (qx * qx + qy * qy)},
        };
        const double s0 = cloud.scales[i][0], s1 = cloud.scales[i][1], s2 = cloud.scales[i][2];
        double cov_world[3][3];
        for (int r = 0; r < 3; ++r) {
            for (int c = 0; c < 3; ++c) {
                cov_world[r][c] = rot[r][0] * s0 * s0 * rot[c][0] +
                                  rot[r][1] * s1 * s1 * rot[c][1] +
                                  rot[r][2] * s2 * s2 * rot[c][2];
            }
        }

        const double lim_x = 1.3 * (0.5 * cam.width / cam.fx);
        const double lim_y = 1.3 * (0.5 * cam.height / cam.fy);
        const double tx = std::clamp(px / pz, -lim_x, lim_x) * pz;
        const double ty = std::clamp(py / pz, -lim_y, lim_y) * pz;
        const double jac[2][3] = {
            {cam.fx / pz, 0.0, -cam.fx * tx / (pz * pz)},
            {0.0, cam.fy / pz, -cam.fy * ty / (pz * pz)},
        };

        // m = jac * w2c (2x3), cov2d = m * cov_world * m^T + dilation.
        double m[2][3];
        for (int r = 0; r < 2; ++r) {
            for (int c = 0; c < 3; ++c) {
                m[r][c] = jac[r][0] * w2c[0][c] + jac[r][1] * w2c[1][c] + jac[r][2] * w2c[2][c];
            }
        }
        double tmp[2][3];
        for (int r = 0; r < 2; ++r) {
            for (int c = 0; c < 3; ++c) {
                tmp[r][c] = m[r][0] * cov_world[0][c] + m[r][1] * cov_world[1][c] +
                            m[r][2] * cov_world[2][c];
            }
        }
        double a = tmp[0][0] * m[0][0] + tmp[0][1] * m[0][1] + tmp[0][2] * m[0][2];
        double b = 0.5 * ((tmp[0][0] * m[1][0] + tmp[0][1] * m[1][1] + tmp[0][2] * m[1][2]) +
                          (tmp[1][0] * m[0][0] + tmp[1][1] * m[0][1] + tmp[1][2] * m[0][2]));
        double c = tmp[1][0] * m[1][0] + tmp[1][1] * m[1][1] + tmp[1][2] * m[1][2];
        a += kCovarianceDilation;
        c += kCovarianceDilation;
        const double det = a * c - b * b;

        OracleSplat splat;
        splat.index = i;
        splat.depth = pz;
        splat.mean_x = cam.fx * px / pz + cam.cx;
        splat.mean_y = cam.fy * py / pz + cam.cy;
        splat.inv_a = c / det;
        splat.inv_b = -b / det;
        splat.inv_c = a / det;
        splat.opacity = cloud.opacities[i];
        splats.push_back(splat);
    }

    std::sort(splats.begin(), splats.end(), [](const OracleSplat& l, const OracleSplat& r) {
        if (l.depth != r.depth) return l.depth < r.depth;
        return l.index < r.index;
    });
    return splats;
}

} // namespace

BruteForceRender brute_force_render(const GaussianCloud& cloud, const CameraView& cam,
                                    const Eigen::Vector3d& background_color) {
    if (cloud.size() > 500) {
        throw DimensionError("brute_force_render: oracle limited to N <= 500");
    }
    validate_camera(cam);
    const std::vector<OracleSplat> splats = oracle_project(cloud, cam);

    BruteForceRender out;
    out.color = ImageF(cam.width, cam.height, 3);
    out.contributions.width = cam.width;
    out.contributions.height = cam.height;
    out.contributions.background = ImageF(cam.width, cam.height, 1);
    out.contributions.offsets.assign(cam.pixel_count() + 1, 0);

    for (int y = 0; y < cam.height; ++y) {
        for (int x = 0; x < cam.width; ++x) {
            double transmittance = 1.0;
            double sum_kappa = 0.0;
            double color[3] = {0.0, 0.0, 0.0};
            for (const OracleSplat& s : splats) {
                const double dx = x - s.mean_x;
                const double dy = y - s.mean_y;
                double q = s.inv_a * dx * dx + 2.0 * s.inv_b * dx * dy + s.inv_c * dy * dy;
                if (q < 0.0) q = 0.0;
                double alpha = s.opacity * std::exp(-0.5 * q);
                if (alpha > kAlphaClamp) alpha = kAlphaClamp;
                if (alpha < kAlphaSkipThreshold) continue;
                const double next = transmittance * (1.0 - alpha);
                if (next < kTransmittanceStop) break;
                const double kappa = alpha * transmittance;
                out.contributions.entries.push_back({s.index, kappa});
                sum_kappa += kappa;
                for (int ch = 0; ch < 3; ++ch) {
                    color[ch] += kappa * cloud.base_colors[s.index][ch];
                }
                transmittance = next;
            }
            const double background = std::clamp(1.0 - sum_kappa, 0.0, 1.0);
            const std::size_t p = static_cast<std::size_t>(y) * cam.width + x;
            out.contributions.offsets[p + 1] =
                static_cast<std::uint32_t>(out.contributions.entries.size());
            out.contributions.background.at(x, y) = background;
            for (int ch = 0; ch < 3; ++ch) {
                out.color.at(x, y, ch) = color[ch] + background * background_color[ch];
            }
        }
    }
    return out;
}

LabelImage render_labels_oracle(const SyntheticScene& scene, const CameraView& cam,
                                double noise_rate, std::uint64_t seed) {
    if (!(noise_rate >= 0.0 && noise_rate < 1.0)) {
        throw DimensionError("render_labels_oracle: noise_rate must be in [0, 1)");
    }
    const BruteForceRender render =
        brute_force_render(scene.cloud, cam, Eigen::Vector3d::Zero());

    Random rng(seed);
    LabelImage labels;
    labels.width = cam.width;
    labels.height = cam.height;
    labels.category_ids.assign(cam.pixel_count(), kIgnoreLabel);

    const int num_classes = scene.num_classes;
    for (int y = 0; y < cam.height; ++y) {
        for (int x = 0; x < cam.width; ++x) {
            if (render.contributions.background.at(x, y) > 0.5) continue;   // IGNORE
            const auto contribs = render.contributions.at(x, y);
            int best = -1;
            double best_kappa = -1.0;
            for (const PixelContribution& c : contribs) {
                if (c.kappa > best_kappa) {
                    best_kappa = c.kappa;
                    best = c.gaussian_index;
                }
            }
            if (best < 0) continue;
            std::uint8_t label = scene.gaussian_categories[best];
            if (noise_rate > 0.0 && rng.uniform() < noise_rate) {
                // Symmetric noise: resample uniformly over the other C-1 labels.
                std::uint8_t other =
                    static_cast<std::uint8_t>(rng.integer(num_classes - 1));
                if (other >= label) ++other;
                label = other;
            }
            labels.at(x, y) = label;
        }
    }
    return labels;
}

SemanticState brute_force_fuse(const SemanticState& state, const GaussianCloud& cloud,
                               const CameraView& cam, const LabelImage& labels) {
    if (state.num_gaussians != cloud.size()) {
        throw DimensionError("brute_force_fuse: state rows do not match cloud size");
    }
    if (labels.width != cam.width || labels.height != cam.height) {
        throw DimensionError("brute_force_fuse: label image does not match camera");
    }
    const BruteForceRender render = brute_force_render(cloud, cam, Eigen::Vector3d::Zero());

    SemanticState out = state;
    for (int y = 0; y < cam.height; ++y) {
        for (int x = 0; x < cam.width; ++x) {
            const std::uint8_t label = labels.at(x, y);
            if (label == kIgnoreLabel) continue;
            for (const PixelContribution& c : render.contributions.at(x, y)) {
                out.at(c.gaussian_index, label) += c.kappa;
            }
        }
    }
    return out;
}

PixelDistributionMaps brute_force_rasterize(const SemanticState& state,
                                            const GaussianCloud& cloud,
                                            const CameraView& cam) {
    if (state.num_gaussians != cloud.size()) {
        throw DimensionError("brute_force_rasterize: state rows do not match cloud size");
    }
    const BruteForceRender render = brute_force_render(cloud, cam, Eigen::Vector3d::Zero());
    const std::size_t num_classes = state.num_classes;

    PixelDistributionMaps maps;
    maps.num_classes = static_cast<int>(num_classes);
    maps.expectation = ImageF(cam.width, cam.height, static_cast<int>(num_classes));
    maps.variance = ImageF(cam.width, cam.height, static_cast<int>(num_classes));
    maps.background_weight = ImageF(cam.width, cam.height, 1);
    maps.argmax_category = ImageU8(cam.width, cam.height, 1);
    maps.top_expectation = ImageF(cam.width, cam.height, 1);
    maps.top_variance = ImageF(cam.width, cam.height, 1);

    // Inline Dirichlet moments: E_c = a_c / sum, Var_c = E_c(1-E_c)/(1+sum).
    auto moment_sum = [&](std::span<const double> row, double& sum) {
        sum = 0.0;
        for (double a : row) sum += a;
    };

    double bg_sum = 0.0;
    moment_sum(state.background, bg_sum);

    for (int y = 0; y < cam.height; ++y) {
        for (int x = 0; x < cam.width; ++x) {
            const double bg_weight = render.contributions.background.at(x, y);
            for (std::size_t c = 0; c < num_classes; ++c) {
                const double e_bg = state.background[c] / bg_sum;
                const double v_bg = e_bg * (1.0 - e_bg) / (1.0 + bg_sum);
                maps.expectation.at(x, y, static_cast<int>(c)) = bg_weight * e_bg;
                maps.variance.at(x, y, static_cast<int>(c)) = bg_weight * bg_weight * v_bg;
            }
            for (const PixelContribution& pc : render.contributions.at(x, y)) {
                double row_sum = 0.0;
                moment_sum(state.row(pc.gaussian_index), row_sum);
                for (std::size_t c = 0; c < num_classes; ++c) {
                    const double e = state.at(pc.gaussian_index, c) / row_sum;
                    const double v = e * (1.0 - e) / (1.0 + row_sum);
                    maps.expectation.at(x, y, static_cast<int>(c)) += pc.kappa * e;
                    maps.variance.at(x, y, static_cast<int>(c)) += pc.kappa * pc.kappa * v;
                }
            }
            int best = 0;
            for (int c = 1; c < static_cast<int>(num_classes); ++c) {
                if (maps.expectation.at(x, y, c) > maps.expectation.at(x, y, best)) best = c;
            }
            maps.background_weight.at(x, y) = bg_weight;
            maps.argmax_category.at(x, y) = static_cast<std::uint8_t>(best);
            maps.top_expectation.at(x, y) = maps.expectation.at(x, y, best);
            maps.top_variance.at(x, y) = maps.variance.at(x, y, best);
        }
    }
    return maps;
}

} // namespace semsplat
