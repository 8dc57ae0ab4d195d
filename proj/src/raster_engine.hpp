#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <vector>

#include "semsplat/parallel.hpp"
#include "semsplat/splat_raster.hpp"
#include "semsplat/types.hpp"

namespace semsplat::detail {

// Inverse 2x2 covariance, row [a b; b c].
struct Conic {
    double a = 0.0, b = 0.0, c = 0.0;
};

inline Conic conic_of(const Eigen::Matrix2d& cov) {
    const double det = cov(0, 0) * cov(1, 1) - cov(0, 1) * cov(1, 0);
    return {cov(1, 1) / det, -cov(0, 1) / det, cov(0, 0) / det};
}

// One compositing step; shared single source of truth for the clamp, skip
// and stop rules. Returns the splat's kappa, or a negative value when the
// splat is skipped; sets stop when traversal must end (splat excluded).
inline double composite_step(double alpha_prime, double& transmittance, bool& stop) {
    if (alpha_prime > kAlphaClamp) alpha_prime = kAlphaClamp;
    if (alpha_prime < kAlphaSkipThreshold) return -1.0;
    const double next = transmittance * (1.0 - alpha_prime);
    if (next < kTransmittanceStop) {
        stop = true;
        return -1.0;
    }
    const double kappa = alpha_prime * transmittance;
    transmittance = next;
    return kappa;
}

// Depth-sorted, tile-binned view of a projected scene. Per-pixel compositing
// is sequential front-to-back, so any tile/thread partition produces the
// same per-pixel values.
class RasterEngine {
public:
    RasterEngine(const GaussianCloud& cloud, const CameraView& cam,
                 const RasterConfig& config)
        : width_(cam.width), height_(cam.height),
          tile_size_(std::max(1, config.tile_size)),
          threads_(resolve_thread_count(config.num_threads)) {
        tiles_x_ = (width_ + tile_size_ - 1) / tile_size_;
        tiles_y_ = (height_ + tile_size_ - 1) / tile_size_;
        bins_.resize(static_cast<std::size_t>(tiles_x_) * tiles_y_);

        const std::vector<Splat2D> splats = project_splats(cloud, cam);
        std::vector<std::uint32_t> order(splats.size());
        std::iota(order.begin(), order.end(), 0u);
        std::sort(order.begin(), order.end(), [&](std::uint32_t l, std::uint32_t r) {
            if (splats[l].view_depth != splats[r].view_depth) {
                return splats[l].view_depth < splats[r].view_depth;
            }
            return splats[l].gaussian_index < splats[r].gaussian_index;
        });

        flat_.reserve(splats.size());
        for (std::uint32_t oi : order) {
            const Splat2D& s = splats[oi];
            const Conic conic = conic_of(s.cov2d);
            flat_.push_back({s.mean2d.x(), s.mean2d.y(), conic.a, conic.b, conic.c,
                             s.opacity, s.gaussian_index});

            const double r = splat_extent_radius(s);
            const int x0 = std::clamp(static_cast<int>(std::floor((s.mean2d.x() - r) / tile_size_)), 0, tiles_x_ - 1);
            const int x1 = std::clamp(static_cast<int>(std::floor((s.mean2d.x() + r) / tile_size_)), 0, tiles_x_ - 1);
            const int y0 = std::clamp(static_cast<int>(std::floor((s.mean2d.y() - r) / tile_size_)), 0, tiles_y_ - 1);
            const int y1 = std::clamp(static_cast<int>(std::floor((s.mean2d.y() + r) / tile_size_)), 0, tiles_y_ - 1);
            const std::uint32_t flat_index = static_cast<std::uint32_t>(flat_.size() - 1);
            for (int ty = y0; ty <= y1; ++ty) {
                for (int tx = x0; tx <= x1; ++tx) {
                    bins_[static_cast<std::size_t>(ty) * tiles_x_ + tx].push_back(flat_index);
                }
            }
        }
    }

    int width() const { return width_; }
    int height() const { return height_; }
    std::size_t tile_count() const { return bins_.size(); }

    std::size_t tile_index_of(int x, int y) const {
        return static_cast<std::size_t>(y / tile_size_) * tiles_x_ + (x / tile_size_);
    }

    struct TileRect {
        int x0, y0, x1, y1;   // half-open
    };

    TileRect tile_rect(std::size_t t) const {
        const int tx = static_cast<int>(t) % tiles_x_;
        const int ty = static_cast<int>(t) / tiles_x_;
        return {tx * tile_size_, ty * tile_size_,
                std::min((tx + 1) * tile_size_, width_),
                std::min((ty + 1) * tile_size_, height_)};
    }

    // Visits every pixel of tile t in row-major order:
    // visitor(x, y, std::span<const PixelContribution>, background_weight).
    template <typename Visitor>
    void sweep_tile(std::size_t t, std::vector<PixelContribution>& scratch,
                    Visitor&& visitor) const {
        const TileRect rect = tile_rect(t);
        const std::vector<std::uint32_t>& bin = bins_[t];
        for (int y = rect.y0; y < rect.y1; ++y) {
            for (int x = rect.x0; x < rect.x1; ++x) {
                scratch.clear();
                double transmittance = 1.0;
                double sum_kappa = 0.0;
                for (std::uint32_t si : bin) {
                    const FlatSplat& s = flat_[si];
                    const double dx = x - s.mean_x;
                    const double dy = y - s.mean_y;
                    double q = s.conic_a * dx * dx + 2.0 * s.conic_b * dx * dy +
                               s.conic_c * dy * dy;
                    if (q < 0.0) q = 0.0;
                    bool stop = false;
                    const double kappa =
                        composite_step(s.opacity * std::exp(-0.5 * q), transmittance, stop);
                    if (stop) break;
                    if (kappa < 0.0) continue;
                    scratch.push_back({s.gaussian_index, kappa});
                    sum_kappa += kappa;
                }
                const double background = std::clamp(1.0 - sum_kappa, 0.0, 1.0);
                visitor(x, y, std::span<const PixelContribution>(scratch), background);
            }
        }
    }

    // Parallel over tiles; the visitor runs concurrently and must write only
    // pixel-owned locations.
    template <typename Visitor>
    void sweep(Visitor&& visitor) const {
        parallel_for(threads_, tile_count(), [&](std::size_t begin, std::size_t end) {
            std::vector<PixelContribution> scratch;
            scratch.reserve(128);
            for (std::size_t t = begin; t < end; ++t) {
                sweep_tile(t, scratch, visitor);
            }
        });
    }

private:
    struct FlatSplat {
        double mean_x, mean_y;
        double conic_a, conic_b, conic_c;
        double opacity;
        int gaussian_index;
    };

    int width_, height_, tile_size_, threads_;
    int tiles_x_ = 0, tiles_y_ = 0;
    std::vector<FlatSplat> flat_;                     // depth order
    std::vector<std::vector<std::uint32_t>> bins_;    // per tile, depth order
};

} // namespace semsplat::detail
