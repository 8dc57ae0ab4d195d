#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "semsplat/errors.hpp"

namespace semsplat {

// Label value excluded from fusion and every metric.
inline constexpr std::uint8_t kIgnoreLabel = 255;

// A trained splat scene, post-activation: scales and opacities are the
// activated values, base colors come from the SH DC band.
struct GaussianCloud {
    std::vector<Eigen::Vector3d> positions;       // world, meters
    std::vector<Eigen::Quaterniond> rotations;    // unit quaternions
    std::vector<Eigen::Vector3d> scales;          // per-axis, > 0
    std::vector<double> opacities;                // in (0,1)
    std::vector<Eigen::Vector3d> base_colors;     // linear RGB in [0,1]

    std::size_t size() const { return positions.size(); }
};

// Throws DimensionError when any GaussianCloud invariant is violated.
void validate_cloud(const GaussianCloud& cloud);

// Pinhole camera. Axes: x right, y down, z forward (camera looks along +z).
// Pixel (ix, iy) samples the continuous image point (ix, iy); the principal
// point cx, cy is expressed in the same coordinates.
struct CameraView {
    int width = 0;
    int height = 0;
    double fx = 0.0, fy = 0.0;
    double cx = 0.0, cy = 0.0;
    Eigen::Matrix4d camera_to_world = Eigen::Matrix4d::Identity();
    double near_plane = 0.01;
    double far_plane = 1e6;

    // Dataset wiring carried by the cameras file; empty when absent.
    std::string label_path;
    std::string image_path;

    Eigen::Matrix3d rotation() const { return camera_to_world.block<3, 3>(0, 0); }
    Eigen::Vector3d position() const { return camera_to_world.block<3, 1>(0, 3); }

    Eigen::Vector3d world_to_camera(const Eigen::Vector3d& p_world) const {
        return rotation().transpose() * (p_world - position());
    }

    std::size_t pixel_count() const {
        return static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
    }
};

void validate_camera(const CameraView& cam);

// Per-pixel category ids in [0, C-1], or kIgnoreLabel.
struct LabelImage {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> category_ids;   // row-major

    std::uint8_t at(int x, int y) const {
        return category_ids[static_cast<std::size_t>(y) * width + x];
    }
    std::uint8_t& at(int x, int y) {
        return category_ids[static_cast<std::size_t>(y) * width + x];
    }
};

// Row-major interleaved multi-channel raster.
template <typename T>
struct Image {
    int width = 0;
    int height = 0;
    int channels = 1;
    std::vector<T> data;

    Image() = default;
    Image(int w, int h, int c, T fill = T{})
        : width(w), height(h), channels(c),
          data(static_cast<std::size_t>(w) * h * c, fill) {}

    T at(int x, int y, int c = 0) const {
        return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
    }
    T& at(int x, int y, int c = 0) {
        return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
    }
    std::size_t pixel_count() const {
        return static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
    }
    bool same_shape(const Image& other) const {
        return width == other.width && height == other.height && channels == other.channels;
    }
};

using ImageF = Image<double>;
using ImageU8 = Image<std::uint8_t>;

} // namespace semsplat
