#pragma once

#include <string>
#include <vector>

#include "semsplat/semantic_fusion.hpp"
#include "semsplat/types.hpp"

namespace semsplat {

// Binary little-endian splat PLY with pre-activation parameters
// (logit opacity, log scale, SH DC color). Extra properties are ignored.
// Activations applied on load: opacity = logistic(v), scale = exp(v),
// color = clamp(0.2820947918 * f_dc + 0.5, 0, 1); quaternions normalized.
GaussianCloud load_gaussian_ply(const std::string& path);

// Inverse-activation writer producing a PLY that load_gaussian_ply accepts.
void save_gaussian_ply(const std::string& path, const GaussianCloud& cloud);

// Cameras JSON: a top-level list of objects with w, h, fl_x, fl_y, cx, cy,
// transform (16 numbers row-major, camera-to-world), optional near, far,
// label_path, image_path. Rotations are polar-corrected when drift < 1e-3.
std::vector<CameraView> load_cameras(const std::string& path);
void save_cameras(const std::string& path, const std::vector<CameraView>& cams);

// 8-bit single-channel PNG; 255 maps to kIgnoreLabel, other values must be
// < num_classes.
LabelImage load_label_image(const std::string& path, int num_classes);
void save_label_image(const std::string& path, const LabelImage& labels);

// Semantic state container, bit-exact round trip. Little-endian layout:
// magic "CSSD", u32 version=1, u64 N, u32 C, f64 prior, C x f64 background,
// N x C f64 concentrations row-major.
void save_semantic_state(const std::string& path, const SemanticState& state);
SemanticState load_semantic_state(const std::string& path);

} // namespace semsplat
