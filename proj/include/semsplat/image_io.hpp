#pragma once

#include <array>
#include <cstdint>
#include <string>

#include "semsplat/types.hpp"

namespace semsplat {

// 8-bit PNG, returned with whatever channel count is stored (1 or 3;
// palette/alpha variants are expanded or rejected by the callers' contracts).
ImageU8 read_png(const std::string& path);

// img.channels must be 1 (grayscale) or 3 (RGB).
void write_png(const std::string& path, const ImageU8& img);

// Portable FloatMap, binary little-endian, scale -1.0. 1 channel writes "Pf",
// 3 channels "PF". Values stored as float32.
void write_pfm(const std::string& path, const ImageF& img);
ImageF read_pfm(const std::string& path);

// Fixed palette for category visualization; categories beyond 27 wrap.
const std::array<std::array<std::uint8_t, 3>, 28>& label_palette();

// Palette rendering of a label/argmax image; kIgnoreLabel maps to black.
ImageU8 colorize_labels(const ImageU8& labels);

// [0,1] float image to 8-bit with clamping and round-to-nearest.
ImageU8 quantize_to_u8(const ImageF& img);

} // namespace semsplat
