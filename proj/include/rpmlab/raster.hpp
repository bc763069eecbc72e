#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "rpmlab/puzzle.hpp"

namespace rpmlab {

struct Image {
  int h = 0, w = 0;
  std::vector<uint8_t> px;  // row-major grayscale, 255 = white background

  uint8_t at(int y, int x) const { return px[static_cast<size_t>(y) * w + x]; }
  bool operator==(const Image&) const = default;
};

inline constexpr std::array<int, 4> kSupportedResolutions = {32, 64, 96, 224};

// Deterministic fixed-point rendering: filled regular polygons / circles with
// a 1-pixel black outline, coverage by 4x4 supersampling. Bit-exact across
// platforms; Size k maps to radius (0.30 + 0.10k) * cell_half and Shade s to
// gray round(255 * (0.05 + 0.09s)).
Image render_panel(const Panel& p, int resolution);

// Channel order equals left-to-right panel order; each channel is bit-equal
// to render_panel of that panel.
std::array<Image, 3> render_row(const std::array<Panel, 3>& row, int resolution);

Image transpose_image(const Image& img);

int shade_gray(int shade);  // fill gray level for a Shade value

void write_pgm(const Image& img, const std::string& path);

}  // namespace rpmlab
