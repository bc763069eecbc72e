#include "rpmlab/raster.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

namespace rpmlab {

namespace {

// All geometry is in fixed point, 256 units per pixel. Vertices are derived
// from hardcoded cosine/sine literals and mirrored across the main diagonal
// by exact coordinate swap, so render(transpose(p)) == transpose(render(p))
// holds bit-exactly and no platform libm enters the pipeline.
constexpr int64_t kFpUnit = 256;
constexpr int kCoverageThreshold = 8;  // of 16 subsamples
constexpr double kCos45 = 0.7071067811865476;

struct Vec {
  double c, s;
};
// cos/sin at angles 45 + j*360/k degrees for the vertex indices that are
// computed directly (mirror partners are derived by swapping coordinates).
constexpr Vec kTri1{-0.9659258262890682, 0.258819045102521};
constexpr Vec kSq1{-0.7071067811865475, 0.7071067811865476};
constexpr Vec kPent1{-0.4539904997395467, 0.8910065241883679};
constexpr Vec kPent2{-0.9876883405951378, -0.15643446504023073};
constexpr Vec kHex1{-0.25881904510252085, 0.9659258262890683};
constexpr Vec kHex2{-0.9659258262890682, 0.258819045102521};

const Vec* table_for(int k, int j) {
  switch (k) {
    case 3: return j == 1 ? &kTri1 : nullptr;
    case 4: return j == 1 ? &kSq1 : nullptr;
    case 5: return j == 1 ? &kPent1 : j == 2 ? &kPent2 : nullptr;
    case 6: return j == 1 ? &kHex1 : j == 2 ? &kHex2 : nullptr;
    default: return nullptr;
  }
}

struct Pt {
  int64_t x, y;
};

std::vector<Pt> polygon_vertices(int sides, int64_t cx, int64_t cy, int64_t radius) {
  std::vector<Pt> v(sides);
  for (int j = 0; j < sides; ++j) {
    int m = (sides - j) % sides;
    if (j == m) {
      // on the diagonal axis: 45 degrees (j == 0) or 225 degrees (j == k/2)
      int64_t d = std::llround(static_cast<double>(radius) * kCos45);
      v[j] = j == 0 ? Pt{cx + d, cy + d} : Pt{cx - d, cy - d};
    } else if (j < m) {
      const Vec* t = table_for(sides, j);
      v[j] = Pt{cx + std::llround(radius * t->c), cy + std::llround(radius * t->s)};
      v[m] = Pt{cx + (v[j].y - cy), cy + (v[j].x - cx)};
    }
  }
  return v;
}

// Convex containment, orientation-agnostic: all edge cross products share a
// sign (zero counts as inside). Exact in int64 at these magnitudes.
bool point_in_polygon(const std::vector<Pt>& v, int64_t qx, int64_t qy) {
  bool any_pos = false, any_neg = false;
  for (size_t i = 0; i < v.size(); ++i) {
    const Pt& a = v[i];
    const Pt& b = v[(i + 1) % v.size()];
    int64_t cross = (b.x - a.x) * (qy - a.y) - (b.y - a.y) * (qx - a.x);
    if (cross > 0) any_pos = true;
    if (cross < 0) any_neg = true;
  }
  return !(any_pos && any_neg);
}

struct Cell {
  int x0, y0, x1, y1;  // pixel bounds, half-open
};

// Panel-relative cells for each slot of a component.
std::vector<Cell> component_cells(Config config, int component, int size) {
  std::vector<Cell> cells;
  auto grid = [&](int n) {
    for (int gy = 0; gy < n; ++gy)
      for (int gx = 0; gx < n; ++gx)
        cells.push_back({gx * size / n, gy * size / n, (gx + 1) * size / n, (gy + 1) * size / n});
  };
  switch (config) {
    case Config::Center: cells.push_back({0, 0, size, size}); break;
    case Config::Grid22: grid(2); break;
    case Config::Grid33: grid(3); break;
    case Config::LeftRight:
      cells.push_back(component == 0 ? Cell{0, 0, size / 2, size}
                                     : Cell{size / 2, 0, size, size});
      break;
    case Config::UpDown:
      cells.push_back(component == 0 ? Cell{0, 0, size, size / 2}
                                     : Cell{0, size / 2, size, size});
      break;
  }
  return cells;
}

void draw_shape(Image& img, const Cell& cell, int shape, int size_level, int shade) {
  const int64_t cx = (static_cast<int64_t>(cell.x0) + cell.x1) * (kFpUnit / 2);
  const int64_t cy = (static_cast<int64_t>(cell.y0) + cell.y1) * (kFpUnit / 2);
  const int min_cell = std::min(cell.x1 - cell.x0, cell.y1 - cell.y0);
  const int64_t radius = (30 + 10 * static_cast<int64_t>(size_level)) * min_cell * 128 / 100;

  std::vector<Pt> poly;
  const bool is_circle = shape == 4;
  if (!is_circle) poly = polygon_vertices(shape + 3, cx, cy, radius);

  // bounding box in pixels, clipped to the cell
  int bx0 = std::max<int>(cell.x0, static_cast<int>((cx - radius) / kFpUnit) - 1);
  int by0 = std::max<int>(cell.y0, static_cast<int>((cy - radius) / kFpUnit) - 1);
  int bx1 = std::min<int>(cell.x1, static_cast<int>((cx + radius) / kFpUnit) + 2);
  int by1 = std::min<int>(cell.y1, static_cast<int>((cy + radius) / kFpUnit) + 2);
  const int bw = bx1 - bx0, bh = by1 - by0;
  if (bw <= 0 || bh <= 0) return;

  std::vector<uint8_t> mask(static_cast<size_t>(bw) * bh, 0);
  const int64_t r2 = radius * radius;
  for (int py = by0; py < by1; ++py)
    for (int px = bx0; px < bx1; ++px) {
      int covered = 0;
      for (int sy = 0; sy < 4; ++sy) {
        int64_t qy = static_cast<int64_t>(py) * kFpUnit + 32 + 64 * sy;
        for (int sx = 0; sx < 4; ++sx) {
          int64_t qx = static_cast<int64_t>(px) * kFpUnit + 32 + 64 * sx;
          bool inside = is_circle
                            ? (qx - cx) * (qx - cx) + (qy - cy) * (qy - cy) <= r2
                            : point_in_polygon(poly, qx, qy);
          covered += inside;
        }
      }
      if (covered >= kCoverageThreshold) mask[(py - by0) * bw + (px - bx0)] = 1;
    }

  const uint8_t fill = static_cast<uint8_t>(shade_gray(shade));
  auto masked = [&](int py, int px) {
    if (px < bx0 || px >= bx1 || py < by0 || py >= by1) return false;
    return mask[(py - by0) * bw + (px - bx0)] != 0;
  };
  for (int py = by0; py < by1; ++py)
    for (int px = bx0; px < bx1; ++px) {
      if (!masked(py, px)) continue;
      bool boundary = !masked(py - 1, px) || !masked(py + 1, px) || !masked(py, px - 1) ||
                      !masked(py, px + 1);
      img.px[static_cast<size_t>(py) * img.w + px] = boundary ? 0 : fill;
    }
}

}  // namespace

int shade_gray(int shade) {
  // round(255 * (0.05 + 0.09*s)) without floating point
  return (255 * (5 + 9 * shade) + 50) / 100;
}

Image render_panel(const Panel& p, int resolution) {
  if (std::find(kSupportedResolutions.begin(), kSupportedResolutions.end(), resolution) ==
      kSupportedResolutions.end())
    throw std::invalid_argument("render_panel: unsupported resolution " +
                                std::to_string(resolution));
  Image img;
  img.h = img.w = resolution;
  img.px.assign(static_cast<size_t>(resolution) * resolution, 255);
  for (size_t ci = 0; ci < p.components.size(); ++ci) {
    const Component& comp = p.components[ci];
    auto cells = component_cells(p.config, static_cast<int>(ci), resolution);
    for (int slot = 0; slot < static_cast<int>(cells.size()); ++slot)
      if (p.slot_occupied(static_cast<int>(ci), slot))
        draw_shape(img, cells[slot], comp.shape, comp.size, comp.shade);
  }
  return img;
}

std::array<Image, 3> render_row(const std::array<Panel, 3>& row, int resolution) {
  return {render_panel(row[0], resolution), render_panel(row[1], resolution),
          render_panel(row[2], resolution)};
}

Image transpose_image(const Image& img) {
  Image out;
  out.h = img.w;
  out.w = img.h;
  out.px.resize(img.px.size());
  for (int y = 0; y < out.h; ++y)
    for (int x = 0; x < out.w; ++x) out.px[static_cast<size_t>(y) * out.w + x] = img.at(x, y);
  return out;
}

void write_pgm(const Image& img, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  out << "P5\n" << img.w << " " << img.h << "\n255\n";
  out.write(reinterpret_cast<const char*>(img.px.data()),
            static_cast<std::streamsize>(img.px.size()));
  if (!out) throw std::runtime_error("write failed for '" + path + "'");
}

}  // namespace rpmlab
