#pragma once

#include <cstdint>
#include <vector>

#include "cadspot/geometry.hpp"

namespace cadspot {

/// Row-major 0/1 image; row y maps to drawing y (no flip).
struct BinaryImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> data;

  BinaryImage() = default;
  BinaryImage(int w, int h) : width(w), height(h), data(static_cast<std::size_t>(w) * h, 0) {}
  std::uint8_t at(int x, int y) const { return data[static_cast<std::size_t>(y) * width + x]; }
  void set(int x, int y, std::uint8_t v = 1) { data[static_cast<std::size_t>(y) * width + x] = v; }
};

/// Square-cell mapping between drawing units and pixels.
struct RasterMap {
  Vec2 origin;       // drawing position of pixel (0, 0)'s lower corner
  double cell = 1.0; // drawing units per pixel
  int width = 0;
  int height = 0;

  /// Fits `bounds` with the longer side spanning `resolution` cells plus `margin` cells on every side.
  static RasterMap fit(const BBox& bounds, int resolution, int margin);
  Vec2 pixel_center(double x, double y) const { return {origin.x + (x + 0.5) * cell, origin.y + (y + 0.5) * cell}; }
  int column(double x) const;
  int row(double y) const;
};

/// Marks the 8-connected chain of cells crossed by segment ab.
void draw_segment(BinaryImage& image, const RasterMap& map, Vec2 a, Vec2 b);

struct Run {
  int y = 0;
  int x0 = 0;  // inclusive
  int x1 = 0;  // inclusive
};

struct Component {
  long long area = 0;
  int x0 = 0, y0 = 0, x1 = 0, y1 = 0;  // inclusive pixel bounds
  bool touches_border = false;
  std::vector<Run> runs;  // sorted by (y, x0)
};

/// 4-connected components of the zero pixels, ordered by their first run in raster order.
std::vector<Component> background_components(const BinaryImage& image);

struct Border {
  std::vector<std::pair<int, int>> pixels;  // (x, y) in image coordinates, 8-connected closed chain
  bool hole = false;
};

/// Suzuki-Abe border following (8-connectivity) on the pixels of one component.
/// Returns its outer border first, then the borders of its holes.
std::vector<Border> trace_borders(const Component& component);

}  // namespace cadspot
