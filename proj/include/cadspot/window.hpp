#pragma once

#include <vector>

#include "cadspot/model.hpp"
#include "cadspot/sampler.hpp"

namespace cadspot {

inline constexpr double kDefaultWindowSize = 140.0;
inline constexpr double kDefaultWindowStep = 70.0;

struct WindowGrid {
  double size = kDefaultWindowSize;
  double step = kDefaultWindowStep;
  std::vector<double> xs;       // window starts along x
  std::vector<double> ys;       // window starts along y
  std::vector<BBox> windows;    // row-major: y outer, x inner
};

/// Starts at bounds.min + k * step per axis until a window reaches bounds.max;
/// the last start is clamped so that window ends exactly at bounds.max. An axis
/// no longer than `size` gets the single start bounds.min.
/// Throws ArgumentError unless size > 0 and 0 < step <= size.
WindowGrid enumerate_windows(const BBox& bounds, double size, double step);

/// Primitives with at least one sampled point inside a window (closed rectangle).
struct WindowSubset {
  BBox window;
  std::vector<int> primitives;  // ascending
  std::vector<int> observed;    // points inside the window, aligned with `primitives`
};

WindowSubset collect_window(const DensePointCloud& cloud, const BBox& window);

/// collect_window for every window of a grid, sharing one spatial pass over the points.
std::vector<WindowSubset> collect_windows(const DensePointCloud& cloud, const std::vector<BBox>& windows);

/// Bounding box of the sampled points.
BBox cloud_bounds(const DensePointCloud& cloud);

}  // namespace cadspot
