#include "cadspot/window.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "cadspot/error.hpp"

namespace cadspot {

namespace {

std::vector<double> axis_starts(double lo, double hi, double size, double step) {
  std::vector<double> starts;
  const double tol = 1e-9 * std::max({1.0, std::abs(lo), std::abs(hi)});
  if (hi - lo <= size + tol) return {lo};
  for (long k = 0;; ++k) {
    const double s = lo + static_cast<double>(k) * step;
    if (s + size >= hi - tol) break;
    starts.push_back(s);
  }
  starts.push_back(hi - size);
  return starts;
}

}  // namespace

WindowGrid enumerate_windows(const BBox& bounds, double size, double step) {
  if (!(size > 0.0) || !std::isfinite(size)) throw ArgumentError("window size must be positive");
  if (!(step > 0.0) || step > size) throw ArgumentError("window step must satisfy 0 < step <= size");
  if (bounds.empty()) throw ArgumentError("cannot tile empty bounds");
  WindowGrid grid;
  grid.size = size;
  grid.step = step;
  grid.xs = axis_starts(bounds.min.x, bounds.max.x, size, step);
  grid.ys = axis_starts(bounds.min.y, bounds.max.y, size, step);
  for (double y : grid.ys) {
    for (double x : grid.xs) grid.windows.push_back({{x, y}, {x + size, y + size}});
  }
  return grid;
}

std::vector<WindowSubset> collect_windows(const DensePointCloud& cloud, const std::vector<BBox>& windows) {
  std::vector<std::size_t> order(cloud.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return cloud.points[a].x < cloud.points[b].x; });
  std::vector<int> counts(cloud.num_primitives(), 0);
  std::vector<int> touched;
  std::vector<WindowSubset> out;
  out.reserve(windows.size());
  for (const BBox& w : windows) {
    auto first = std::lower_bound(order.begin(), order.end(), w.min.x,
                                  [&](std::size_t i, double v) { return cloud.points[i].x < v; });
    auto last = std::upper_bound(first, order.end(), w.max.x,
                                 [&](double v, std::size_t i) { return v < cloud.points[i].x; });
    touched.clear();
    for (auto it = first; it != last; ++it) {
      const Point3& p = cloud.points[*it];
      if (p.y < w.min.y || p.y > w.max.y) continue;
      const int owner = cloud.owner[*it];
      if (counts[owner]++ == 0) touched.push_back(owner);
    }
    std::sort(touched.begin(), touched.end());
    WindowSubset subset;
    subset.window = w;
    subset.primitives = touched;
    subset.observed.reserve(touched.size());
    for (int pid : touched) {
      subset.observed.push_back(counts[pid]);
      counts[pid] = 0;
    }
    out.push_back(std::move(subset));
  }
  return out;
}

WindowSubset collect_window(const DensePointCloud& cloud, const BBox& window) {
  return std::move(collect_windows(cloud, {window}).front());
}

BBox cloud_bounds(const DensePointCloud& cloud) {
  BBox box;
  for (const Point3& p : cloud.points) box.expand(p.xy());
  return box;
}

}  // namespace cadspot
