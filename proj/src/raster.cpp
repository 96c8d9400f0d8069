#include "cadspot/raster.hpp"

#include <algorithm>
#include <boost/pending/disjoint_sets.hpp>
#include <cmath>
#include <map>

#include "cadspot/error.hpp"

namespace cadspot {

RasterMap RasterMap::fit(const BBox& bounds, int resolution, int margin) {
  if (resolution < 1) throw ArgumentError("raster resolution must be positive");
  if (bounds.empty()) throw ArgumentError("cannot rasterize empty bounds");
  RasterMap map;
  const double extent = std::max(bounds.width(), bounds.height());
  map.cell = extent > 0.0 ? extent / resolution : 1.0;
  map.origin = {bounds.min.x - margin * map.cell, bounds.min.y - margin * map.cell};
  map.width = static_cast<int>(std::ceil(bounds.width() / map.cell)) + 2 * margin + 1;
  map.height = static_cast<int>(std::ceil(bounds.height() / map.cell)) + 2 * margin + 1;
  return map;
}

int RasterMap::column(double x) const {
  return std::clamp(static_cast<int>(std::floor((x - origin.x) / cell)), 0, width - 1);
}

int RasterMap::row(double y) const {
  return std::clamp(static_cast<int>(std::floor((y - origin.y) / cell)), 0, height - 1);
}

void draw_segment(BinaryImage& image, const RasterMap& map, Vec2 a, Vec2 b) {
  int x = map.column(a.x);
  int y = map.row(a.y);
  const int xe = map.column(b.x);
  const int ye = map.row(b.y);
  image.set(x, y);
  // Walk cell by cell (Amanatides-Woo); diagonal steps keep the chain 8-connected.
  const double dx = b.x - a.x;
  const double dy = b.y - a.y;
  const int sx = dx > 0 ? 1 : -1;
  const int sy = dy > 0 ? 1 : -1;
  const double inf = std::numeric_limits<double>::infinity();
  const double tdx = dx != 0.0 ? map.cell / std::abs(dx) : inf;
  const double tdy = dy != 0.0 ? map.cell / std::abs(dy) : inf;
  const double cx = map.origin.x + (x + (sx > 0 ? 1 : 0)) * map.cell;
  const double cy = map.origin.y + (y + (sy > 0 ? 1 : 0)) * map.cell;
  double tx = dx != 0.0 ? (cx - a.x) / dx : inf;
  double ty = dy != 0.0 ? (cy - a.y) / dy : inf;
  const int steps = std::abs(xe - x) + std::abs(ye - y);
  for (int k = 0; k < steps && (x != xe || y != ye); ++k) {
    if (x != xe && (tx < ty || y == ye)) {
      x += sx;
      tx += tdx;
    } else {
      y += sy;
      ty += tdy;
    }
    image.set(x, y);
  }
}

std::vector<Component> background_components(const BinaryImage& image) {
  std::vector<Run> runs;
  std::vector<std::size_t> row_start(image.height + 1, 0);
  for (int y = 0; y < image.height; ++y) {
    row_start[y] = runs.size();
    int x = 0;
    while (x < image.width) {
      if (image.at(x, y)) {
        ++x;
        continue;
      }
      const int x0 = x;
      while (x < image.width && !image.at(x, y)) ++x;
      runs.push_back({y, x0, x - 1});
    }
  }
  row_start[image.height] = runs.size();

  std::vector<int> rank(runs.size()), parent(runs.size());
  boost::disjoint_sets<int*, int*> sets(rank.data(), parent.data());
  for (std::size_t i = 0; i < runs.size(); ++i) sets.make_set(static_cast<int>(i));
  for (int y = 1; y < image.height; ++y) {
    std::size_t a = row_start[y - 1];
    std::size_t b = row_start[y];
    const std::size_t a_end = row_start[y];
    const std::size_t b_end = row_start[y + 1];
    while (a < a_end && b < b_end) {
      if (runs[a].x0 <= runs[b].x1 && runs[b].x0 <= runs[a].x1) {
        sets.union_set(static_cast<int>(a), static_cast<int>(b));
      }
      if (runs[a].x1 < runs[b].x1) {
        ++a;
      } else {
        ++b;
      }
    }
  }

  std::map<int, std::size_t> index_of_root;
  std::vector<Component> out;
  for (std::size_t i = 0; i < runs.size(); ++i) {
    const int root = sets.find_set(static_cast<int>(i));
    auto [it, inserted] = index_of_root.emplace(root, out.size());
    if (inserted) {
      Component c;
      c.x0 = runs[i].x0;
      c.x1 = runs[i].x1;
      c.y0 = c.y1 = runs[i].y;
      out.push_back(std::move(c));
    }
    Component& c = out[it->second];
    const Run& r = runs[i];
    c.runs.push_back(r);
    c.area += r.x1 - r.x0 + 1;
    c.x0 = std::min(c.x0, r.x0);
    c.x1 = std::max(c.x1, r.x1);
    c.y0 = std::min(c.y0, r.y);
    c.y1 = std::max(c.y1, r.y);
    if (r.x0 == 0 || r.x1 == image.width - 1 || r.y == 0 || r.y == image.height - 1) c.touches_border = true;
  }
  return out;
}

namespace {

// Clockwise neighbour order with rows growing downwards.
constexpr int kDi[8] = {0, 1, 1, 1, 0, -1, -1, -1};
constexpr int kDj[8] = {1, 1, 0, -1, -1, -1, 0, 1};

int direction(int di, int dj) {
  for (int d = 0; d < 8; ++d) {
    if (kDi[d] == di && kDj[d] == dj) return d;
  }
  return -1;
}

}  // namespace

std::vector<Border> trace_borders(const Component& component) {
  const int w = component.x1 - component.x0 + 3;
  const int h = component.y1 - component.y0 + 3;
  // Pixel states: 0 background, 1 unvisited foreground, 2 visited border, -1 border with a 0 pixel to its east.
  std::vector<std::int8_t> f(static_cast<std::size_t>(w) * h, 0);
  auto at = [&](int i, int j) -> std::int8_t& { return f[static_cast<std::size_t>(i) * w + j]; };
  for (const Run& r : component.runs) {
    for (int x = r.x0; x <= r.x1; ++x) at(r.y - component.y0 + 1, x - component.x0 + 1) = 1;
  }

  std::vector<Border> borders;
  for (int i = 1; i < h - 1; ++i) {
    for (int j = 1; j < w - 1; ++j) {
      int i2, j2;
      bool hole;
      if (at(i, j) == 1 && at(i, j - 1) == 0) {
        hole = false;
        i2 = i;
        j2 = j - 1;
      } else if (at(i, j) >= 1 && at(i, j + 1) == 0) {
        hole = true;
        i2 = i;
        j2 = j + 1;
      } else {
        continue;
      }
      Border border;
      border.hole = hole;
      auto emit = [&](int bi, int bj) {
        border.pixels.emplace_back(bj - 1 + component.x0, bi - 1 + component.y0);
      };
      // 3.1: clockwise search around (i, j) starting at (i2, j2).
      const int d0 = direction(i2 - i, j2 - j);
      int i1 = -1, j1 = -1;
      for (int k = 0; k < 8; ++k) {
        const int d = (d0 + k) % 8;
        if (at(i + kDi[d], j + kDj[d]) != 0) {
          i1 = i + kDi[d];
          j1 = j + kDj[d];
          break;
        }
      }
      if (i1 < 0) {
        at(i, j) = -1;
        emit(i, j);
        borders.push_back(std::move(border));
        continue;
      }
      i2 = i1;
      j2 = j1;
      int i3 = i, j3 = j;
      while (true) {
        emit(i3, j3);
        // 3.3: counter-clockwise search around (i3, j3) starting after (i2, j2).
        const int ds = direction(i2 - i3, j2 - j3);
        bool east_zero = false;
        int i4 = -1, j4 = -1;
        for (int k = 1; k <= 8; ++k) {
          const int d = ((ds - k) % 8 + 8) % 8;
          const int ni = i3 + kDi[d];
          const int nj = j3 + kDj[d];
          if (at(ni, nj) != 0) {
            i4 = ni;
            j4 = nj;
            break;
          }
          if (d == 0) east_zero = true;
        }
        // 3.4
        if (east_zero) {
          at(i3, j3) = -1;
        } else if (at(i3, j3) == 1) {
          at(i3, j3) = 2;
        }
        // 3.5
        if (i4 == i && j4 == j && i3 == i1 && j3 == j1) break;
        i2 = i3;
        j2 = j3;
        i3 = i4;
        j3 = j4;
      }
      borders.push_back(std::move(border));
    }
  }
  // The raster scan meets the outer border first; keep that order explicit.
  std::stable_partition(borders.begin(), borders.end(), [](const Border& b) { return !b.hole; });
  return borders;
}

}  // namespace cadspot
