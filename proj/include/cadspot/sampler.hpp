#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "cadspot/model.hpp"

namespace cadspot {

inline constexpr double kDefaultSamplingInterval = 0.14;

struct Point3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  Vec2 xy() const { return {x, y}; }
  bool operator==(const Point3&) const = default;
};

/// Sampled points of a whole drawing, concatenated in primitive-id order.
struct DensePointCloud {
  std::vector<Point3> points;
  std::vector<int> owner;                // point -> primitive id
  std::vector<int> per_primitive_count;  // primitive id -> number of points
  std::vector<std::size_t> offsets;      // primitive id -> first point index; size N + 1

  std::size_t size() const { return points.size(); }
  std::size_t num_primitives() const { return per_primitive_count.size(); }
  std::span<const Point3> points_of(int primitive) const {
    return {points.data() + offsets[primitive], static_cast<std::size_t>(per_primitive_count[primitive])};
  }
};

/// Curve length. Exact for segments, arcs, circles and polylines; ellipses use
/// adaptive Gauss-Kronrod quadrature and Béziers recursive de Casteljau subdivision.
double arc_length(const Primitive& primitive);

/// Points at arc-length positions 0, d, 2d, ... Open primitives always include
/// both endpoints (the last gap may be shorter than d). Closed primitives start
/// at their start point and wrap without repeating it. Zero-length primitives
/// yield one point.
std::vector<Vec2> sample_primitive(const Primitive& primitive, double d);

/// Samples every primitive; throws ArgumentError for an empty drawing or d <= 0.
DensePointCloud sample_drawing(const Drawing& drawing, double d);

}  // namespace cadspot
