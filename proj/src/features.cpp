#include "cadspot/features.hpp"

#include <cmath>
#include <string>

#include "cadspot/error.hpp"

namespace cadspot {

FeatureMatrix pool_variant(const FeatureMatrix& point_features, const DensePointCloud& cloud, PoolMode mode) {
  if (static_cast<std::size_t>(point_features.rows()) != cloud.size()) {
    throw ArgumentError("point feature rows (" + std::to_string(point_features.rows()) +
                        ") do not match cloud size (" + std::to_string(cloud.size()) + ")");
  }
  const auto n = static_cast<Eigen::Index>(cloud.num_primitives());
  const Eigen::Index channels = point_features.cols();
  FeatureMatrix max_rows = FeatureMatrix::Constant(n, channels, -std::numeric_limits<double>::infinity());
  FeatureMatrix sum_rows = FeatureMatrix::Zero(n, channels);
  std::vector<int> counts(static_cast<std::size_t>(n), 0);
  for (std::size_t p = 0; p < cloud.size(); ++p) {
    const int owner = cloud.owner[p];
    max_rows.row(owner) = max_rows.row(owner).cwiseMax(point_features.row(static_cast<Eigen::Index>(p)));
    sum_rows.row(owner) += point_features.row(static_cast<Eigen::Index>(p));
    ++counts[owner];
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    if (counts[i] == 0) throw ArgumentError("primitive " + std::to_string(i) + " owns no sampled points");
  }
  FeatureMatrix mean_rows(n, channels);
  for (Eigen::Index i = 0; i < n; ++i) mean_rows.row(i) = sum_rows.row(i) / static_cast<double>(counts[i]);
  switch (mode) {
    case PoolMode::Max: return max_rows;
    case PoolMode::Average: return mean_rows;
    case PoolMode::Mixed: return max_rows + mean_rows;
  }
  return max_rows + mean_rows;
}

FeatureMatrix mixed_pool(const FeatureMatrix& point_features, const DensePointCloud& cloud) {
  return pool_variant(point_features, cloud, PoolMode::Mixed);
}

std::vector<double> describe_primitive(const Primitive& primitive, std::span<const Point3> samples) {
  std::vector<double> out(kDescriptorSize, 0.0);
  out[static_cast<int>(primitive.kind())] = 1.0;
  const double length = arc_length(primitive);
  out[7] = std::log1p(length);

  const std::size_t n = samples.size();
  if (n >= 2) {
    double mx = 0, my = 0;
    for (const auto& s : samples) {
      mx += s.x;
      my += s.y;
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    double sxx = 0, syy = 0, sxy = 0;
    for (const auto& s : samples) {
      const double dx = s.x - mx;
      const double dy = s.y - my;
      sxx += dx * dx;
      syy += dy * dy;
      sxy += dx * dy;
    }
    // Spread along and across the principal axis, summed directly so thin shapes keep their precision.
    const double theta = 0.5 * std::atan2(2.0 * sxy, sxx - syy);
    const double cs = std::cos(theta);
    const double sn = std::sin(theta);
    double major = 0, minor = 0;
    for (const auto& s : samples) {
      const double along = cs * (s.x - mx) + sn * (s.y - my);
      const double across = -sn * (s.x - mx) + cs * (s.y - my);
      major += along * along;
      minor += across * across;
    }
    if (minor > major) std::swap(minor, major);
    out[8] = major > 0 ? std::sqrt(minor / major) : 0.0;
  }
  out[9] = primitive.closed() || length <= 0 ? 0.0
                                             : distance(primitive.start_point(), primitive.end_point()) / length;

  // Soft histogram of turning angles between consecutive chords over [0, pi].
  constexpr int kBins = 8;
  const bool wrap = primitive.closed() && n >= 3;
  const std::size_t turns = n < 3 ? 0 : (wrap ? n : n - 2);
  double total_turn = 0.0;
  for (std::size_t k = 0; k < turns; ++k) {
    const Vec2 a = samples[k % n].xy();
    const Vec2 b = samples[(k + 1) % n].xy();
    const Vec2 c = samples[(k + 2) % n].xy();
    const Vec2 u = b - a;
    const Vec2 v = c - b;
    if (norm(u) <= 0 || norm(v) <= 0) continue;
    const double angle = std::abs(std::atan2(cross(u, v), dot(u, v)));
    total_turn += angle;
    const double pos = std::clamp(angle / kPi * kBins - 0.5, 0.0, kBins - 1.0);
    const int lo = static_cast<int>(std::floor(pos));
    const int hi = std::min(lo + 1, kBins - 1);
    const double frac = pos - lo;
    out[10 + lo] += 1.0 - frac;
    out[10 + hi] += frac;
  }
  if (turns > 0) {
    for (int b = 0; b < kBins; ++b) out[10 + b] /= static_cast<double>(turns);
  }
  out[18] = total_turn / kTwoPi;
  return out;
}

FeatureMatrix describe_drawing(const Drawing& drawing, const DensePointCloud& cloud) {
  FeatureMatrix out(static_cast<Eigen::Index>(drawing.size()), kDescriptorSize);
  for (const auto& p : drawing.primitives) {
    const auto row = describe_primitive(p, cloud.points_of(p.id));
    for (int c = 0; c < kDescriptorSize; ++c) out(p.id, c) = row[c];
  }
  return out;
}

}  // namespace cadspot
