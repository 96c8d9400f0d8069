#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <set>
#include <vector>

#include "cadspot/assignment.hpp"
#include "cadspot/model.hpp"

namespace cadspot::testing {

using Rng = std::mt19937_64;

inline double uniform(Rng& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }
inline int uniform_int(Rng& rng, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }

// Direct parametric evaluation, t in [0, 1]; written independently of the sampler.
inline Vec2 evaluate(const Primitive& p, double t) {
  struct Visitor {
    double t;
    Vec2 operator()(const Segment& s) const { return {s.a.x + (s.b.x - s.a.x) * t, s.a.y + (s.b.y - s.a.y) * t}; }
    Vec2 operator()(const Arc& a) const {
      const double th = a.start + a.sweep * t;
      return {a.center.x + a.radius * std::cos(th), a.center.y + a.radius * std::sin(th)};
    }
    Vec2 operator()(const Circle& c) const {
      const double th = 2.0 * std::numbers::pi * t;
      return {c.center.x + c.radius * std::cos(th), c.center.y + c.radius * std::sin(th)};
    }
    Vec2 operator()(const Ellipse& e) const {
      const double th = e.start + e.sweep * t;
      const double x = e.rx * std::cos(th);
      const double y = e.ry * std::sin(th);
      const double c = std::cos(e.rotation);
      const double s = std::sin(e.rotation);
      return {e.center.x + c * x - s * y, e.center.y + s * x + c * y};
    }
    Vec2 operator()(const CubicBezier& b) const {
      const double u = 1.0 - t;
      const double w0 = u * u * u, w1 = 3 * u * u * t, w2 = 3 * u * t * t, w3 = t * t * t;
      return {w0 * b.p[0].x + w1 * b.p[1].x + w2 * b.p[2].x + w3 * b.p[3].x,
              w0 * b.p[0].y + w1 * b.p[1].y + w2 * b.p[2].y + w3 * b.p[3].y};
    }
    Vec2 operator()(const QuadBezier& b) const {
      const double u = 1.0 - t;
      const double w0 = u * u, w1 = 2 * u * t, w2 = t * t;
      return {w0 * b.p[0].x + w1 * b.p[1].x + w2 * b.p[2].x, w0 * b.p[0].y + w1 * b.p[1].y + w2 * b.p[2].y};
    }
    Vec2 operator()(const Polyline& pl) const {
      std::vector<Vec2> v = pl.vertices;
      if (pl.closed) v.push_back(v.front());
      std::vector<double> cum{0.0};
      for (std::size_t i = 1; i < v.size(); ++i) cum.push_back(cum.back() + std::hypot(v[i].x - v[i - 1].x, v[i].y - v[i - 1].y));
      const double at = t * cum.back();
      std::size_t i = 1;
      while (i + 1 < v.size() && cum[i] < at) ++i;
      const double seg = cum[i] - cum[i - 1];
      const double f = seg > 0 ? (at - cum[i - 1]) / seg : 0.0;
      return {v[i - 1].x + (v[i].x - v[i - 1].x) * f, v[i - 1].y + (v[i].y - v[i - 1].y) * f};
    }
  };
  return std::visit(Visitor{t}, p.geometry);
}

// Fine polyline whose chords are at most `h` long, with cumulative lengths.
struct Flattened {
  std::vector<Vec2> points;
  std::vector<double> cum;
  double length() const { return cum.back(); }
};

inline Flattened flatten(const Primitive& p, double h) {
  std::size_t n = 1;
  if (const auto* pl = std::get_if<Polyline>(&p.geometry)) {
    // Vertices are kinks; sample each edge separately.
    Flattened f;
    std::vector<Vec2> v = pl->vertices;
    if (pl->closed) v.push_back(v.front());
    f.points.push_back(v.front());
    f.cum.push_back(0.0);
    for (std::size_t i = 1; i < v.size(); ++i) {
      const double len = std::hypot(v[i].x - v[i - 1].x, v[i].y - v[i - 1].y);
      const auto k = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(len / h)));
      for (std::size_t j = 1; j <= k; ++j) {
        const double t = static_cast<double>(j) / k;
        const Vec2 q{v[i - 1].x + (v[i].x - v[i - 1].x) * t, v[i - 1].y + (v[i].y - v[i - 1].y) * t};
        f.cum.push_back(f.cum.back() + std::hypot(q.x - f.points.back().x, q.y - f.points.back().y));
        f.points.push_back(q);
      }
    }
    return f;
  }
  double max_chord = 0.0;
  const int coarse = 4096;
  Vec2 prev = evaluate(p, 0.0);
  for (int i = 1; i <= coarse; ++i) {
    const Vec2 q = evaluate(p, static_cast<double>(i) / coarse);
    max_chord = std::max(max_chord, std::hypot(q.x - prev.x, q.y - prev.y));
    prev = q;
  }
  n = std::max<std::size_t>(coarse, static_cast<std::size_t>(std::ceil(max_chord * coarse / h)) + 1);
  Flattened f;
  f.points.reserve(n + 1);
  f.cum.reserve(n + 1);
  for (std::size_t i = 0; i <= n; ++i) {
    const Vec2 q = evaluate(p, static_cast<double>(i) / n);
    f.cum.push_back(f.points.empty() ? 0.0 : f.cum.back() + std::hypot(q.x - f.points.back().x, q.y - f.points.back().y));
    f.points.push_back(q);
  }
  return f;
}

// Arc-length position of `q` on the flattened curve, searching forward from `cursor`
// until `lookahead` past the best hit.
inline double position_along(const Flattened& f, Vec2 q, std::size_t& cursor, double lookahead = 1.0) {
  double best = std::numeric_limits<double>::infinity();
  double at = 0.0;
  std::size_t best_i = cursor;
  for (std::size_t i = cursor; i + 1 < f.points.size(); ++i) {
    const Vec2 a = f.points[i];
    const Vec2 b = f.points[i + 1];
    const double dx = b.x - a.x, dy = b.y - a.y;
    const double l2 = dx * dx + dy * dy;
    double t = l2 > 0 ? ((q.x - a.x) * dx + (q.y - a.y) * dy) / l2 : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    const double ex = a.x + dx * t - q.x, ey = a.y + dy * t - q.y;
    const double dist = std::hypot(ex, ey);
    if (dist < best) {
      best = dist;
      at = f.cum[i] + t * (f.cum[i + 1] - f.cum[i]);
      best_i = i;
    }
    if (best < 1e-7 && f.cum[i] > at + lookahead) break;
  }
  cursor = best_i;
  return at;
}

inline Primitive random_primitive(Rng& rng, PrimitiveKind kind, Vec2 origin = {0, 0}, double scale = 1.0) {
  auto pt = [&] { return Vec2{origin.x + scale * uniform(rng, -1, 1), origin.y + scale * uniform(rng, -1, 1)}; };
  Primitive p;
  switch (kind) {
    case PrimitiveKind::Segment:
      p.geometry = Segment{pt(), pt()};
      break;
    case PrimitiveKind::Arc:
      p.geometry = Arc{pt(), scale * uniform(rng, 0.2, 1.0), uniform(rng, -4, 4), uniform(rng, 0.3, 2 * std::numbers::pi)};
      break;
    case PrimitiveKind::Circle:
      p.geometry = Circle{pt(), scale * uniform(rng, 0.2, 0.8)};
      break;
    case PrimitiveKind::Ellipse: {
      const bool full = uniform(rng, 0, 1) < 0.5;
      p.geometry = Ellipse{pt(), scale * uniform(rng, 0.2, 1.0), scale * uniform(rng, 0.1, 0.6), uniform(rng, -3, 3),
                           uniform(rng, -3, 3), full ? 2 * std::numbers::pi : uniform(rng, 0.3, 5.0)};
      break;
    }
    case PrimitiveKind::CubicBezier:
      p.geometry = CubicBezier{{pt(), pt(), pt(), pt()}};
      break;
    case PrimitiveKind::QuadBezier:
      p.geometry = QuadBezier{{pt(), pt(), pt()}};
      break;
    case PrimitiveKind::Polyline: {
      Polyline pl;
      const int n = uniform_int(rng, 2, 6);
      for (int i = 0; i < n; ++i) pl.vertices.push_back(pt());
      pl.closed = n >= 3 && uniform(rng, 0, 1) < 0.5;
      p.geometry = pl;
      break;
    }
  }
  return p;
}

// Minimum over all injective row->column maps (R <= C) or column->row maps.
inline double brute_force_assignment(const Eigen::MatrixXd& cost) {
  const bool transpose = cost.rows() > cost.cols();
  const Eigen::MatrixXd c = transpose ? Eigen::MatrixXd(cost.transpose()) : cost;
  const int r = static_cast<int>(c.rows());
  const int k = static_cast<int>(c.cols());
  if (r == 0) return 0.0;
  std::vector<int> cols(k);
  std::iota(cols.begin(), cols.end(), 0);
  double best = std::numeric_limits<double>::infinity();
  // Permutations of all columns; the first r positions give the assignment.
  do {
    double s = 0.0;
    for (int i = 0; i < r; ++i) s += c(i, cols[i]);
    best = std::min(best, s);
  } while (std::next_permutation(cols.begin(), cols.end()));
  return best;
}

struct ReferenceNms {
  std::vector<double> decayed;
  std::vector<int> kept;
};

// Straight transcription of the matrix-NMS decay with a full IoU table.
inline ReferenceNms reference_nms(const std::vector<ScoredMask>& masks, double sigma, bool gaussian, double threshold) {
  const std::size_t n = masks.size();
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return masks[a].score > masks[b].score; });
  auto iou = [&](int a, int b) {
    const auto& x = masks[a].primitives;
    const auto& y = masks[b].primitives;
    std::vector<int> inter;
    std::set_intersection(x.begin(), x.end(), y.begin(), y.end(), std::back_inserter(inter));
    const double uni = static_cast<double>(x.size() + y.size() - inter.size());
    return uni > 0 ? static_cast<double>(inter.size()) / uni : 0.0;
  };
  auto f = [&](double v) { return gaussian ? std::exp(-sigma * v * v) : std::max(1.0 - v, 1e-12); };
  std::vector<double> comp(n, 0.0);
  for (std::size_t b = 0; b < n; ++b) {
    for (std::size_t a = 0; a < b; ++a) {
      if (masks[order[a]].label != masks[order[b]].label) continue;
      comp[b] = std::max(comp[b], iou(order[a], order[b]));
    }
  }
  ReferenceNms out;
  out.decayed.assign(n, 0.0);
  for (std::size_t b = 0; b < n; ++b) {
    double decay = 1.0;
    for (std::size_t a = 0; a < b; ++a) {
      if (masks[order[a]].label != masks[order[b]].label) continue;
      const double v = iou(order[a], order[b]);
      if (v > 0) decay = std::min(decay, (gaussian ? std::exp(-sigma * v * v) : 1.0 - v) / f(comp[a]));
    }
    out.decayed[order[b]] = masks[order[b]].score * decay;
  }
  for (int idx : order) {
    if (out.decayed[idx] >= threshold) out.kept.push_back(idx);
  }
  return out;
}

// Proposal pools laid out along a strip of windows; neighbours share primitives.
inline std::vector<ScoredMask> strip_pool(Rng& rng, int windows, int per_window, int labels, bool grid_scores) {
  std::vector<ScoredMask> pool;
  const int span = 40;
  for (int w = 0; w < windows; ++w) {
    for (int k = 0; k < per_window; ++k) {
      ScoredMask m;
      const int lo = w * span / 2 + uniform_int(rng, 0, span - 8);
      const int len = uniform_int(rng, 1, 8);
      for (int i = 0; i < len; ++i) {
        if (uniform(rng, 0, 1) < 0.8) m.primitives.push_back(lo + i);
      }
      if (m.primitives.empty()) m.primitives.push_back(lo);
      m.label = uniform_int(rng, 0, labels - 1);
      m.score = grid_scores ? uniform_int(rng, 1, 16) / 16.0 : uniform(rng, 0.0, 1.0);
      m.window = w;
      pool.push_back(std::move(m));
    }
  }
  return pool;
}

}  // namespace cadspot::testing
