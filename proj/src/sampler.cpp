#include "cadspot/sampler.hpp"

#include <algorithm>
#include <boost/math/quadrature/gauss.hpp>
#include <cmath>
#include <functional>
#include <memory>

#include "cadspot/error.hpp"

namespace cadspot {
namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

constexpr double kSubdivisionTolerance = 1e-9;

// Smooth parametric curve with a piecewise arc-length table. Pieces are
// [params[i], params[i+1]] with cumulative length cumulative[i] at params[i].
class ParametricCurve {
 public:
  using Eval = std::function<Vec2(double)>;

  ParametricCurve(Eval position, Eval derivative) : position_(std::move(position)), derivative_(std::move(derivative)) {}

  void set_table(std::vector<double> params, std::vector<double> cumulative) {
    params_ = std::move(params);
    cumulative_ = std::move(cumulative);
  }

  double length() const { return cumulative_.back(); }

  Vec2 point_at(double s) const {
    if (s <= 0.0) return position_(params_.front());
    if (s >= length()) return position_(params_.back());
    auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), s);
    const std::size_t i = static_cast<std::size_t>(std::distance(cumulative_.begin(), it)) - 1;
    const double t0 = params_[i];
    const double t1 = params_[i + 1];
    const double s0 = cumulative_[i];
    const double piece = cumulative_[i + 1] - s0;
    double t = piece > 0 ? t0 + (t1 - t0) * (s - s0) / piece : t0;
    auto speed = [this](double u) { return norm(derivative_(u)); };
    for (int iter = 0; iter < 12; ++iter) {
      const double g = s0 + boost::math::quadrature::gauss<double, 10>::integrate(speed, t0, t) - s;
      const double v = speed(t);
      if (!(v > 0)) break;
      const double next = std::clamp(t - g / v, t0, t1);
      const bool done = std::abs(next - t) <= 1e-15 * std::max(1.0, std::abs(t));
      t = next;
      if (done) break;
    }
    return position_(t);
  }

 private:
  Eval position_;
  Eval derivative_;
  std::vector<double> params_;
  std::vector<double> cumulative_;
};

template <std::size_t N>
double polygon_length(const std::array<Vec2, N>& p) {
  double len = 0.0;
  for (std::size_t i = 0; i + 1 < N; ++i) len += distance(p[i], p[i + 1]);
  return len;
}

template <std::size_t N>
std::pair<std::array<Vec2, N>, std::array<Vec2, N>> de_casteljau_split(const std::array<Vec2, N>& p) {
  std::array<Vec2, N> left{}, right{};
  std::array<Vec2, N> work = p;
  for (std::size_t level = 0; level < N; ++level) {
    left[level] = work[0];
    right[N - 1 - level] = work[N - 1 - level];
    for (std::size_t i = 0; i + 1 < N - level; ++i) work[i] = lerp(work[i], work[i + 1], 0.5);
  }
  return {left, right};
}

// Recursive de Casteljau subdivision until the control polygon and chord agree
// within `tol`; each leaf contributes the Gravesen length estimate.
template <std::size_t N>
void subdivide(const std::array<Vec2, N>& p, double t0, double t1, double tol, int depth,
               std::vector<double>& params, std::vector<double>& cumulative) {
  const double poly = polygon_length(p);
  const double chord = distance(p.front(), p[N - 1]);
  if (poly - chord <= tol || depth >= 48) {
    constexpr double degree = static_cast<double>(N - 1);
    const double leaf = (2.0 * chord + (degree - 1.0) * poly) / (degree + 1.0);
    params.push_back(t1);
    cumulative.push_back(cumulative.back() + leaf);
    return;
  }
  auto [left, right] = de_casteljau_split(p);
  const double tm = 0.5 * (t0 + t1);
  subdivide(left, t0, tm, tol, depth + 1, params, cumulative);
  subdivide(right, tm, t1, tol, depth + 1, params, cumulative);
}

template <std::size_t N>
Vec2 bezier_point(const std::array<Vec2, N>& p, double t) {
  std::array<Vec2, N> work = p;
  for (std::size_t level = 1; level < N; ++level) {
    for (std::size_t i = 0; i + level < N; ++i) work[i] = lerp(work[i], work[i + 1], t);
  }
  return work[0];
}

template <std::size_t N>
Vec2 bezier_derivative(const std::array<Vec2, N>& p, double t) {
  std::array<Vec2, N - 1> hodograph{};
  for (std::size_t i = 0; i + 1 < N; ++i) hodograph[i] = (p[i + 1] - p[i]) * static_cast<double>(N - 1);
  if constexpr (N == 2) {
    return hodograph[0];
  } else {
    return bezier_point(hodograph, t);
  }
}

template <std::size_t N>
ParametricCurve bezier_curve(const std::array<Vec2, N>& p) {
  ParametricCurve curve([p](double t) { return bezier_point(p, t); },
                        [p](double t) { return bezier_derivative(p, t); });
  std::vector<double> params{0.0};
  std::vector<double> cumulative{0.0};
  const double tol = kSubdivisionTolerance * std::max(1.0, polygon_length(p));
  subdivide(p, 0.0, 1.0, tol, 0, params, cumulative);
  curve.set_table(std::move(params), std::move(cumulative));
  return curve;
}

ParametricCurve ellipse_curve(const Ellipse& e) {
  auto position = [e](double t) {
    return e.center + rotate({e.rx * std::cos(t), e.ry * std::sin(t)}, e.rotation);
  };
  auto derivative = [e](double t) { return rotate({-e.rx * std::sin(t), e.ry * std::cos(t)}, e.rotation); };
  ParametricCurve curve(position, derivative);
  const int pieces = std::max(16, static_cast<int>(std::ceil(e.sweep / (kPi / 32))));
  std::vector<double> params{e.start};
  std::vector<double> cumulative{0.0};
  auto speed = [&](double t) { return norm(derivative(t)); };
  for (int i = 1; i <= pieces; ++i) {
    const double a = e.start + e.sweep * (i - 1) / pieces;
    const double b = e.start + e.sweep * i / pieces;
    const double piece = boost::math::quadrature::gauss<double, 30>::integrate(speed, a, b);
    params.push_back(b);
    cumulative.push_back(cumulative.back() + piece);
  }
  curve.set_table(std::move(params), std::move(cumulative));
  return curve;
}

// Arc-length evaluation of any primitive: total length plus point at length s.
struct LengthParametrization {
  double length = 0.0;
  std::function<Vec2(double)> point_at;
};

LengthParametrization parametrize(const Primitive& primitive) {
  return std::visit(
      Overloaded{
          [](const Segment& s) -> LengthParametrization {
            const double len = distance(s.a, s.b);
            return {len, [s, len](double at) { return len > 0 ? lerp(s.a, s.b, at / len) : s.a; }};
          },
          [](const Arc& a) -> LengthParametrization {
            return {a.radius * a.sweep,
                    [a](double at) { return a.center + polar(a.radius, a.start + at / a.radius); }};
          },
          [](const Circle& c) -> LengthParametrization {
            return {kTwoPi * c.radius, [c](double at) { return c.center + polar(c.radius, at / c.radius); }};
          },
          [](const Ellipse& e) -> LengthParametrization {
            auto curve = std::make_shared<ParametricCurve>(ellipse_curve(e));
            return {curve->length(), [curve](double at) { return curve->point_at(at); }};
          },
          [](const CubicBezier& b) -> LengthParametrization {
            auto curve = std::make_shared<ParametricCurve>(bezier_curve(b.p));
            return {curve->length(), [curve](double at) { return curve->point_at(at); }};
          },
          [](const QuadBezier& b) -> LengthParametrization {
            auto curve = std::make_shared<ParametricCurve>(bezier_curve(b.p));
            return {curve->length(), [curve](double at) { return curve->point_at(at); }};
          },
          [](const Polyline& pl) -> LengthParametrization {
            auto verts = std::make_shared<std::vector<Vec2>>(pl.vertices);
            if (pl.closed) verts->push_back(pl.vertices.front());
            auto cumulative = std::make_shared<std::vector<double>>(1, 0.0);
            for (std::size_t i = 1; i < verts->size(); ++i) {
              cumulative->push_back(cumulative->back() + distance((*verts)[i - 1], (*verts)[i]));
            }
            return {cumulative->back(), [verts, cumulative](double at) {
                      const auto& cum = *cumulative;
                      if (at <= 0.0) return verts->front();
                      if (at >= cum.back()) return verts->back();
                      auto it = std::upper_bound(cum.begin(), cum.end(), at);
                      std::size_t i = static_cast<std::size_t>(std::distance(cum.begin(), it)) - 1;
                      const double edge = cum[i + 1] - cum[i];
                      return edge > 0 ? lerp((*verts)[i], (*verts)[i + 1], (at - cum[i]) / edge)
                                      : (*verts)[i];
                    }};
          }},
      primitive.geometry);
}

}  // namespace

double arc_length(const Primitive& primitive) { return parametrize(primitive).length; }

std::vector<Vec2> sample_primitive(const Primitive& primitive, double d) {
  if (!(d > 0) || !std::isfinite(d)) throw ArgumentError("sampling interval must be positive, got " + std::to_string(d));
  const LengthParametrization path = parametrize(primitive);
  const double len = path.length;
  std::vector<Vec2> out;
  if (!(len > 1e-12)) {
    out.push_back(primitive.start_point());
    return out;
  }
  const double tol = 1e-9 * std::max(len, d);
  if (primitive.closed()) {
    auto count = static_cast<std::size_t>(std::ceil(len / d - 1e-9));
    double step = d;
    if (count < 3) {
      count = 3;
      step = len / 3.0;
    }
    out.reserve(count);
    for (std::size_t k = 0; k < count; ++k) out.push_back(path.point_at(static_cast<double>(k) * step));
    return out;
  }
  const auto whole = static_cast<std::size_t>(std::floor(len / d + 1e-9));
  out.reserve(whole + 2);
  for (std::size_t k = 0; k <= whole; ++k) {
    const double at = static_cast<double>(k) * d;
    if (at >= len - tol) break;
    out.push_back(path.point_at(at));
  }
  out.push_back(primitive.end_point());
  return out;
}

DensePointCloud sample_drawing(const Drawing& drawing, double d) {
  if (drawing.primitives.empty()) throw ArgumentError("no primitives");
  if (!(d > 0) || !std::isfinite(d)) throw ArgumentError("sampling interval must be positive, got " + std::to_string(d));
  DensePointCloud cloud;
  cloud.per_primitive_count.reserve(drawing.size());
  cloud.offsets.reserve(drawing.size() + 1);
  cloud.offsets.push_back(0);
  for (const auto& primitive : drawing.primitives) {
    const auto samples = sample_primitive(primitive, d);
    for (const auto& p : samples) {
      cloud.points.push_back({p.x, p.y, 0.0});
      cloud.owner.push_back(primitive.id);
    }
    cloud.per_primitive_count.push_back(static_cast<int>(samples.size()));
    cloud.offsets.push_back(cloud.points.size());
  }
  return cloud;
}

}  // namespace cadspot
