#include "cadspot/model.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cstdio>
#include <map>
#include <set>

#include "cadspot/error.hpp"

namespace cadspot {

std::string_view to_string(PrimitiveKind kind) {
  switch (kind) {
    case PrimitiveKind::Segment: return "segment";
    case PrimitiveKind::Arc: return "arc";
    case PrimitiveKind::Circle: return "circle";
    case PrimitiveKind::Ellipse: return "ellipse";
    case PrimitiveKind::CubicBezier: return "cubic_bezier";
    case PrimitiveKind::QuadBezier: return "quad_bezier";
    case PrimitiveKind::Polyline: return "polyline";
  }
  return "unknown";
}

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

Vec2 ellipse_point(const Ellipse& e, double t) {
  return e.center + rotate({e.rx * std::cos(t), e.ry * std::sin(t)}, e.rotation);
}

// Tight box of a circular arc: endpoints plus every axis extreme inside the sweep.
BBox arc_bounds(Vec2 c, double r, double start, double sweep) {
  BBox box;
  box.expand(c + polar(r, start));
  box.expand(c + polar(r, start + sweep));
  for (int q = 0; q < 4; ++q) {
    const double angle = q * kPi / 2;
    const double rel = wrap_angle(angle - start);
    if (rel <= sweep) box.expand(c + polar(r, angle));
  }
  return box;
}

// Maps the ellipse x(t) = c + M (cos t, sin t) through `m`, producing either an
// Arc/Circle (isotropic image) or an Ellipse.
Geometry transform_conic(Vec2 center, const Eigen::Matrix2d& shape, double start, double sweep,
                         bool full, const Affine2& m) {
  Eigen::Matrix2d lin;
  lin << m.a, m.c, m.b, m.d;
  const Eigen::Matrix2d image = lin * shape;
  Eigen::JacobiSVD<Eigen::Matrix2d> svd(image, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::Matrix2d u = svd.matrixU();
  Eigen::Matrix2d v = svd.matrixV();
  const Eigen::Vector2d sigma = svd.singularValues();
  if (u.determinant() < 0) {
    u.col(1) *= -1;
    v.col(1) *= -1;
  }
  const double phi = std::atan2(u(1, 0), u(0, 0));
  const double psi = std::atan2(v(1, 0), v(0, 0));
  double new_start = start - psi;
  if (v.determinant() < 0) new_start = psi - start - sweep;
  const Vec2 c = m.apply(center);
  const double r1 = sigma(0);
  const double r2 = sigma(1);
  if (std::abs(r1 - r2) <= 1e-12 * std::max(r1, 1.0)) {
    const double r = 0.5 * (r1 + r2);
    if (full) return Circle{c, r};
    return Arc{c, r, wrap_angle(phi + new_start), sweep};
  }
  return Ellipse{c, r1, r2, phi, wrap_angle(new_start), full ? kTwoPi : sweep};
}

}  // namespace

bool Primitive::closed() const {
  return std::visit(Overloaded{[](const Circle&) { return true; },
                               [](const Ellipse& e) { return e.closed(); },
                               [](const Arc& a) { return a.sweep >= kTwoPi; },
                               [](const Polyline& p) { return p.closed; },
                               [](const auto&) { return false; }},
                    geometry);
}

Vec2 Primitive::start_point() const {
  return std::visit(
      Overloaded{[](const Segment& s) { return s.a; },
                 [](const Arc& a) { return a.center + polar(a.radius, a.start); },
                 [](const Circle& c) { return c.center + Vec2{c.radius, 0.0}; },
                 [](const Ellipse& e) { return ellipse_point(e, e.start); },
                 [](const CubicBezier& b) { return b.p[0]; },
                 [](const QuadBezier& b) { return b.p[0]; },
                 [](const Polyline& p) { return p.vertices.front(); }},
      geometry);
}

Vec2 Primitive::end_point() const {
  return std::visit(
      Overloaded{[](const Segment& s) { return s.b; },
                 [](const Arc& a) { return a.center + polar(a.radius, a.start + a.sweep); },
                 [](const Circle& c) { return c.center + Vec2{c.radius, 0.0}; },
                 [](const Ellipse& e) { return ellipse_point(e, e.start + e.sweep); },
                 [](const CubicBezier& b) { return b.p[3]; },
                 [](const QuadBezier& b) { return b.p[2]; },
                 [](const Polyline& p) { return p.closed ? p.vertices.front() : p.vertices.back(); }},
      geometry);
}

BBox Primitive::control_bounds() const {
  BBox box;
  std::visit(Overloaded{[&](const Segment& s) {
                          box.expand(s.a);
                          box.expand(s.b);
                        },
                        [&](const Arc& a) { box = arc_bounds(a.center, a.radius, a.start, a.sweep); },
                        [&](const Circle& c) {
                          box.expand(c.center - Vec2{c.radius, c.radius});
                          box.expand(c.center + Vec2{c.radius, c.radius});
                        },
                        [&](const Ellipse& e) {
                          const double cs = std::cos(e.rotation);
                          const double sn = std::sin(e.rotation);
                          const double hx = std::hypot(e.rx * cs, e.ry * sn);
                          const double hy = std::hypot(e.rx * sn, e.ry * cs);
                          box.expand(e.center - Vec2{hx, hy});
                          box.expand(e.center + Vec2{hx, hy});
                        },
                        [&](const CubicBezier& b) {
                          for (auto p : b.p) box.expand(p);
                        },
                        [&](const QuadBezier& b) {
                          for (auto p : b.p) box.expand(p);
                        },
                        [&](const Polyline& p) {
                          for (auto v : p.vertices) box.expand(v);
                        }},
             geometry);
  return box;
}

void validate_primitive(const Primitive& p) {
  auto fail = [&](const std::string& what) {
    throw ArgumentError("primitive " + std::to_string(p.id) + " (" + std::string(to_string(p.kind())) +
                        "): " + what);
  };
  std::visit(Overloaded{[&](const Arc& a) {
                          if (!(a.radius > 0)) fail("radius must be positive");
                          if (!(a.sweep > 0 && a.sweep <= kTwoPi + 1e-12)) fail("sweep must lie in (0, 2pi]");
                        },
                        [&](const Circle& c) {
                          if (!(c.radius > 0)) fail("radius must be positive");
                        },
                        [&](const Ellipse& e) {
                          if (!(e.rx > 0 && e.ry > 0)) fail("semi-axes must be positive");
                          if (!(e.sweep > 0 && e.sweep <= kTwoPi + 1e-12)) fail("sweep must lie in (0, 2pi]");
                        },
                        [&](const Polyline& pl) {
                          if (pl.vertices.size() < 2) fail("polyline needs at least 2 vertices");
                        },
                        [](const auto&) {}},
             p.geometry);
}

Primitive transformed(const Primitive& p, const Affine2& m) {
  Primitive out{p.id, {}};
  out.geometry = std::visit(
      Overloaded{[&](const Segment& s) -> Geometry { return Segment{m.apply(s.a), m.apply(s.b)}; },
                 [&](const Arc& a) -> Geometry {
                   return transform_conic(a.center, Eigen::Matrix2d::Identity() * a.radius, a.start,
                                          a.sweep, a.sweep >= kTwoPi, m);
                 },
                 [&](const Circle& c) -> Geometry {
                   return transform_conic(c.center, Eigen::Matrix2d::Identity() * c.radius, 0.0, kTwoPi,
                                          true, m);
                 },
                 [&](const Ellipse& e) -> Geometry {
                   const double cs = std::cos(e.rotation);
                   const double sn = std::sin(e.rotation);
                   Eigen::Matrix2d shape;
                   shape << e.rx * cs, -e.ry * sn, e.rx * sn, e.ry * cs;
                   return transform_conic(e.center, shape, e.start, e.sweep, e.closed(), m);
                 },
                 [&](const CubicBezier& b) -> Geometry {
                   CubicBezier r;
                   for (int i = 0; i < 4; ++i) r.p[i] = m.apply(b.p[i]);
                   return r;
                 },
                 [&](const QuadBezier& b) -> Geometry {
                   QuadBezier r;
                   for (int i = 0; i < 3; ++i) r.p[i] = m.apply(b.p[i]);
                   return r;
                 },
                 [&](const Polyline& pl) -> Geometry {
                   Polyline r{{}, pl.closed};
                   r.vertices.reserve(pl.vertices.size());
                   for (auto v : pl.vertices) r.vertices.push_back(m.apply(v));
                   return r;
                 }},
      p.geometry);
  return out;
}

int Drawing::add(Geometry g) {
  Primitive p{static_cast<int>(primitives.size()), std::move(g)};
  bounds.expand(p.control_bounds());
  primitives.push_back(std::move(p));
  return primitives.back().id;
}

void Drawing::recompute_bounds() {
  bounds = BBox{};
  for (const auto& p : primitives) bounds.expand(p.control_bounds());
}

ClassTable::ClassTable(std::vector<ClassInfo> classes, std::string background_color)
    : classes_(std::move(classes)), background_color_(std::move(background_color)) {
  for (std::size_t i = 0; i < classes_.size(); ++i) {
    if (classes_[i].id != static_cast<int>(i)) {
      throw ConfigError("class table ids must be dense and ordered; entry " + std::to_string(i) +
                        " has id " + std::to_string(classes_[i].id));
    }
  }
}

const ClassTable& ClassTable::standard() {
  static const ClassTable table = [] {
    static constexpr std::array<const char*, 35> names = {
        "single door", "double door",   "sliding door",    "folding door",  "revolving door",
        "rolling door", "window",       "bay window",      "blind window",  "opening symbol",
        "sofa",        "bed",           "chair",           "table",         "TV cabinet",
        "Wardrobe",    "cabinet",       "gas stove",       "sink",          "refrigerator",
        "air conditioner", "bath",      "bath tub",        "washing machine", "squat toilet",
        "urinal",      "toilet",        "stairs",          "elevator",      "escalator",
        "row chairs",  "parking spot",  "wall",            "curtain wall",  "railing"};
    static constexpr std::array<const char*, 35> colors = {
        "#e6194b", "#3cb44b", "#ffe119", "#4363d8", "#f58231", "#911eb4", "#46f0f0",
        "#f032e6", "#bcf60c", "#fabebe", "#008080", "#e6beff", "#9a6324", "#fffac8",
        "#800000", "#aaffc3", "#808000", "#ffd8b1", "#000075", "#808080", "#1f77b4",
        "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
        "#bcbd22", "#17becf", "#393b79", "#637939", "#000000", "#8c6d31", "#843c39"};
    std::vector<ClassInfo> classes;
    for (int i = 0; i < 35; ++i) {
      classes.push_back({i, names[i], i < 30 ? ClassKind::Thing : ClassKind::Stuff, colors[i]});
    }
    return ClassTable(std::move(classes));
  }();
  return table;
}

bool ClassTable::is_thing(int id) const {
  return id >= 0 && id < static_cast<int>(classes_.size()) && classes_[id].kind == ClassKind::Thing;
}

bool ClassTable::is_stuff(int id) const {
  return id >= 0 && id < static_cast<int>(classes_.size()) && classes_[id].kind == ClassKind::Stuff;
}

std::optional<int> ClassTable::find(std::string_view name) const {
  for (const auto& c : classes_) {
    if (c.name == name) return c.id;
  }
  return std::nullopt;
}

const std::string& ClassTable::color(int id) const {
  if (id == background_id()) return background_color_;
  if (id < 0 || id > background_id()) throw ArgumentError("no palette entry for class " + std::to_string(id));
  return classes_[id].color;
}

std::vector<int> binarize_mask(const InstanceProposal& proposal, double threshold) {
  if (!std::isfinite(threshold)) throw ArgumentError("mask threshold must be finite");
  std::vector<int> out;
  for (std::size_t i = 0; i < proposal.mask.size(); ++i) {
    if (proposal.mask[i] >= threshold) out.push_back(static_cast<int>(i));
  }
  return out;
}

int argmax_class(const std::vector<double>& scores) {
  int best = -1;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (best < 0 || scores[i] > scores[best]) best = static_cast<int>(i);
  }
  return best;
}

LabelingReport validate_labeling(const PanopticLabeling& labeling, const ClassTable& table,
                                 std::optional<std::size_t> expected_size) {
  LabelingReport report;
  using Kind = LabelingViolation::Kind;
  if (labeling.semantic.size() != labeling.instance.size() ||
      (expected_size && labeling.semantic.size() != *expected_size)) {
    report.violations.push_back({Kind::SizeMismatch, -1, 0, {},
                                 "semantic/instance/primitive counts differ: " +
                                     std::to_string(labeling.semantic.size()) + "/" +
                                     std::to_string(labeling.instance.size()) +
                                     (expected_size ? "/" + std::to_string(*expected_size) : "")});
    return report;
  }
  std::map<int, std::set<int>> classes_of;
  std::map<int, int> first_member;
  for (std::size_t i = 0; i < labeling.size(); ++i) {
    const int pid = static_cast<int>(i);
    const int sem = labeling.semantic[i];
    const int inst = labeling.instance[i];
    if (!table.valid_label(sem)) {
      report.violations.push_back({Kind::SemanticOutOfRange, pid, inst, {sem},
                                   "primitive " + std::to_string(pid) + " has semantic id " +
                                       std::to_string(sem) + " outside [0, " +
                                       std::to_string(table.background_id()) + "]"});
    }
    if (inst < 0) {
      report.violations.push_back({Kind::NegativeInstance, pid, inst, {},
                                   "primitive " + std::to_string(pid) + " has negative instance id"});
    } else if (inst > 0) {
      classes_of[inst].insert(sem);
      first_member.emplace(inst, pid);
    }
  }
  for (const auto& [inst, classes] : classes_of) {
    if (classes.size() > 1) {
      std::string list;
      for (int c : classes) list += (list.empty() ? "" : ",") + std::to_string(c);
      report.violations.push_back({Kind::MixedInstance, first_member[inst], inst,
                                   {classes.begin(), classes.end()},
                                   "instance " + std::to_string(inst) + " spans classes {" + list + "}"});
    }
  }
  return report;
}

}  // namespace cadspot
