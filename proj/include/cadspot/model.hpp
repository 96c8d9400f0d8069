#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "cadspot/geometry.hpp"

namespace cadspot {

enum class PrimitiveKind { Segment, Arc, Circle, Ellipse, CubicBezier, QuadBezier, Polyline };

inline constexpr int kNumPrimitiveKinds = 7;

std::string_view to_string(PrimitiveKind kind);

struct Segment {
  Vec2 a, b;
};

/// Circular arc, counter-clockwise in drawing coordinates from `start` over `sweep` radians.
struct Arc {
  Vec2 center;
  double radius = 1.0;
  double start = 0.0;
  double sweep = kTwoPi;  // (0, 2π]
};

struct Circle {
  Vec2 center;
  double radius = 1.0;
};

/// Elliptical arc p(t) = center + R(rotation) (rx cos t, ry sin t), t in [start, start + sweep].
/// sweep == 2π denotes the full (closed) ellipse.
struct Ellipse {
  Vec2 center;
  double rx = 1.0;
  double ry = 1.0;
  double rotation = 0.0;
  double start = 0.0;
  double sweep = kTwoPi;

  bool closed() const { return sweep >= kTwoPi; }
};

struct CubicBezier {
  std::array<Vec2, 4> p;
};

struct QuadBezier {
  std::array<Vec2, 3> p;
};

struct Polyline {
  std::vector<Vec2> vertices;  // >= 2
  bool closed = false;
};

using Geometry = std::variant<Segment, Arc, Circle, Ellipse, CubicBezier, QuadBezier, Polyline>;

struct Primitive {
  int id = 0;
  Geometry geometry;

  PrimitiveKind kind() const { return static_cast<PrimitiveKind>(geometry.index()); }
  /// Closed primitives wrap around: circles, full ellipses, closed polylines.
  bool closed() const;
  Vec2 start_point() const;
  Vec2 end_point() const;
  /// Bounding box of the control geometry (contains the curve).
  BBox control_bounds() const;
};

/// Checks the per-kind geometric invariants; throws ArgumentError on violation.
void validate_primitive(const Primitive& p);

Primitive transformed(const Primitive& p, const Affine2& m);

struct Drawing {
  std::vector<Primitive> primitives;  // primitives[i].id == i
  BBox bounds;
  std::optional<double> source_scale;  // units per meter

  std::size_t size() const { return primitives.size(); }
  /// Appends a primitive, assigning the next dense id and growing the bounds.
  int add(Geometry g);
  void recompute_bounds();
};

enum class ClassKind { Thing, Stuff };

struct ClassInfo {
  int id = 0;
  std::string name;
  ClassKind kind = ClassKind::Thing;
  std::string color;  // "#rrggbb"
};

/// Ordered class table. Ids are 0..size()-1; the extra label `background_id()`
/// (== size()) marks primitives that belong to no symbol class.
class ClassTable {
 public:
  ClassTable() = default;
  explicit ClassTable(std::vector<ClassInfo> classes, std::string background_color = "#c8c8c8");

  /// 35 FloorPlanCAD-style classes: 30 things followed by 5 stuff classes.
  static const ClassTable& standard();

  const std::vector<ClassInfo>& classes() const { return classes_; }
  std::size_t size() const { return classes_.size(); }
  int background_id() const { return static_cast<int>(classes_.size()); }
  /// Number of semantic labels including background (36 for the standard table).
  int num_semantic_labels() const { return static_cast<int>(classes_.size()) + 1; }
  bool is_thing(int id) const;
  bool is_stuff(int id) const;
  bool valid_label(int id) const { return id >= 0 && id <= background_id(); }
  std::optional<int> find(std::string_view name) const;
  const std::string& color(int id) const;
  const std::string& background_color() const { return background_color_; }

 private:
  std::vector<ClassInfo> classes_;
  std::string background_color_ = "#c8c8c8";
};

struct PanopticLabeling {
  std::vector<int> semantic;  // per primitive class id
  std::vector<int> instance;  // per primitive instance id, 0 = none

  std::size_t size() const { return semantic.size(); }
};

/// Scored likelihood mask over the primitives of its scope (a window or the whole drawing).
struct InstanceProposal {
  std::vector<double> mask;
  std::vector<double> class_scores;
  double score = 0.0;

  bool operator==(const InstanceProposal&) const = default;
};

/// Everything a window-level predictor emits. Semantic rows and instance masks
/// are aligned with `primitives` (ascending drawing ids of the window's subset).
struct WindowProposals {
  BBox window;
  std::vector<int> primitives;
  std::vector<std::vector<double>> semantic;  // log-likelihoods, one row of K_sem per primitive
  std::vector<InstanceProposal> instances;

  bool operator==(const WindowProposals&) const = default;
};

/// Indices i with mask[i] >= threshold, ascending.
std::vector<int> binarize_mask(const InstanceProposal& proposal, double threshold = 0.5);

/// Index of the largest class score; ties resolve to the lowest index. -1 for an empty vector.
int argmax_class(const std::vector<double>& scores);

struct LabelingViolation {
  enum class Kind { SizeMismatch, SemanticOutOfRange, NegativeInstance, MixedInstance };
  Kind kind;
  int primitive = -1;         // first offending primitive, if any
  int instance = 0;           // offending instance id, if any
  std::vector<int> classes;   // classes seen for a mixed instance
  std::string message;
};

struct LabelingReport {
  std::vector<LabelingViolation> violations;
  bool ok() const { return violations.empty(); }
};

/// Reports structural violations; never repairs anything.
LabelingReport validate_labeling(const PanopticLabeling& labeling, const ClassTable& table,
                                 std::optional<std::size_t> expected_size = std::nullopt);

}  // namespace cadspot
