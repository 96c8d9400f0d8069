#pragma once

#include <array>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "cadspot/model.hpp"

namespace cadspot {

struct ReconstructConfig {
  std::optional<double> merge_tol;  // default: two raster cells
  int raster_res = 8192;            // cells along the longer axis of the wall bounds
  double area_min = 0.0005;         // fraction of the raster area
  double simplify_px = 1.0;         // Douglas-Peucker tolerance in cells
  double collinear_deg = 1.0;       // vertices turning less than this are removed
  double door_tol = 0.05;           // arc center to leaf endpoint coincidence
  double group_tol = 0.2;           // window segment endpoint proximity
  double angle_tol_deg = 5.0;       // window segment direction gate
  double wall_height = 3.0;
  std::vector<std::string> wall_classes{"wall"};
  std::vector<std::string> window_classes{"window", "bay window", "blind window"};
};

nlohmann::json to_json(const ReconstructConfig& config);
void apply_json(ReconstructConfig& config, const nlohmann::json& j);
void validate(const ReconstructConfig& config);

enum class WallRole { FloorBoundary, WallComponent };

struct WallPolygon {
  std::vector<Vec2> loop;                // counter-clockwise
  std::vector<std::vector<Vec2>> holes;  // clockwise
  WallRole role = WallRole::WallComponent;
  int component = 0;                     // background component index in the raster
};

struct WallExtraction {
  std::vector<WallPolygon> polygons;
  std::vector<std::string> warnings;
  double cell = 0.0;
  int components = 0;  // enclosed background components at least area_min large
};

/// Endpoint merging, rasterization, background labeling and border tracing.
/// Border-touching background is outside; the largest enclosed component is the
/// floor boundary and the other components of at least area_min are wall components.
WallExtraction extract_walls(const std::vector<Primitive>& walls, const ReconstructConfig& config = {});

/// Geometric pieces after endpoint merging: open and closed polylines.
struct MergedPiece {
  std::vector<Vec2> points;
  bool closed = false;
};

/// Flattens primitives (curves at `flatten_step`) and snaps primitive endpoints
/// lying within `tol` of each other to their cluster mean. Zero-length pieces and
/// duplicate straight pieces are dropped.
std::vector<MergedPiece> merge_endpoints(const std::vector<Primitive>& primitives, double tol, double flatten_step);

bool is_simple_polygon(const std::vector<Vec2>& loop);
double signed_area(const std::vector<Vec2>& loop);

enum class DoorSubtype { Single, Double, Sliding, Folding };
std::string_view to_string(DoorSubtype subtype);

struct DoorLeaf {
  Vec2 pivot;
  double width = 0.0;  // arc radius
  double swing = 0.0;  // radians, signed, from the leaf line to the arc's far end
  int arc = -1;        // primitive ids
  int line = -1;
};

struct DoorRecord {
  int instance = 0;
  DoorSubtype subtype = DoorSubtype::Single;
  bool parameterized = true;
  std::string reason;         // why parameterization failed
  std::vector<DoorLeaf> leaves;
  Vec2 position;              // pivot, pivot midpoint or midline center
  double orientation = 0.0;   // radians, direction across the opening
  double width = 0.0;         // opening width
  std::vector<int> primitives;
};

struct DoorInstance {
  int instance = 0;
  DoorSubtype subtype = DoorSubtype::Single;
  std::vector<Primitive> members;
};

DoorRecord extract_door(const DoorInstance& door, double tol = 0.05);
std::vector<DoorRecord> extract_doors(const std::vector<DoorInstance>& doors, double tol = 0.05);

struct WindowRecord {
  int instance = 0;
  Vec2 a, b;                 // centerline
  std::vector<int> members;  // primitive ids of the group, ascending
  int centerline_member = -1;
};

struct WindowInstance {
  int instance = 0;
  std::vector<Primitive> members;
};

/// Union-find grouping of straight members (segments and polyline edges) by
/// endpoint proximity and direction, one record per group.
std::vector<WindowRecord> extract_windows(const std::vector<WindowInstance>& windows, double group_tol = 0.2,
                                          double angle_tol_deg = 5.0);

struct SceneParameters {
  std::vector<WallPolygon> walls;
  std::vector<DoorRecord> doors;
  std::vector<WindowRecord> windows;
  double wall_height = 3.0;
  std::vector<std::string> warnings;
};

/// Splits a labeled drawing into wall primitives, door instances and window
/// instances by class name and runs the three extractors.
SceneParameters reconstruct_scene(const Drawing& drawing, const PanopticLabeling& labeling, const ClassTable& table,
                                  const ReconstructConfig& config = {});

nlohmann::json scene_to_json(const SceneParameters& scene);
SceneParameters scene_from_json(const nlohmann::json& j);

struct Mesh {
  std::vector<std::array<double, 3>> vertices;
  std::vector<std::array<int, 3>> triangles;  // zero-based, counter-clockwise seen from outside
};

/// Prism extrusion of every wall polygon (holes become inner walls) with both caps.
/// Degenerate polygons are skipped and reported in `warnings`.
Mesh extrude_walls(const std::vector<WallPolygon>& walls, double height, std::vector<std::string>* warnings = nullptr);

/// Every undirected edge is used by exactly two triangles, once in each direction.
bool is_watertight(const Mesh& mesh);

std::string mesh_to_obj(const Mesh& mesh);

/// Ear-clipping triangulation of a polygon with holes; indices refer to the
/// concatenation loop, holes[0], holes[1], ...
std::vector<std::array<int, 3>> triangulate(const std::vector<Vec2>& loop, const std::vector<std::vector<Vec2>>& holes);

}  // namespace cadspot
