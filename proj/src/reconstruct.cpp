#include "cadspot/reconstruct.hpp"

#include <algorithm>
#include <boost/pending/disjoint_sets.hpp>
#include <cmath>
#include <map>
#include <numeric>
#include <set>
#include <unordered_map>

#include "cadspot/error.hpp"
#include "cadspot/raster.hpp"
#include "cadspot/sampler.hpp"
#include "cadspot/svg_io.hpp"

namespace cadspot {

using nlohmann::json;

namespace {

double to_radians(double deg) { return deg * kPi / 180.0; }

struct Dsu {
  std::vector<int> rank, parent;
  boost::disjoint_sets<int*, int*> sets;
  explicit Dsu(std::size_t n) : rank(n), parent(n), sets(rank.data(), parent.data()) {
    for (std::size_t i = 0; i < n; ++i) sets.make_set(static_cast<int>(i));
  }
  int find(int i) { return sets.find_set(i); }
  void unite(int a, int b) { sets.union_set(a, b); }
};

// Straight pieces of a primitive: its segment or polyline edges.
std::vector<std::pair<Vec2, Vec2>> straight_pieces(const Primitive& p) {
  std::vector<std::pair<Vec2, Vec2>> out;
  if (const auto* s = std::get_if<Segment>(&p.geometry)) {
    out.emplace_back(s->a, s->b);
  } else if (const auto* pl = std::get_if<Polyline>(&p.geometry)) {
    const auto& v = pl->vertices;
    for (std::size_t i = 0; i + 1 < v.size(); ++i) out.emplace_back(v[i], v[i + 1]);
    if (pl->closed && v.size() > 2) out.emplace_back(v.back(), v.front());
  }
  return out;
}

double point_segment_distance(Vec2 p, Vec2 a, Vec2 b) {
  const Vec2 ab = b - a;
  const double len2 = dot(ab, ab);
  if (len2 == 0.0) return distance(p, a);
  const double t = std::clamp(dot(p - a, ab) / len2, 0.0, 1.0);
  return distance(p, a + ab * t);
}

void douglas_peucker(const std::vector<Vec2>& pts, std::size_t first, std::size_t last, double eps,
                     std::vector<char>& keep) {
  std::vector<std::pair<std::size_t, std::size_t>> stack{{first, last}};
  while (!stack.empty()) {
    auto [lo, hi] = stack.back();
    stack.pop_back();
    if (hi <= lo + 1) continue;
    double best = -1.0;
    std::size_t idx = lo;
    for (std::size_t k = lo + 1; k < hi; ++k) {
      const double d = point_segment_distance(pts[k], pts[lo], pts[hi % pts.size()]);
      if (d > best) {
        best = d;
        idx = k;
      }
    }
    if (best > eps) {
      keep[idx] = 1;
      stack.push_back({lo, idx});
      stack.push_back({idx, hi});
    }
  }
}

std::vector<Vec2> remove_collinear(std::vector<Vec2> loop, double angle_tol) {
  bool changed = true;
  while (changed && loop.size() >= 3) {
    changed = false;
    for (std::size_t i = 0; i < loop.size() && loop.size() >= 3; ++i) {
      const Vec2 prev = loop[(i + loop.size() - 1) % loop.size()];
      const Vec2 next = loop[(i + 1) % loop.size()];
      const Vec2 u = loop[i] - prev;
      const Vec2 v = next - loop[i];
      const double nu = norm(u);
      const double nv = norm(v);
      bool drop = nu == 0.0 || nv == 0.0;
      if (!drop) {
        const double turn = std::abs(std::atan2(cross(u, v), dot(u, v)));
        drop = turn < angle_tol || turn > kPi - angle_tol;
      }
      if (drop) {
        loop.erase(loop.begin() + static_cast<std::ptrdiff_t>(i));
        changed = true;
        --i;
      }
    }
  }
  return loop;
}

std::vector<Vec2> simplify_ring(const std::vector<Vec2>& ring, double eps, double angle_tol) {
  if (ring.size() < 3) return ring;
  std::size_t far = 0;
  double best = -1.0;
  for (std::size_t k = 1; k < ring.size(); ++k) {
    const double d = distance(ring[k], ring[0]);
    if (d > best) {
      best = d;
      far = k;
    }
  }
  std::vector<char> keep(ring.size(), 0);
  keep[0] = keep[far] = 1;
  douglas_peucker(ring, 0, far, eps, keep);
  douglas_peucker(ring, far, ring.size(), eps, keep);
  std::vector<Vec2> out;
  for (std::size_t k = 0; k < ring.size(); ++k) {
    if (keep[k]) out.push_back(ring[k]);
  }
  return remove_collinear(std::move(out), angle_tol);
}

bool segments_intersect(Vec2 a, Vec2 b, Vec2 c, Vec2 d) {
  auto orient = [](Vec2 p, Vec2 q, Vec2 r) {
    const double v = cross(q - p, r - p);
    return (v > 0.0) - (v < 0.0);
  };
  auto on_segment = [](Vec2 p, Vec2 q, Vec2 r) {
    return std::min(p.x, q.x) <= r.x && r.x <= std::max(p.x, q.x) && std::min(p.y, q.y) <= r.y &&
           r.y <= std::max(p.y, q.y);
  };
  const int o1 = orient(a, b, c), o2 = orient(a, b, d), o3 = orient(c, d, a), o4 = orient(c, d, b);
  if (o1 != o2 && o3 != o4) return true;
  if (o1 == 0 && on_segment(a, b, c)) return true;
  if (o2 == 0 && on_segment(a, b, d)) return true;
  if (o3 == 0 && on_segment(c, d, a)) return true;
  if (o4 == 0 && on_segment(c, d, b)) return true;
  return false;
}

}  // namespace

double signed_area(const std::vector<Vec2>& loop) {
  double a = 0.0;
  for (std::size_t i = 0; i < loop.size(); ++i) a += cross(loop[i], loop[(i + 1) % loop.size()]);
  return 0.5 * a;
}

bool is_simple_polygon(const std::vector<Vec2>& loop) {
  const std::size_t n = loop.size();
  if (n < 3) return false;
  for (std::size_t i = 0; i < n; ++i) {
    if (loop[i] == loop[(i + 1) % n]) return false;
    for (std::size_t j = i + 1; j < n; ++j) {
      const bool adjacent = j == i + 1 || (i == 0 && j == n - 1);
      if (adjacent) continue;
      if (segments_intersect(loop[i], loop[(i + 1) % n], loop[j], loop[(j + 1) % n])) return false;
    }
  }
  return true;
}

// ---------------------------------------------------------------------------
// Walls

std::vector<MergedPiece> merge_endpoints(const std::vector<Primitive>& primitives, double tol, double flatten_step) {
  if (!(flatten_step > 0.0)) throw ArgumentError("flatten step must be positive");
  std::vector<MergedPiece> pieces;
  for (const Primitive& p : primitives) {
    MergedPiece piece;
    piece.closed = p.closed();
    if (const auto* s = std::get_if<Segment>(&p.geometry)) {
      piece.points = {s->a, s->b};
    } else if (const auto* pl = std::get_if<Polyline>(&p.geometry)) {
      piece.points = pl->vertices;
    } else {
      piece.points = sample_primitive(p, flatten_step);
      if (!piece.closed && piece.points.size() >= 2) {
        piece.points.front() = p.start_point();
        piece.points.back() = p.end_point();
      }
    }
    pieces.push_back(std::move(piece));
  }

  // Endpoint clustering within tol (open pieces only).
  std::vector<std::pair<std::size_t, bool>> refs;  // (piece, is_last)
  std::vector<Vec2> ends;
  for (std::size_t i = 0; i < pieces.size(); ++i) {
    if (pieces[i].closed || pieces[i].points.empty()) continue;
    refs.push_back({i, false});
    ends.push_back(pieces[i].points.front());
    refs.push_back({i, true});
    ends.push_back(pieces[i].points.back());
  }
  if (tol > 0.0 && !ends.empty()) {
    Dsu dsu(ends.size());
    struct KeyHash {
      std::size_t operator()(const std::pair<long long, long long>& k) const {
        return std::hash<long long>()(k.first * 73856093LL ^ k.second * 19349663LL);
      }
    };
    std::unordered_map<std::pair<long long, long long>, std::vector<int>, KeyHash> grid;
    for (std::size_t k = 0; k < ends.size(); ++k) {
      const long long cx = static_cast<long long>(std::floor(ends[k].x / tol));
      const long long cy = static_cast<long long>(std::floor(ends[k].y / tol));
      for (long long dx = -1; dx <= 1; ++dx) {
        for (long long dy = -1; dy <= 1; ++dy) {
          auto it = grid.find({cx + dx, cy + dy});
          if (it == grid.end()) continue;
          for (int other : it->second) {
            if (distance(ends[k], ends[other]) <= tol) dsu.unite(static_cast<int>(k), other);
          }
        }
      }
      grid[{cx, cy}].push_back(static_cast<int>(k));
    }
    std::map<int, std::pair<Vec2, int>> sums;
    for (std::size_t k = 0; k < ends.size(); ++k) {
      auto& s = sums[dsu.find(static_cast<int>(k))];
      s.first = s.first + ends[k];
      ++s.second;
    }
    for (std::size_t k = 0; k < ends.size(); ++k) {
      const auto& s = sums[dsu.find(static_cast<int>(k))];
      const Vec2 mean = s.first / static_cast<double>(s.second);
      auto& pts = pieces[refs[k].first].points;
      (refs[k].second ? pts.back() : pts.front()) = mean;
    }
  }

  std::vector<MergedPiece> out;
  std::set<std::pair<std::pair<double, double>, std::pair<double, double>>> seen_lines;
  for (auto& piece : pieces) {
    std::vector<Vec2> pts;
    for (Vec2 q : piece.points) {
      if (pts.empty() || !(pts.back() == q)) pts.push_back(q);
    }
    if (piece.closed && pts.size() > 1 && pts.front() == pts.back()) pts.pop_back();
    if (pts.size() < 2) continue;
    if (pts.size() == 2 && !piece.closed) {
      auto a = std::make_pair(pts[0].x, pts[0].y);
      auto b = std::make_pair(pts[1].x, pts[1].y);
      if (b < a) std::swap(a, b);
      if (!seen_lines.insert({a, b}).second) continue;
    }
    out.push_back({std::move(pts), piece.closed});
  }
  return out;
}

WallExtraction extract_walls(const std::vector<Primitive>& walls, const ReconstructConfig& config) {
  validate(config);
  WallExtraction out;
  if (walls.empty()) {
    out.warnings.push_back("no wall primitives");
    return out;
  }
  BBox bounds;
  for (const Primitive& p : walls) bounds.expand(p.control_bounds());
  const RasterMap map = RasterMap::fit(bounds, config.raster_res, 4);
  out.cell = map.cell;
  const double merge_tol = config.merge_tol.value_or(2.0 * map.cell);
  const auto pieces = merge_endpoints(walls, merge_tol, 0.5 * map.cell);

  BinaryImage image(map.width, map.height);
  for (const auto& piece : pieces) {
    for (std::size_t i = 0; i + 1 < piece.points.size(); ++i) draw_segment(image, map, piece.points[i], piece.points[i + 1]);
    if (piece.closed) draw_segment(image, map, piece.points.back(), piece.points.front());
  }

  const auto components = background_components(image);
  const double area_min_px = config.area_min * static_cast<double>(map.width) * static_cast<double>(map.height);
  std::vector<int> kept;
  for (std::size_t i = 0; i < components.size(); ++i) {
    const auto& c = components[i];
    if (c.touches_border) continue;
    if (static_cast<double>(c.area) < area_min_px) continue;
    kept.push_back(static_cast<int>(i));
  }
  out.components = static_cast<int>(kept.size());
  if (kept.empty()) {
    out.warnings.push_back("walls enclose no region");
    return out;
  }
  int floor = kept.front();
  for (int i : kept) {
    if (components[i].area > components[floor].area) floor = i;
  }
  std::stable_partition(kept.begin(), kept.end(), [&](int i) { return i == floor; });

  const double eps = config.simplify_px * map.cell;
  const double angle_tol = to_radians(config.collinear_deg);
  for (int idx : kept) {
    const auto borders = trace_borders(components[idx]);
    WallPolygon poly;
    poly.role = idx == floor ? WallRole::FloorBoundary : WallRole::WallComponent;
    poly.component = idx;
    for (const Border& b : borders) {
      std::vector<Vec2> ring;
      ring.reserve(b.pixels.size());
      for (const auto& [x, y] : b.pixels) ring.push_back(map.pixel_center(x, y));
      ring = simplify_ring(ring, eps, angle_tol);
      if (ring.size() < 3) {
        if (!b.hole) out.warnings.push_back("component " + std::to_string(idx) + " collapsed during simplification");
        continue;
      }
      const double area = signed_area(ring);
      if (b.hole) {
        if (area > 0.0) std::reverse(ring.begin(), ring.end());
        poly.holes.push_back(std::move(ring));
      } else if (poly.loop.empty()) {
        if (area < 0.0) std::reverse(ring.begin(), ring.end());
        poly.loop = std::move(ring);
      }
    }
    if (poly.loop.empty()) continue;
    if (!is_simple_polygon(poly.loop)) {
      out.warnings.push_back("component " + std::to_string(idx) + " boundary is not simple");
    }
    out.polygons.push_back(std::move(poly));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Doors

std::string_view to_string(DoorSubtype subtype) {
  switch (subtype) {
    case DoorSubtype::Single: return "single";
    case DoorSubtype::Double: return "double";
    case DoorSubtype::Sliding: return "sliding";
    case DoorSubtype::Folding: return "folding";
  }
  return "single";
}

namespace {

DoorSubtype door_subtype_from(std::string_view s) {
  if (s == "single") return DoorSubtype::Single;
  if (s == "double") return DoorSubtype::Double;
  if (s == "sliding") return DoorSubtype::Sliding;
  if (s == "folding") return DoorSubtype::Folding;
  throw SchemaError("unknown door subtype \"" + std::string(s) + "\"");
}

}  // namespace

DoorRecord extract_door(const DoorInstance& door, double tol) {
  DoorRecord rec;
  rec.instance = door.instance;
  rec.subtype = door.subtype;
  for (const auto& m : door.members) rec.primitives.push_back(m.id);
  std::sort(rec.primitives.begin(), rec.primitives.end());

  struct Line {
    Vec2 a, b;
    int id;
  };
  std::vector<Line> lines;
  for (const auto& m : door.members) {
    for (const auto& [a, b] : straight_pieces(m)) lines.push_back({a, b, m.id});
  }

  if (door.subtype == DoorSubtype::Single || door.subtype == DoorSubtype::Double) {
    const std::size_t expected = door.subtype == DoorSubtype::Single ? 1 : 2;
    bool any_arc = false;
    std::vector<Vec2> arc_ends;  // where each leaf closes, across the opening
    for (const auto& m : door.members) {
      const auto* arc = std::get_if<Arc>(&m.geometry);
      if (!arc) continue;
      any_arc = true;
      const Vec2 e0 = arc->center + polar(arc->radius, arc->start);
      const Vec2 e1 = arc->center + polar(arc->radius, arc->start + arc->sweep);
      int best = -1;
      double best_gap = std::numeric_limits<double>::infinity();
      Vec2 best_far;
      for (std::size_t k = 0; k < lines.size(); ++k) {
        Vec2 far;
        if (distance(lines[k].a, arc->center) <= tol) {
          far = lines[k].b;
        } else if (distance(lines[k].b, arc->center) <= tol) {
          far = lines[k].a;
        } else {
          continue;
        }
        const double gap = std::min(distance(far, e0), distance(far, e1));
        if (gap < best_gap) {
          best_gap = gap;
          best = static_cast<int>(k);
          best_far = far;
        }
      }
      if (best < 0) continue;
      const Vec2 arc_far = distance(best_far, e0) <= distance(best_far, e1) ? e1 : e0;
      const Vec2 u = best_far - arc->center;
      const Vec2 v = arc_far - arc->center;
      DoorLeaf leaf;
      leaf.pivot = arc->center;
      leaf.width = arc->radius;
      leaf.swing = std::atan2(cross(u, v), dot(u, v));
      leaf.arc = m.id;
      leaf.line = lines[best].id;
      rec.leaves.push_back(leaf);
      arc_ends.push_back(arc_far);
      if (rec.leaves.size() == expected) break;
    }
    if (rec.leaves.size() < expected) {
      rec.parameterized = false;
      rec.reason = !any_arc ? "no arc member" : lines.empty() ? "no line member" : "no leaf line at an arc center";
      rec.leaves.clear();
      return rec;
    }
    if (expected == 1) {
      const DoorLeaf& l = rec.leaves.front();
      rec.position = l.pivot;
      rec.width = l.width;
      rec.orientation = std::atan2(arc_ends.front().y - l.pivot.y, arc_ends.front().x - l.pivot.x);
    } else {
      const Vec2 p0 = rec.leaves[0].pivot;
      const Vec2 p1 = rec.leaves[1].pivot;
      rec.position = (p0 + p1) * 0.5;
      rec.width = distance(p0, p1);
      rec.orientation = std::atan2(p1.y - p0.y, p1.x - p0.x);
    }
    return rec;
  }

  // Sliding and folding: midline of the box aligned with the longest line.
  if (lines.empty()) {
    rec.parameterized = false;
    rec.reason = "no line member";
    return rec;
  }
  std::size_t longest = 0;
  for (std::size_t k = 1; k < lines.size(); ++k) {
    if (distance(lines[k].a, lines[k].b) > distance(lines[longest].a, lines[longest].b)) longest = k;
  }
  Vec2 u = lines[longest].b - lines[longest].a;
  if (norm(u) == 0.0) {
    rec.parameterized = false;
    rec.reason = "degenerate line members";
    return rec;
  }
  u = u / norm(u);
  if (u.y < 0.0 || (u.y == 0.0 && u.x < 0.0)) u = u * -1.0;
  const Vec2 n{-u.y, u.x};
  double smin = std::numeric_limits<double>::infinity(), smax = -smin, tmin = smin, tmax = -smin;
  for (const auto& m : door.members) {
    const double len = arc_length(m);
    for (Vec2 p : sample_primitive(m, len > 0.0 ? len / 16.0 : 1.0)) {
      smin = std::min(smin, dot(p, u));
      smax = std::max(smax, dot(p, u));
      tmin = std::min(tmin, dot(p, n));
      tmax = std::max(tmax, dot(p, n));
    }
  }
  rec.position = u * (0.5 * (smin + smax)) + n * (0.5 * (tmin + tmax));
  rec.width = smax - smin;
  rec.orientation = std::atan2(u.y, u.x);
  return rec;
}

std::vector<DoorRecord> extract_doors(const std::vector<DoorInstance>& doors, double tol) {
  std::vector<DoorRecord> out;
  for (const auto& d : doors) out.push_back(extract_door(d, tol));
  return out;
}

// ---------------------------------------------------------------------------
// Windows

std::vector<WindowRecord> extract_windows(const std::vector<WindowInstance>& windows, double group_tol,
                                          double angle_tol_deg) {
  const double angle_tol = to_radians(angle_tol_deg);
  std::vector<WindowRecord> out;
  for (const auto& win : windows) {
    struct Piece {
      Vec2 a, b;
      int id;
      double length;
    };
    std::vector<const Primitive*> members;
    for (const auto& m : win.members) members.push_back(&m);
    std::stable_sort(members.begin(), members.end(), [](const Primitive* x, const Primitive* y) { return x->id < y->id; });
    std::vector<Piece> pieces;
    for (const Primitive* m : members) {
      for (const auto& [a, b] : straight_pieces(*m)) {
        if (a == b) continue;
        pieces.push_back({a, b, m->id, distance(a, b)});
      }
    }
    Dsu dsu(pieces.size());
    for (std::size_t i = 0; i < pieces.size(); ++i) {
      for (std::size_t j = i + 1; j < pieces.size(); ++j) {
        const Piece& p = pieces[i];
        const Piece& q = pieces[j];
        const double gap = std::min({distance(p.a, q.a), distance(p.a, q.b), distance(p.b, q.a), distance(p.b, q.b)});
        if (gap > group_tol) continue;
        const Vec2 u = (p.b - p.a) / p.length;
        const Vec2 v = (q.b - q.a) / q.length;
        const double angle = std::atan2(std::abs(cross(u, v)), std::abs(dot(u, v)));
        if (angle < angle_tol) dsu.unite(static_cast<int>(i), static_cast<int>(j));
      }
    }
    std::map<int, std::vector<int>> groups;  // keyed by first piece index
    std::map<int, int> first_of_root;
    for (std::size_t i = 0; i < pieces.size(); ++i) {
      const int root = dsu.find(static_cast<int>(i));
      auto [it, inserted] = first_of_root.emplace(root, static_cast<int>(i));
      groups[it->second].push_back(static_cast<int>(i));
    }
    for (const auto& [first, idx] : groups) {
      int longest = idx.front();
      for (int k : idx) {
        if (pieces[k].length > pieces[longest].length) longest = k;
      }
      const Vec2 ref = (pieces[longest].b - pieces[longest].a) / pieces[longest].length;
      Vec2 dir_sum, mid_sum;
      double total = 0.0;
      for (int k : idx) {
        Vec2 d = pieces[k].b - pieces[k].a;
        if (dot(d, ref) < 0.0) d = d * -1.0;
        dir_sum = dir_sum + d;
        mid_sum = mid_sum + (pieces[k].a + pieces[k].b) * (0.5 * pieces[k].length);
        total += pieces[k].length;
      }
      const Vec2 dir = norm(dir_sum) > 0.0 ? dir_sum / norm(dir_sum) : ref;
      const Vec2 centroid = mid_sum / total;
      int best = idx.front();
      double best_dist = std::numeric_limits<double>::infinity();
      for (int k : idx) {
        const Vec2 mid = (pieces[k].a + pieces[k].b) * 0.5;
        const double dist = std::abs(cross(dir, mid - centroid));
        const double scale = 1e-12 * std::max(1.0, pieces[k].length);
        if (dist < best_dist - scale ||
            (std::abs(dist - best_dist) <= scale && pieces[k].length > pieces[best].length)) {
          best = k;
          best_dist = dist;
        }
      }
      WindowRecord rec;
      rec.instance = win.instance;
      rec.a = pieces[best].a;
      rec.b = pieces[best].b;
      rec.centerline_member = pieces[best].id;
      for (int k : idx) rec.members.push_back(pieces[k].id);
      std::sort(rec.members.begin(), rec.members.end());
      rec.members.erase(std::unique(rec.members.begin(), rec.members.end()), rec.members.end());
      out.push_back(std::move(rec));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Scene

SceneParameters reconstruct_scene(const Drawing& drawing, const PanopticLabeling& labeling, const ClassTable& table,
                                  const ReconstructConfig& config) {
  validate(config);
  if (labeling.size() != drawing.size()) throw ArgumentError("labeling does not match drawing size");
  auto ids_of = [&](const std::vector<std::string>& names) {
    std::set<int> ids;
    for (const auto& n : names) {
      if (auto id = table.find(n)) ids.insert(*id);
    }
    return ids;
  };
  const std::set<int> wall_ids = ids_of(config.wall_classes);
  const std::set<int> window_ids = ids_of(config.window_classes);
  std::map<int, DoorSubtype> door_ids;
  const std::pair<const char*, DoorSubtype> door_names[] = {{"single door", DoorSubtype::Single},
                                                            {"double door", DoorSubtype::Double},
                                                            {"sliding door", DoorSubtype::Sliding},
                                                            {"folding door", DoorSubtype::Folding}};
  for (const auto& [name, subtype] : door_names) {
    if (auto id = table.find(name)) door_ids[*id] = subtype;
  }

  SceneParameters scene;
  scene.wall_height = config.wall_height;
  std::vector<Primitive> walls;
  std::map<int, DoorInstance> doors;
  std::map<int, WindowInstance> windows;
  std::size_t unassigned = 0;
  for (std::size_t i = 0; i < drawing.size(); ++i) {
    const int c = labeling.semantic[i];
    const int inst = labeling.instance[i];
    if (wall_ids.count(c)) {
      walls.push_back(drawing.primitives[i]);
    } else if (door_ids.count(c) || window_ids.count(c)) {
      if (inst == 0) {
        ++unassigned;
        continue;
      }
      if (door_ids.count(c)) {
        auto& d = doors[inst];
        d.instance = inst;
        d.subtype = door_ids[c];
        d.members.push_back(drawing.primitives[i]);
      } else {
        auto& w = windows[inst];
        w.instance = inst;
        w.members.push_back(drawing.primitives[i]);
      }
    }
  }
  if (unassigned > 0) {
    scene.warnings.push_back(std::to_string(unassigned) + " door or window primitives carry no instance id");
  }
  WallExtraction ext = extract_walls(walls, config);
  scene.walls = std::move(ext.polygons);
  for (auto& w : ext.warnings) scene.warnings.push_back(std::move(w));
  std::vector<DoorInstance> door_list;
  for (auto& [id, d] : doors) door_list.push_back(std::move(d));
  scene.doors = extract_doors(door_list, config.door_tol);
  std::vector<WindowInstance> window_list;
  for (auto& [id, w] : windows) window_list.push_back(std::move(w));
  scene.windows = extract_windows(window_list, config.group_tol, config.angle_tol_deg);
  return scene;
}

namespace {

json point_json(Vec2 p) { return json::array({p.x, p.y}); }

Vec2 point_from(const json& j) {
  if (!j.is_array() || j.size() != 2) throw SchemaError("point must be [x, y]");
  return {j[0].get<double>(), j[1].get<double>()};
}

json ring_json(const std::vector<Vec2>& ring) {
  json out = json::array();
  for (Vec2 p : ring) out.push_back(point_json(p));
  return out;
}

std::vector<Vec2> ring_from(const json& j) {
  std::vector<Vec2> out;
  for (const auto& p : j) out.push_back(point_from(p));
  return out;
}

}  // namespace

json scene_to_json(const SceneParameters& scene) {
  json walls = json::array();
  for (const auto& w : scene.walls) {
    json holes = json::array();
    for (const auto& h : w.holes) holes.push_back(ring_json(h));
    walls.push_back({{"loop", ring_json(w.loop)},
                     {"holes", holes},
                     {"role", w.role == WallRole::FloorBoundary ? "floor_boundary" : "wall_component"},
                     {"component", w.component}});
  }
  json doors = json::array();
  for (const auto& d : scene.doors) {
    json leaves = json::array();
    for (const auto& l : d.leaves) {
      leaves.push_back({{"pivot", point_json(l.pivot)},
                        {"width", l.width},
                        {"swing", l.swing},
                        {"arc", l.arc},
                        {"line", l.line}});
    }
    json rec = {{"instance", d.instance},
                {"subtype", std::string(to_string(d.subtype))},
                {"status", d.parameterized ? "ok" : "unparameterized"},
                {"leaves", leaves},
                {"position", point_json(d.position)},
                {"orientation", d.orientation},
                {"width", d.width},
                {"primitives", d.primitives}};
    if (!d.leaves.empty()) {
      rec["pivot"] = point_json(d.leaves.front().pivot);
      rec["swing"] = d.leaves.front().swing;
    }
    if (!d.parameterized) rec["reason"] = d.reason;
    doors.push_back(std::move(rec));
  }
  json windows = json::array();
  for (const auto& w : scene.windows) {
    windows.push_back({{"instance", w.instance},
                       {"line", json::array({point_json(w.a), point_json(w.b)})},
                       {"members", w.members},
                       {"centerline_member", w.centerline_member}});
  }
  return {{"walls", walls},
          {"doors", doors},
          {"windows", windows},
          {"wall_height", scene.wall_height},
          {"warnings", scene.warnings}};
}

SceneParameters scene_from_json(const json& j) {
  try {
    SceneParameters scene;
    for (const auto& w : j.at("walls")) {
      WallPolygon poly;
      poly.loop = ring_from(w.at("loop"));
      if (w.contains("holes")) {
        for (const auto& h : w["holes"]) poly.holes.push_back(ring_from(h));
      }
      const std::string role = w.value("role", "wall_component");
      if (role != "floor_boundary" && role != "wall_component") throw SchemaError("unknown wall role " + role);
      poly.role = role == "floor_boundary" ? WallRole::FloorBoundary : WallRole::WallComponent;
      poly.component = w.value("component", 0);
      scene.walls.push_back(std::move(poly));
    }
    for (const auto& d : j.at("doors")) {
      DoorRecord rec;
      rec.instance = d.value("instance", 0);
      rec.subtype = door_subtype_from(d.at("subtype").get<std::string>());
      rec.parameterized = d.value("status", "ok") == "ok";
      rec.reason = d.value("reason", "");
      for (const auto& l : d.value("leaves", json::array())) {
        rec.leaves.push_back({point_from(l.at("pivot")), l.at("width").get<double>(), l.at("swing").get<double>(),
                              l.value("arc", -1), l.value("line", -1)});
      }
      rec.position = point_from(d.at("position"));
      rec.orientation = d.at("orientation").get<double>();
      rec.width = d.at("width").get<double>();
      rec.primitives = d.value("primitives", std::vector<int>{});
      scene.doors.push_back(std::move(rec));
    }
    for (const auto& w : j.at("windows")) {
      WindowRecord rec;
      rec.instance = w.value("instance", 0);
      const auto& line = w.at("line");
      if (!line.is_array() || line.size() != 2) throw SchemaError("window line must hold two points");
      rec.a = point_from(line[0]);
      rec.b = point_from(line[1]);
      rec.members = w.value("members", std::vector<int>{});
      rec.centerline_member = w.value("centerline_member", -1);
      scene.windows.push_back(std::move(rec));
    }
    scene.wall_height = j.at("wall_height").get<double>();
    scene.warnings = j.value("warnings", std::vector<std::string>{});
    return scene;
  } catch (const json::exception& e) {
    throw SchemaError(std::string("scene: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// Mesh

namespace {

bool point_in_triangle(Vec2 p, Vec2 a, Vec2 b, Vec2 c) {
  const double d1 = cross(b - a, p - a);
  const double d2 = cross(c - b, p - b);
  const double d3 = cross(a - c, p - c);
  return d1 >= 0.0 && d2 >= 0.0 && d3 >= 0.0;
}

// Splices each hole into the outer ring through a mutually visible vertex pair.
std::vector<int> bridge_holes(const std::vector<Vec2>& pts, std::vector<int> outer,
                              std::vector<std::vector<int>> holes) {
  std::vector<std::size_t> order(holes.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  auto max_x = [&](const std::vector<int>& ring) {
    double m = -std::numeric_limits<double>::infinity();
    for (int i : ring) m = std::max(m, pts[i].x);
    return m;
  };
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return max_x(holes[a]) > max_x(holes[b]); });
  for (std::size_t h : order) {
    const auto& hole = holes[h];
    std::size_t mi = 0;
    for (std::size_t k = 1; k < hole.size(); ++k) {
      if (pts[hole[k]].x > pts[hole[mi]].x) mi = k;
    }
    const Vec2 m = pts[hole[mi]];
    // Nearest edge hit by the ray from m towards +x.
    double best_x = std::numeric_limits<double>::infinity();
    int best_edge = -1;
    for (std::size_t k = 0; k < outer.size(); ++k) {
      const Vec2 a = pts[outer[k]];
      const Vec2 b = pts[outer[(k + 1) % outer.size()]];
      if ((a.y > m.y) == (b.y > m.y)) {
        if (a.y == m.y && a.x >= m.x && a.x < best_x) {
          best_x = a.x;
          best_edge = static_cast<int>(k);
        }
        continue;
      }
      const double x = a.x + (m.y - a.y) * (b.x - a.x) / (b.y - a.y);
      if (x >= m.x && x < best_x) {
        best_x = x;
        best_edge = static_cast<int>(k);
      }
    }
    if (best_edge < 0) throw ArgumentError("hole lies outside its polygon");
    const std::size_t ka = static_cast<std::size_t>(best_edge);
    const std::size_t kb = (ka + 1) % outer.size();
    std::size_t pk = pts[outer[ka]].x >= pts[outer[kb]].x ? ka : kb;
    const Vec2 hit{best_x, m.y};
    if (!(pts[outer[pk]] == hit)) {
      // Reflex vertices inside triangle (m, hit, p) would block visibility; take the one with the smallest angle.
      const Vec2 p = pts[outer[pk]];
      double best_angle = std::numeric_limits<double>::infinity();
      double best_dist = std::numeric_limits<double>::infinity();
      for (std::size_t k = 0; k < outer.size(); ++k) {
        if (k == pk) continue;
        const Vec2 prev = pts[outer[(k + outer.size() - 1) % outer.size()]];
        const Vec2 cur = pts[outer[k]];
        const Vec2 next = pts[outer[(k + 1) % outer.size()]];
        if (cross(cur - prev, next - cur) > 0.0) continue;  // convex
        const bool inside = p.y >= m.y ? point_in_triangle(cur, m, hit, p) : point_in_triangle(cur, m, p, hit);
        if (!inside || cur == m) continue;
        const Vec2 d = cur - m;
        const double angle = std::atan2(std::abs(d.y), d.x);
        const double dist = norm(d);
        if (angle < best_angle || (angle == best_angle && dist < best_dist)) {
          best_angle = angle;
          best_dist = dist;
          pk = k;
        }
      }
    }
    std::vector<int> merged;
    merged.reserve(outer.size() + hole.size() + 2);
    for (std::size_t k = 0; k <= pk; ++k) merged.push_back(outer[k]);
    for (std::size_t k = 0; k <= hole.size(); ++k) merged.push_back(hole[(mi + k) % hole.size()]);
    merged.push_back(outer[pk]);
    for (std::size_t k = pk + 1; k < outer.size(); ++k) merged.push_back(outer[k]);
    outer = std::move(merged);
  }
  return outer;
}

}  // namespace

std::vector<std::array<int, 3>> triangulate(const std::vector<Vec2>& loop,
                                            const std::vector<std::vector<Vec2>>& holes) {
  std::vector<Vec2> pts = loop;
  std::vector<int> outer(loop.size());
  std::iota(outer.begin(), outer.end(), 0);
  if (signed_area(loop) < 0.0) std::reverse(outer.begin(), outer.end());
  std::vector<std::vector<int>> hole_idx;
  for (const auto& h : holes) {
    std::vector<int> idx;
    for (Vec2 p : h) {
      idx.push_back(static_cast<int>(pts.size()));
      pts.push_back(p);
    }
    if (signed_area(h) > 0.0) std::reverse(idx.begin(), idx.end());
    hole_idx.push_back(std::move(idx));
  }
  std::vector<int> ring = bridge_holes(pts, std::move(outer), std::move(hole_idx));

  std::vector<std::array<int, 3>> tris;
  while (ring.size() > 3) {
    const std::size_t n = ring.size();
    int ear = -1;
    double best_cross = -std::numeric_limits<double>::infinity();
    int fallback = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const Vec2 a = pts[ring[(i + n - 1) % n]];
      const Vec2 b = pts[ring[i]];
      const Vec2 c = pts[ring[(i + 1) % n]];
      const double cr = cross(b - a, c - b);
      if (cr > best_cross) {
        best_cross = cr;
        fallback = static_cast<int>(i);
      }
      if (cr <= 0.0) continue;
      bool blocked = false;
      for (std::size_t k = 0; k < n && !blocked; ++k) {
        const Vec2 q = pts[ring[k]];
        if (q == a || q == b || q == c) continue;
        blocked = point_in_triangle(q, a, b, c);
      }
      if (!blocked) {
        ear = static_cast<int>(i);
        break;
      }
    }
    if (ear < 0) ear = fallback;
    const std::size_t i = static_cast<std::size_t>(ear);
    tris.push_back({ring[(i + n - 1) % n], ring[i], ring[(i + 1) % n]});
    ring.erase(ring.begin() + static_cast<std::ptrdiff_t>(i));
  }
  if (ring.size() == 3) tris.push_back({ring[0], ring[1], ring[2]});
  return tris;
}

Mesh extrude_walls(const std::vector<WallPolygon>& walls, double height, std::vector<std::string>* warnings) {
  if (!(height > 0.0)) throw ArgumentError("wall height must be positive");
  Mesh mesh;
  for (std::size_t w = 0; w < walls.size(); ++w) {
    const WallPolygon& poly = walls[w];
    if (poly.loop.size() < 3 || std::abs(signed_area(poly.loop)) <= 0.0) {
      if (warnings) warnings->push_back("wall polygon " + std::to_string(w) + " is degenerate and was skipped");
      continue;
    }
    std::vector<std::vector<Vec2>> rings;
    std::vector<Vec2> outer = poly.loop;
    if (signed_area(outer) < 0.0) std::reverse(outer.begin(), outer.end());
    rings.push_back(outer);
    for (const auto& h : poly.holes) {
      if (h.size() < 3) continue;
      std::vector<Vec2> ring = h;
      if (signed_area(ring) > 0.0) std::reverse(ring.begin(), ring.end());
      rings.push_back(std::move(ring));
    }
    const int base = static_cast<int>(mesh.vertices.size());
    std::vector<int> ring_start;
    int count = 0;
    for (const auto& r : rings) {
      ring_start.push_back(count);
      count += static_cast<int>(r.size());
    }
    // Bottom vertices [base, base + count), top vertices [base + count, base + 2 count).
    for (const auto& r : rings) {
      for (Vec2 p : r) mesh.vertices.push_back({p.x, p.y, 0.0});
    }
    for (const auto& r : rings) {
      for (Vec2 p : r) mesh.vertices.push_back({p.x, p.y, height});
    }
    for (std::size_t ri = 0; ri < rings.size(); ++ri) {
      const int n = static_cast<int>(rings[ri].size());
      for (int i = 0; i < n; ++i) {
        const int b0 = base + ring_start[ri] + i;
        const int b1 = base + ring_start[ri] + (i + 1) % n;
        const int t0 = b0 + count;
        const int t1 = b1 + count;
        mesh.triangles.push_back({b0, b1, t1});
        mesh.triangles.push_back({b0, t1, t0});
      }
    }
    std::vector<std::vector<Vec2>> hole_rings(rings.begin() + 1, rings.end());
    for (const auto& t : triangulate(rings.front(), hole_rings)) {
      mesh.triangles.push_back({base + count + t[0], base + count + t[1], base + count + t[2]});
      mesh.triangles.push_back({base + t[2], base + t[1], base + t[0]});
    }
  }
  return mesh;
}

bool is_watertight(const Mesh& mesh) {
  std::map<std::pair<int, int>, int> directed;
  for (const auto& t : mesh.triangles) {
    for (int k = 0; k < 3; ++k) {
      const int a = t[k];
      const int b = t[(k + 1) % 3];
      if (a == b) return false;
      ++directed[{a, b}];
    }
  }
  for (const auto& [edge, count] : directed) {
    if (count != 1) return false;
    auto it = directed.find({edge.second, edge.first});
    if (it == directed.end() || it->second != 1) return false;
  }
  return true;
}

std::string mesh_to_obj(const Mesh& mesh) {
  std::string out = "# cadspot wall mesh\n";
  for (const auto& v : mesh.vertices) {
    out += "v " + format_number(v[0]) + " " + format_number(v[1]) + " " + format_number(v[2]) + "\n";
  }
  for (const auto& t : mesh.triangles) {
    out += "f " + std::to_string(t[0] + 1) + " " + std::to_string(t[1] + 1) + " " + std::to_string(t[2] + 1) + "\n";
  }
  return out;
}

// ---------------------------------------------------------------------------
// Config

json to_json(const ReconstructConfig& c) {
  return {{"merge_tol", c.merge_tol ? json(*c.merge_tol) : json(nullptr)},
          {"raster_res", c.raster_res},
          {"area_min", c.area_min},
          {"simplify_px", c.simplify_px},
          {"collinear_deg", c.collinear_deg},
          {"door_tol", c.door_tol},
          {"group_tol", c.group_tol},
          {"angle_tol_deg", c.angle_tol_deg},
          {"wall_height", c.wall_height},
          {"wall_classes", c.wall_classes},
          {"window_classes", c.window_classes}};
}

void apply_json(ReconstructConfig& c, const json& j) {
  if (j.is_null()) return;
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  try {
    if (j.contains("merge_tol")) {
      c.merge_tol = j["merge_tol"].is_null() ? std::nullopt : std::optional<double>(j["merge_tol"].get<double>());
    }
    c.raster_res = j.value("raster_res", c.raster_res);
    c.area_min = j.value("area_min", c.area_min);
    c.simplify_px = j.value("simplify_px", c.simplify_px);
    c.collinear_deg = j.value("collinear_deg", c.collinear_deg);
    c.door_tol = j.value("door_tol", c.door_tol);
    c.group_tol = j.value("group_tol", c.group_tol);
    c.angle_tol_deg = j.value("angle_tol_deg", c.angle_tol_deg);
    c.wall_height = j.value("wall_height", c.wall_height);
    c.wall_classes = j.value("wall_classes", c.wall_classes);
    c.window_classes = j.value("window_classes", c.window_classes);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("reconstruction config: ") + e.what());
  }
}

void validate(const ReconstructConfig& c) {
  if (c.merge_tol && !(*c.merge_tol >= 0.0)) throw ConfigError("merge_tol must be nonnegative");
  if (c.raster_res < 16 || c.raster_res > 32768) throw ConfigError("raster_res must lie in [16, 32768]");
  if (!(c.area_min >= 0.0 && c.area_min < 1.0)) throw ConfigError("area_min must lie in [0, 1)");
  if (!(c.simplify_px >= 0.0)) throw ConfigError("simplify_px must be nonnegative");
  if (!(c.collinear_deg >= 0.0 && c.collinear_deg < 90.0)) throw ConfigError("collinear_deg must lie in [0, 90)");
  if (!(c.door_tol >= 0.0)) throw ConfigError("door_tol must be nonnegative");
  if (!(c.group_tol >= 0.0)) throw ConfigError("group_tol must be nonnegative");
  if (!(c.angle_tol_deg >= 0.0 && c.angle_tol_deg <= 90.0)) throw ConfigError("angle_tol_deg must lie in [0, 90]");
  if (!(c.wall_height > 0.0)) throw ConfigError("wall_height must be positive");
}

}  // namespace cadspot
