#include <doctest.h>

#include <set>
#include <sstream>

#include "cadspot/error.hpp"
#include "cadspot/raster.hpp"
#include "cadspot/reconstruct.hpp"
#include "support.hpp"

using namespace cadspot;
using namespace cadspot::testing;

namespace {

std::vector<Primitive> segments(const std::vector<std::pair<Vec2, Vec2>>& list) {
  std::vector<Primitive> out;
  for (const auto& [a, b] : list) out.push_back({static_cast<int>(out.size()), Segment{a, b}});
  return out;
}

std::vector<Primitive> rectangle(Vec2 lo, Vec2 hi, int first_id = 0) {
  auto out = segments({{lo, {hi.x, lo.y}}, {{hi.x, lo.y}, hi}, {hi, {lo.x, hi.y}}, {{lo.x, hi.y}, lo}});
  for (auto& p : out) p.id += first_id;
  return out;
}

ReconstructConfig coarse(int res = 400) {
  ReconstructConfig c;
  c.raster_res = res;
  c.merge_tol = 0.05;
  return c;
}

Primitive prim(int id, Geometry g) { return {id, std::move(g)}; }

double nearest_corner(const std::vector<Vec2>& loop, Vec2 q) {
  double best = 1e300;
  for (const Vec2& v : loop) best = std::min(best, distance(v, q));
  return best;
}

}  // namespace

TEST_SUITE("reconstruct") {
  TEST_CASE("square walls give one four-corner floor polygon") {
    const WallExtraction w = extract_walls(rectangle({0, 0}, {10, 10}), coarse(1000));
    REQUIRE(w.polygons.size() == 1);
    const WallPolygon& p = w.polygons[0];
    CHECK(p.role == WallRole::FloorBoundary);
    CHECK(p.holes.empty());
    REQUIRE(p.loop.size() == 4);
    CHECK(signed_area(p.loop) > 0.0);
    CHECK(is_simple_polygon(p.loop));
    // Corners sit inside the stroke, within two cells of the true corners.
    for (Vec2 c : {Vec2{0, 0}, Vec2{10, 0}, Vec2{10, 10}, Vec2{0, 10}}) CHECK(nearest_corner(p.loop, c) <= 2.0 * std::sqrt(2.0) * w.cell);
    CHECK(signed_area(p.loop) == doctest::Approx(100.0).epsilon(0.01));
  }

  TEST_CASE("default resolution handles the square") {
    ReconstructConfig c;
    c.merge_tol = 0.05;
    const WallExtraction w = extract_walls(rectangle({0, 0}, {10, 10}), c);
    REQUIRE(w.polygons.size() == 1);
    CHECK(w.polygons[0].loop.size() == 4);
    CHECK(w.cell == doctest::Approx(10.0 / 8192.0).epsilon(0.01));
  }

  TEST_CASE("small endpoint gaps are healed") {
    auto walls = segments({{{0, 0}, {10, 0}}, {{10, 0}, {10, 10}}, {{10, 10}, {0, 10}}, {{0, 10}, {0.0, 0.02}}});
    const WallExtraction w = extract_walls(walls, coarse(1000));
    REQUIRE(w.polygons.size() == 1);
    CHECK(w.polygons[0].loop.size() == 4);
    CHECK(w.components == 1);

    // Without merging, a gap wider than a cell leaks the interior to the outside.
    auto open = segments({{{0, 0}, {10, 0}}, {{10, 0}, {10, 10}}, {{10, 10}, {0, 10}}, {{0, 10}, {0.0, 0.5}}});
    const WallExtraction leak = extract_walls(open, coarse(1000));
    CHECK(leak.polygons.empty());
    CHECK_FALSE(leak.warnings.empty());
  }

  TEST_CASE("specks below the area threshold are dropped") {
    auto walls = rectangle({0, 0}, {10, 10});
    for (auto& p : rectangle({4, 4}, {4.03, 4.03}, 4)) walls.push_back(p);
    const WallExtraction w = extract_walls(walls, coarse(1000));
    CHECK(w.components == 1);
    REQUIRE(w.polygons.size() == 1);
    CHECK(w.polygons[0].role == WallRole::FloorBoundary);
  }

  TEST_CASE("a split room yields two components and the larger is the floor") {
    auto walls = rectangle({0, 0}, {10, 6});
    walls.push_back(prim(4, Segment{{7, 0}, {7, 6}}));
    const WallExtraction w = extract_walls(walls, coarse(600));
    CHECK(w.components == 2);
    REQUIRE(w.polygons.size() == 2);
    CHECK(w.polygons[0].role == WallRole::FloorBoundary);
    CHECK(w.polygons[1].role == WallRole::WallComponent);
    CHECK(signed_area(w.polygons[0].loop) > signed_area(w.polygons[1].loop));
    for (const auto& p : w.polygons) {
      CHECK(p.loop.size() == 4);
      CHECK(is_simple_polygon(p.loop));
    }
  }

  TEST_CASE("no walls and invalid configs") {
    const WallExtraction w = extract_walls({});
    CHECK(w.polygons.empty());
    REQUIRE(w.warnings.size() == 1);
    ReconstructConfig bad;
    bad.raster_res = 0;
    CHECK_THROWS_AS(extract_walls(rectangle({0, 0}, {1, 1}), bad), ConfigError);
    ReconstructConfig back;
    apply_json(back, to_json(coarse()));
    CHECK(to_json(back) == to_json(coarse()));
  }

  TEST_CASE("retracing traced polygons keeps the component count") {
    Rng rng(401);
    for (int trial = 0; trial < 20; ++trial) {
      std::vector<Primitive> walls;
      const int rooms = uniform_int(rng, 1, 3);
      for (int r = 0; r < rooms; ++r) {
        const Vec2 lo{20.0 * r + uniform(rng, 0, 2), uniform(rng, 0, 2)};
        for (auto& p : rectangle(lo, lo + Vec2{uniform(rng, 8, 16), uniform(rng, 8, 16)}, static_cast<int>(walls.size()))) {
          walls.push_back(p);
        }
      }
      const ReconstructConfig c = coarse(500);
      const WallExtraction first = extract_walls(walls, c);
      CHECK(first.components == rooms);
      std::vector<Primitive> traced;
      for (const auto& poly : first.polygons) {
        for (std::size_t i = 0; i < poly.loop.size(); ++i) {
          traced.push_back(prim(static_cast<int>(traced.size()), Segment{poly.loop[i], poly.loop[(i + 1) % poly.loop.size()]}));
        }
      }
      const WallExtraction second = extract_walls(traced, c);
      CHECK(second.components == first.components);
      for (const auto& p : second.polygons) CHECK(is_simple_polygon(p.loop));
    }
  }

  TEST_CASE("raster primitives") {
    const RasterMap map = RasterMap::fit(BBox::from_corners({0, 0}, {10, 5}), 10, 1);
    // One extra cell keeps the upper bound inside the grid.
    CHECK(map.width == 13);
    CHECK(map.height == 8);
    CHECK(map.cell == 1.0);
    BinaryImage img(map.width, map.height);
    draw_segment(img, map, {0.5, 0.5}, {9.5, 0.5});
    int set = 0;
    for (auto v : img.data) set += v;
    CHECK(set == 10);

    // A ring of foreground around one hole pixel.
    BinaryImage ring(5, 5);
    for (int x = 1; x <= 3; ++x) {
      for (int y = 1; y <= 3; ++y) ring.set(x, y);
    }
    ring.set(2, 2, 0);
    const auto comps = background_components(ring);
    REQUIRE(comps.size() == 2);
    CHECK(comps[0].touches_border);
    CHECK(comps[1].area == 1);
    CHECK_FALSE(comps[1].touches_border);
    const auto borders = trace_borders(comps[0]);
    REQUIRE(borders.size() >= 2);
    CHECK_FALSE(borders[0].hole);
    CHECK(borders[1].hole);
  }

  TEST_CASE("single door parameters") {
    const Vec2 c{3, 4};
    const double r = 0.9;
    DoorInstance door{7, DoorSubtype::Single, {prim(0, Arc{c, r, 0.0, kPi / 2}), prim(1, Segment{c, c + Vec2{r, 0}})}};
    const DoorRecord d = extract_door(door);
    REQUIRE(d.parameterized);
    REQUIRE(d.leaves.size() == 1);
    CHECK(distance(d.leaves[0].pivot, c) < 1e-12);
    CHECK(d.leaves[0].width == doctest::Approx(r));
    CHECK(d.leaves[0].swing == doctest::Approx(kPi / 2));
    CHECK(d.width == doctest::Approx(r));
    CHECK(d.primitives == std::vector<int>{0, 1});

    // Mirrored swing reverses the sign.
    DoorInstance mirrored{7, DoorSubtype::Single, {prim(0, Arc{c, r, -kPi / 2, kPi / 2}), prim(1, Segment{c + Vec2{r, 0}, c})}};
    CHECK(extract_door(mirrored).leaves[0].swing == doctest::Approx(-kPi / 2));
  }

  TEST_CASE("door pivot sits at an arc center and a line endpoint") {
    Rng rng(411);
    for (int trial = 0; trial < 200; ++trial) {
      const Vec2 c{uniform(rng, -50, 50), uniform(rng, -50, 50)};
      const double r = uniform(rng, 0.5, 2), a = uniform(rng, -kPi, kPi), sweep = uniform(rng, 0.5, 2.5);
      const Vec2 jitter{uniform(rng, -0.02, 0.02), uniform(rng, -0.02, 0.02)};
      DoorInstance door{1, DoorSubtype::Single,
                        {prim(0, Arc{c, r, a, sweep}), prim(1, Segment{c + jitter, c + polar(r, a)})}};
      const DoorRecord d = extract_door(door, 0.05);
      REQUIRE(d.parameterized);
      CHECK(distance(d.leaves[0].pivot, c) <= 0.05);
      CHECK(distance(d.leaves[0].pivot, c + jitter) <= 0.05);
      CHECK(d.leaves[0].swing == doctest::Approx(sweep).epsilon(1e-9));
    }
  }

  TEST_CASE("double door has two pivots at opposite jambs") {
    const double h = 0.8;
    const Vec2 p0{0, 0}, p1{2 * h, 0};
    DoorInstance door{2, DoorSubtype::Double,
                      {prim(0, Arc{p0, h, 0.0, kPi / 2}), prim(1, Segment{p0, p0 + Vec2{0, h}}),
                       prim(2, Arc{p1, h, kPi / 2, kPi / 2}), prim(3, Segment{p1, p1 + Vec2{0, h}})}};
    const DoorRecord d = extract_door(door);
    REQUIRE(d.parameterized);
    REQUIRE(d.leaves.size() == 2);
    CHECK(d.leaves[0].width == doctest::Approx(d.leaves[1].width));
    CHECK(distance(d.leaves[0].pivot, p0) < 1e-12);
    CHECK(distance(d.leaves[1].pivot, p1) < 1e-12);
    CHECK(d.width == doctest::Approx(2 * h));
    CHECK(distance(d.position, {h, 0}) < 1e-12);
    CHECK(d.leaves[0].swing == doctest::Approx(-kPi / 2));
    CHECK(d.leaves[1].swing == doctest::Approx(kPi / 2));
  }

  TEST_CASE("doors without the required structure are flagged") {
    DoorInstance no_arc{3, DoorSubtype::Single, {prim(0, Segment{{0, 0}, {1, 0}})}};
    const DoorRecord d = extract_door(no_arc);
    CHECK_FALSE(d.parameterized);
    CHECK(d.reason == "no arc member");
    DoorInstance far{3, DoorSubtype::Single, {prim(0, Arc{{0, 0}, 1, 0, 1}), prim(1, Segment{{5, 5}, {6, 5}})}};
    CHECK(extract_door(far).reason == "no leaf line at an arc center");
    DoorInstance half{3, DoorSubtype::Double, {prim(0, Arc{{0, 0}, 1, 0, 1}), prim(1, Segment{{0, 0}, {1, 0}})}};
    CHECK_FALSE(extract_door(half).parameterized);
  }

  TEST_CASE("sliding doors use the midline of their box") {
    DoorInstance slide{4, DoorSubtype::Sliding,
                       {prim(0, Segment{{0, 0}, {2, 0}}), prim(1, Segment{{1, 0.2}, {3, 0.2}}),
                        prim(2, Polyline{{{0, -0.1}, {0.5, -0.1}}, false})}};
    const DoorRecord d = extract_door(slide);
    REQUIRE(d.parameterized);
    CHECK(d.width == doctest::Approx(3.0));
    CHECK(d.orientation == doctest::Approx(0.0));
    CHECK(distance(d.position, {1.5, 0.05}) < 1e-9);
  }

  TEST_CASE("window grouping examples") {
    // Parallel pair 0.1 apart: the longer member pulls the average line toward itself.
    WindowInstance pair{1, {prim(0, Segment{{0, 0}, {1, 0}}), prim(1, Segment{{0, 0.1}, {0.9, 0.1}})}};
    auto r = extract_windows({pair});
    REQUIRE(r.size() == 1);
    CHECK(r[0].members == std::vector<int>{0, 1});
    CHECK(r[0].centerline_member == 0);

    WindowInstance cross{2, {prim(0, Segment{{0, 0}, {1, 0}}), prim(1, Segment{{0, 0}, {0, 1}})}};
    CHECK(extract_windows({cross}).size() == 2);

    WindowInstance single{3, {prim(5, Segment{{0, 0}, {1, 1}})}};
    r = extract_windows({single});
    REQUIRE(r.size() == 1);
    CHECK(r[0].members == std::vector<int>{5});
    CHECK(r[0].a == Vec2{0, 0});
    CHECK(r[0].b == Vec2{1, 1});

    // A window rectangle with a middle line: the long sides and the middle line group together.
    WindowInstance frame{4, {prim(0, Segment{{0, 0}, {4, 0}}), prim(1, Segment{{0, 0.2}, {4, 0.2}}),
                             prim(2, Segment{{0, 0.1}, {4, 0.1}}), prim(3, Segment{{0, 0}, {0, 0.2}}),
                             prim(4, Segment{{4, 0}, {4, 0.2}})}};
    r = extract_windows({frame});
    bool found = false;
    for (const auto& rec : r) {
      if (rec.members == std::vector<int>{0, 1, 2}) {
        found = true;
        CHECK(rec.centerline_member == 2);
      }
    }
    CHECK(found);
  }

  TEST_CASE("window grouping does not depend on member order") {
    Rng rng(421);
    for (int trial = 0; trial < 200; ++trial) {
      WindowInstance w{1, {}};
      const int n = uniform_int(rng, 2, 8);
      for (int i = 0; i < n; ++i) {
        const Vec2 a{uniform(rng, 0, 2), uniform(rng, 0, 0.4)};
        const double ang = uniform(rng, 0, 1) < 0.7 ? uniform(rng, -0.03, 0.03) : kPi / 2;
        w.members.push_back(prim(i, Segment{a, a + polar(uniform(rng, 0.5, 2), ang)}));
      }
      const auto base = extract_windows({w});
      std::shuffle(w.members.begin(), w.members.end(), rng);
      const auto shuffled = extract_windows({w});
      REQUIRE(base.size() == shuffled.size());
      for (std::size_t k = 0; k < base.size(); ++k) {
        CHECK(base[k].members == shuffled[k].members);
        CHECK(base[k].centerline_member == shuffled[k].centerline_member);
      }
      std::set<int> seen;
      for (const auto& rec : base) {
        for (int m : rec.members) CHECK(seen.insert(m).second);
      }
    }
  }

  TEST_CASE("square prism mesh") {
    WallPolygon sq;
    sq.loop = {{0, 0}, {1, 0}, {1, 1}, {0, 1}};
    const Mesh m = extrude_walls({sq}, 3.0);
    CHECK(m.vertices.size() == 8);
    CHECK(m.triangles.size() == 12);
    CHECK(is_watertight(m));
    double top = 0;
    for (const auto& v : m.vertices) top = std::max(top, v[2]);
    CHECK(top == 3.0);
    const std::string obj = mesh_to_obj(m);
    std::istringstream lines(obj);
    int vs = 0, fs = 0;
    for (std::string line; std::getline(lines, line);) {
      vs += line.rfind("v ", 0) == 0;
      fs += line.rfind("f ", 0) == 0;
    }
    CHECK(vs == 8);
    CHECK(fs == 12);
    CHECK(obj.find("f 1 ") != std::string::npos);
  }

  TEST_CASE("meshes with holes are watertight and outward") {
    WallPolygon ring;
    ring.loop = {{0, 0}, {10, 0}, {10, 10}, {0, 10}};
    ring.holes = {{{2, 2}, {2, 8}, {8, 8}, {8, 2}}};
    const Mesh m = extrude_walls({ring}, 2.5);
    CHECK(is_watertight(m));
    // Signed volume via the divergence theorem equals the prism volume.
    double vol = 0;
    for (const auto& t : m.triangles) {
      const auto& a = m.vertices[t[0]];
      const auto& b = m.vertices[t[1]];
      const auto& c = m.vertices[t[2]];
      vol += (a[0] * (b[1] * c[2] - b[2] * c[1]) - a[1] * (b[0] * c[2] - b[2] * c[0]) + a[2] * (b[0] * c[1] - b[1] * c[0])) / 6.0;
    }
    CHECK(vol == doctest::Approx((100.0 - 36.0) * 2.5));

    std::vector<std::string> warnings;
    WallPolygon flat;
    flat.loop = {{0, 0}, {1, 0}, {2, 0}};
    CHECK(extrude_walls({flat}, 1.0, &warnings).triangles.empty());
    CHECK(warnings.size() == 1);
    CHECK(is_watertight(extrude_walls({}, 1.0)));
  }

  TEST_CASE("triangulation covers the polygon area") {
    Rng rng(431);
    for (int trial = 0; trial < 100; ++trial) {
      // Star-shaped loop around the origin.
      std::vector<Vec2> loop;
      const int n = uniform_int(rng, 3, 20);
      for (int i = 0; i < n; ++i) loop.push_back(polar(uniform(rng, 3, 5), kTwoPi * i / n));
      std::vector<std::vector<Vec2>> holes;
      if (trial % 2) holes.push_back({{-1, -1}, {-1, 1}, {1, 1}, {1, -1}});
      const auto tris = triangulate(loop, holes);
      std::vector<Vec2> all = loop;
      for (const auto& h : holes) all.insert(all.end(), h.begin(), h.end());
      double area = 0;
      for (const auto& t : tris) {
        const double a = 0.5 * cross(all[t[1]] - all[t[0]], all[t[2]] - all[t[0]]);
        CHECK(a > 0.0);
        area += a;
      }
      CHECK(area == doctest::Approx(signed_area(loop) - (holes.empty() ? 0.0 : 4.0)).epsilon(1e-9));
    }
  }

  TEST_CASE("polygon predicates") {
    CHECK(is_simple_polygon({{0, 0}, {1, 0}, {1, 1}, {0, 1}}));
    CHECK_FALSE(is_simple_polygon({{0, 0}, {1, 1}, {1, 0}, {0, 1}}));
    CHECK(signed_area({{0, 0}, {2, 0}, {2, 1}, {0, 1}}) == 2.0);
    CHECK(signed_area({{0, 0}, {0, 1}, {2, 1}, {2, 0}}) == -2.0);
  }

  TEST_CASE("endpoint merging snaps and drops duplicates") {
    auto walls = segments({{{0, 0}, {1, 0}}, {{1.01, 0}, {1, 1}}, {{0, 0}, {1, 0}}, {{2, 2}, {2, 2}}});
    const auto pieces = merge_endpoints(walls, 0.05, 0.1);
    REQUIRE(pieces.size() == 2);
    CHECK(pieces[0].points.back() == pieces[1].points.front());
  }

  TEST_CASE("scene extraction from a labeled drawing") {
    const ClassTable& t = ClassTable::standard();
    Drawing d;
    PanopticLabeling l;
    auto add = [&](Geometry g, int cls, int inst) {
      d.add(std::move(g));
      l.semantic.push_back(cls);
      l.instance.push_back(inst);
    };
    for (const auto& p : rectangle({0, 0}, {10, 10})) add(p.geometry, 32, 0);
    add(Arc{{2, 2}, 1, 0, kPi / 2}, 0, 1);
    add(Segment{{2, 2}, {2, 3}}, 0, 1);
    add(Segment{{4, 0}, {6, 0}}, 6, 2);
    add(Segment{{4, 0.1}, {6, 0.1}}, 6, 2);
    add(Segment{{7, 7}, {8, 8}}, 35, 0);
    ReconstructConfig c = coarse(800);
    c.wall_height = 2.7;
    const SceneParameters s = reconstruct_scene(d, l, t, c);
    CHECK(s.walls.size() == 1);
    REQUIRE(s.doors.size() == 1);
    CHECK(s.doors[0].subtype == DoorSubtype::Single);
    CHECK(s.doors[0].parameterized);
    REQUIRE(s.windows.size() == 1);
    CHECK(s.windows[0].members == std::vector<int>{6, 7});
    CHECK(s.wall_height == 2.7);

    const nlohmann::json j = scene_to_json(s);
    CHECK(j.at("walls")[0].contains("loop"));
    CHECK(j.at("doors")[0].at("subtype") == "single");
    CHECK(j.at("windows")[0].contains("line"));
    CHECK(scene_to_json(scene_from_json(j)) == j);
    CHECK_THROWS_AS(reconstruct_scene(d, PanopticLabeling{}, t, c), ArgumentError);
  }

  TEST_CASE("empty scenes round-trip") {
    const SceneParameters s = reconstruct_scene(Drawing{}, PanopticLabeling{}, ClassTable::standard());
    CHECK(s.walls.empty());
    CHECK(s.doors.empty());
    CHECK(s.windows.empty());
    const nlohmann::json j = scene_to_json(s);
    CHECK(scene_to_json(scene_from_json(j)) == j);
    CHECK(mesh_to_obj(extrude_walls(s.walls, s.wall_height)).find('\n') == mesh_to_obj({}).size() - 1);
    CHECK_THROWS_AS(scene_from_json(nlohmann::json{{"walls", 3}}), SchemaError);
  }
}
