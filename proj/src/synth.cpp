#include "cadspot/synth.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "cadspot/error.hpp"
#include "cadspot/svg_io.hpp"

namespace cadspot {

namespace {

constexpr int kWallClass = 32;

class SymbolBuilder {
 public:
  SymbolBuilder(Vec2 center, double angle) : center_(center), angle_(angle) {}

  Vec2 map(Vec2 local) const { return center_ + rotate(local, angle_); }
  Segment segment(Vec2 a, Vec2 b) const { return {map(a), map(b)}; }
  Arc arc(Vec2 c, double r, double start, double sweep) const { return {map(c), r, start + angle_, sweep}; }
  Circle circle(Vec2 c, double r) const { return {map(c), r}; }
  Ellipse ellipse(Vec2 c, double rx, double ry, double start, double sweep) const {
    return {map(c), rx, ry, angle_, start, sweep};
  }
  CubicBezier cubic(Vec2 a, Vec2 b, Vec2 c, Vec2 d) const { return {{map(a), map(b), map(c), map(d)}}; }
  QuadBezier quad(Vec2 a, Vec2 b, Vec2 c) const { return {{map(a), map(b), map(c)}}; }
  Polyline polyline(std::vector<Vec2> pts, bool closed) const {
    for (Vec2& p : pts) p = map(p);
    return {std::move(pts), closed};
  }

 private:
  Vec2 center_;
  double angle_;
};

std::vector<Geometry> build_symbol(int cls, double s, const SymbolBuilder& b, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double h = 0.5 * s;
  std::vector<Geometry> g;
  auto rect = [&](double x0, double y0, double x1, double y1) {
    g.push_back(b.segment({x0, y0}, {x1, y0}));
    g.push_back(b.segment({x1, y0}, {x1, y1}));
    g.push_back(b.segment({x1, y1}, {x0, y1}));
    g.push_back(b.segment({x0, y1}, {x0, y0}));
  };
  switch (cls) {
    case 0: {  // single door: leaf from the pivot and its quarter swing
      const Vec2 pivot{-h, -h};
      g.push_back(b.segment(pivot, pivot + Vec2{0.0, s}));
      g.push_back(b.arc(pivot, s, 0.0, kPi / 2));
      break;
    }
    case 1: {  // double door: mirrored leaves meeting at the middle
      const Vec2 p0{-h, -0.25 * s};
      const Vec2 p1{h, -0.25 * s};
      g.push_back(b.segment(p0, p0 + Vec2{0.0, h}));
      g.push_back(b.arc(p0, h, 0.0, kPi / 2));
      g.push_back(b.segment(p1, p1 + Vec2{0.0, h}));
      g.push_back(b.arc(p1, h, kPi / 2, kPi / 2));
      break;
    }
    case 2:  // sliding door: two overlapping panels
      g.push_back(b.polyline({{-h, -0.1 * s}, {0.1 * s, -0.1 * s}, {0.1 * s, 0.0}, {-h, 0.0}}, true));
      g.push_back(b.polyline({{-0.1 * s, 0.0}, {h, 0.0}, {h, 0.1 * s}, {-0.1 * s, 0.1 * s}}, true));
      g.push_back(b.segment({-h, -0.2 * s}, {h, -0.2 * s}));
      break;
    case 3:  // folding door: zigzag leaves
      g.push_back(b.polyline({{-h, 0.0}, {-0.25 * s, 0.2 * s}, {0.0, 0.0}, {0.25 * s, 0.2 * s}, {h, 0.0}}, false));
      g.push_back(b.segment({-h, -0.1 * s}, {h, -0.1 * s}));
      break;
    case 6:
    case 7:
    case 8:  // windows: frame plus glazing line
      rect(-h, -0.15 * s, h, 0.15 * s);
      g.push_back(b.segment({-h, 0.0}, {h, 0.0}));
      break;
    default:
      switch (cls % 4) {
        case 0:  // table with chairs
          rect(-0.3 * s, -0.3 * s, 0.3 * s, 0.3 * s);
          g.push_back(b.circle({-0.4 * s, 0.0}, 0.08 * s));
          g.push_back(b.circle({0.4 * s, 0.0}, 0.08 * s));
          break;
        case 1:  // basin: box with an elliptical bowl
          rect(-h, -0.3 * s, h, 0.3 * s);
          g.push_back(b.ellipse({0.0, 0.0}, 0.35 * s, 0.2 * s, 0.0, kTwoPi));
          if (unit(rng) < 0.5) g.push_back(b.ellipse({0.0, 0.0}, 0.2 * s, 0.1 * s, 0.0, kPi));
          break;
        case 2:  // sofa: curved back and straight seat
          g.push_back(b.cubic({-h, 0.0}, {-h, h}, {h, h}, {h, 0.0}));
          g.push_back(b.cubic({-0.3 * s, 0.0}, {-0.3 * s, 0.3 * s}, {0.3 * s, 0.3 * s}, {0.3 * s, 0.0}));
          g.push_back(b.segment({-h, 0.0}, {h, 0.0}));
          g.push_back(b.segment({-h, 0.0}, {-h, -0.3 * s}));
          g.push_back(b.segment({h, 0.0}, {h, -0.3 * s}));
          break;
        default:  // plant or fixture: quadratic petals on a stand
          g.push_back(b.quad({-h, 0.0}, {0.0, h}, {h, 0.0}));
          g.push_back(b.quad({-h, 0.0}, {0.0, -h}, {h, 0.0}));
          g.push_back(b.polyline({{-0.2 * s, -0.2 * s}, {0.0, 0.2 * s}, {0.2 * s, -0.2 * s}}, false));
          break;
      }
      break;
    case 4:
    case 5:  // revolving or rolling door: drum and crossing leaves
      g.push_back(b.circle({0.0, 0.0}, h));
      g.push_back(b.segment({-h, 0.0}, {h, 0.0}));
      g.push_back(b.segment({0.0, -h}, {0.0, h}));
      break;
  }
  return g;
}

struct Placed {
  Vec2 center;
  double radius;
};

}  // namespace

SynthScene generate_scene(const SynthConfig& config) {
  if (!(config.width > 0.0 && config.height > 0.0)) throw ArgumentError("scene extent must be positive");
  if (!(config.min_size > 0.0 && config.max_size >= config.min_size)) throw ArgumentError("invalid symbol size range");
  if (config.symbols < 0 || config.clutter < 0) throw ArgumentError("symbol counts must be nonnegative");
  if (!(config.tile > 0.0)) throw ArgumentError("tile size must be positive");
  const ClassTable& table = ClassTable::standard();
  std::mt19937_64 rng(config.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };

  Drawing drawing;
  PanopticLabeling truth;
  auto add = [&](Geometry g, int cls, int inst) {
    drawing.add(std::move(g));
    truth.semantic.push_back(cls);
    truth.instance.push_back(inst);
  };
  const double W = config.width;
  const double H = config.height;
  add(Segment{{0.0, 0.0}, {W, 0.0}}, kWallClass, 0);
  add(Segment{{W, 0.0}, {W, H}}, kWallClass, 0);
  add(Segment{{W, H}, {0.0, H}}, kWallClass, 0);
  add(Segment{{0.0, H}, {0.0, 0.0}}, kWallClass, 0);

  std::vector<double> x_lines, y_lines;
  for (double x = config.tile; x < W; x += config.tile) x_lines.push_back(x);
  for (double y = config.tile; y < H; y += config.tile) y_lines.push_back(y);

  SynthScene scene;
  std::vector<Placed> placed;
  const int straddlers = static_cast<int>(std::lround(config.straddle_fraction * config.symbols));
  int next_instance = 1;
  for (int k = 0; k < config.symbols; ++k) {
    const double s = uniform(config.min_size, config.max_size);
    const double radius = s * std::sqrt(0.5);
    const bool straddle = k < straddlers && (!x_lines.empty() || !y_lines.empty());
    std::optional<Vec2> center;
    for (int attempt = 0; attempt < 2000 && !center; ++attempt) {
      Vec2 c{uniform(s, W - s), uniform(s, H - s)};
      if (straddle) {
        const std::size_t lines = x_lines.size() + y_lines.size();
        const std::size_t pick = std::min(lines - 1, static_cast<std::size_t>(unit(rng) * static_cast<double>(lines)));
        const double jitter = uniform(-0.1 * s, 0.1 * s);
        if (pick < x_lines.size()) {
          c.x = x_lines[pick] + jitter;
        } else {
          c.y = y_lines[pick - x_lines.size()] + jitter;
        }
        if (c.x < s || c.x > W - s || c.y < s || c.y > H - s) continue;
      }
      bool clear = true;
      for (const Placed& p : placed) {
        if (distance(p.center, c) < p.radius + radius + 2.0) {
          clear = false;
          break;
        }
      }
      if (clear) center = c;
    }
    if (!center) continue;
    const int cls = static_cast<int>(unit(rng) * 30.0) % 30;
    const double angle = uniform(0.0, kTwoPi);
    placed.push_back({*center, radius});
    const int inst = next_instance++;
    BBox box;
    for (Geometry& g : build_symbol(cls, s, SymbolBuilder(*center, angle), rng)) {
      add(std::move(g), cls, inst);
      box.expand(drawing.primitives.back().control_bounds());
    }
    bool crosses = false;
    for (double x : x_lines) crosses |= box.min.x < x && box.max.x > x;
    for (double y : y_lines) crosses |= box.min.y < y && box.max.y > y;
    scene.straddling += crosses ? 1 : 0;
  }

  for (int k = 0; k < config.clutter; ++k) {
    for (int attempt = 0; attempt < 2000; ++attempt) {
      const Vec2 a{uniform(2.0, W - 2.0), uniform(2.0, H - 2.0)};
      const Vec2 b = a + polar(uniform(2.0, 6.0), uniform(0.0, kTwoPi));
      if (b.x < 1.0 || b.x > W - 1.0 || b.y < 1.0 || b.y > H - 1.0) continue;
      bool clear = true;
      for (const Placed& p : placed) {
        if (distance(p.center, a) < p.radius + 8.0) {
          clear = false;
          break;
        }
      }
      if (!clear) continue;
      add(Segment{a, b}, table.background_id(), 0);
      break;
    }
  }

  scene.svg = render_labeled_svg(drawing, truth, table);
  scene.drawing = parse_drawing(scene.svg);
  if (scene.drawing.size() != drawing.size()) throw Error("synth", "rendered scene does not parse back to the same primitives");
  scene.truth = std::move(truth);
  return scene;
}

// ---------------------------------------------------------------------------

OraclePredictor::OraclePredictor(PanopticLabeling truth, const ClassTable& table)
    : truth_(std::move(truth)), table_(table) {
  for (std::size_t i = 0; i < truth_.size(); ++i) {
    const int inst = truth_.instance[i];
    if (inst <= 0 || !table_.is_thing(truth_.semantic[i])) continue;
    if (members_.size() <= static_cast<std::size_t>(inst)) members_.resize(inst + 1);
    members_[inst].push_back(static_cast<int>(i));
  }
}

WindowProposals OraclePredictor::predict(const WindowInput& input) const {
  const WindowSubset& subset = input.subset;
  if (truth_.size() != input.drawing.size()) throw ArgumentError("oracle truth does not match the drawing");
  const int K = table_.num_semantic_labels();
  const double hit = std::log(0.9);
  const double miss = std::log(0.1 / (K - 1));
  WindowProposals out{subset.window, subset.primitives, {}, {}};
  std::vector<int> seen;
  for (int pid : subset.primitives) {
    std::vector<double> row(K, miss);
    row[truth_.semantic[pid]] = hit;
    out.semantic.push_back(std::move(row));
    const int inst = truth_.instance[pid];
    if (inst > 0 && table_.is_thing(truth_.semantic[pid])) seen.push_back(inst);
  }
  std::sort(seen.begin(), seen.end());
  seen.erase(std::unique(seen.begin(), seen.end()), seen.end());
  for (int inst : seen) {
    const auto& members = members_[inst];
    long total = 0;
    long observed = 0;
    InstanceProposal p;
    p.mask.assign(subset.primitives.size(), 0.0);
    for (int pid : members) {
      total += input.cloud.per_primitive_count[pid];
      auto it = std::lower_bound(subset.primitives.begin(), subset.primitives.end(), pid);
      if (it == subset.primitives.end() || *it != pid) continue;
      const std::size_t k = static_cast<std::size_t>(it - subset.primitives.begin());
      observed += subset.observed[k];
      p.mask[k] = 1.0;
    }
    const int cls = truth_.semantic[members.front()];
    p.class_scores.assign(K, 0.1 / (K - 1));
    p.class_scores[cls] = 0.9;
    const double fraction = static_cast<double>(observed) / static_cast<double>(total);
    p.score = 0.9 * fraction + (observed == total ? 0.1 : 0.0);
    out.instances.push_back(std::move(p));
  }
  return out;
}

PredictionFile record_predictions(const Drawing& drawing, const Predictor& predictor, const SwaConfig& config) {
  validate(config);
  const DensePointCloud cloud = sample_drawing(drawing, config.interval);
  const FeatureMatrix features = describe_drawing(drawing, cloud);
  const WindowGrid grid = enumerate_windows(drawing.bounds, config.window, config.step);
  const auto subsets = collect_windows(cloud, grid.windows);
  PredictionFile file;
  file.windows = predict_windows(drawing, cloud, features, subsets, predictor, config.threads);
  file.config = to_json(config);
  return file;
}

}  // namespace cadspot
