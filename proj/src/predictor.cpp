#include "cadspot/predictor.hpp"

#include <algorithm>
#include <boost/pending/disjoint_sets.hpp>
#include <cmath>
#include <numeric>
#include <sstream>
#include <unordered_map>

#include "cadspot/error.hpp"

namespace cadspot {

std::vector<int> topk_indices(const std::vector<InstanceProposal>& proposals, int k) {
  if (k < 0) throw ArgumentError("top-k must be nonnegative");
  std::vector<int> order(proposals.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return proposals[a].score > proposals[b].score; });
  if (order.size() > static_cast<std::size_t>(k)) order.resize(k);
  return order;
}

std::vector<InstanceProposal> select_topk(const std::vector<InstanceProposal>& proposals, int k) {
  std::vector<InstanceProposal> out;
  for (int i : topk_indices(proposals, k)) out.push_back(proposals[i]);
  return out;
}

// ---------------------------------------------------------------------------

namespace {

bool same_rect(const BBox& a, const BBox& b) {
  auto close = [](double x, double y) { return std::abs(x - y) <= 1e-9 * std::max({1.0, std::abs(x), std::abs(y)}); };
  return close(a.min.x, b.min.x) && close(a.min.y, b.min.y) && close(a.max.x, b.max.x) && close(a.max.y, b.max.y);
}

std::string rect_string(const BBox& b) {
  std::ostringstream ss;
  ss.precision(17);
  ss << "[" << b.min.x << ", " << b.min.y << ", " << b.max.x << ", " << b.max.y << "]";
  return ss.str();
}

}  // namespace

ReplayPredictor::ReplayPredictor(std::vector<WindowProposals> recorded) : recorded_(std::move(recorded)) {}

WindowProposals ReplayPredictor::predict(const WindowInput& input) const {
  const WindowSubset& subset = input.subset;
  const WindowProposals* match = nullptr;
  for (const auto& w : recorded_) {
    if (same_rect(w.window, subset.window)) {
      match = &w;
      break;
    }
  }
  if (!match) {
    if (subset.primitives.empty()) return WindowProposals{subset.window, {}, {}, {}};
    throw Error("predictor", "no recorded proposals for window " + rect_string(subset.window));
  }
  WindowProposals out = *match;
  out.window = subset.window;
  if (out.primitives.empty() && !out.semantic.empty()) {
    if (out.semantic.size() != subset.primitives.size()) {
      throw Error("predictor", "recorded window " + rect_string(subset.window) + " has " +
                                   std::to_string(out.semantic.size()) + " rows but the window holds " +
                                   std::to_string(subset.primitives.size()) + " primitives");
    }
    out.primitives = subset.primitives;
  }
  if (!std::includes(subset.primitives.begin(), subset.primitives.end(), out.primitives.begin(),
                     out.primitives.end())) {
    throw Error("predictor", "recorded window " + rect_string(subset.window) +
                                 " references primitives outside the window");
  }
  return out;
}

// ---------------------------------------------------------------------------

ExemplarBank build_exemplar_bank(const Drawing& drawing, const PanopticLabeling& labeling, const ClassTable& table,
                                 double interval) {
  if (labeling.size() != drawing.size()) throw ArgumentError("exemplar labeling does not match drawing size");
  const DensePointCloud cloud = sample_drawing(drawing, interval);
  const FeatureMatrix desc = describe_drawing(drawing, cloud);
  std::map<std::vector<double>, std::map<int, int>> votes;
  for (std::size_t i = 0; i < drawing.size(); ++i) {
    const int label = labeling.semantic[i];
    if (!table.valid_label(label)) throw ArgumentError("exemplar label " + std::to_string(label) + " out of range");
    std::vector<double> row(desc.row(i).data(), desc.row(i).data() + desc.cols());
    ++votes[row][label];
  }
  ExemplarBank bank;
  bank.num_labels = table.num_semantic_labels();
  bank.prototypes.resize(static_cast<Eigen::Index>(votes.size()), kDescriptorSize);
  Eigen::Index r = 0;
  for (const auto& [row, counts] : votes) {
    for (int c = 0; c < kDescriptorSize; ++c) bank.prototypes(r, c) = row[c];
    int best = counts.begin()->first;
    for (const auto& [label, n] : counts) {
      if (n > counts.at(best)) best = label;
    }
    bank.labels.push_back(best);
    ++r;
  }
  return bank;
}

BaselinePredictor::BaselinePredictor(ExemplarBank bank, const ClassTable& table, BaselineParams params)
    : bank_(std::move(bank)), table_(table), params_(params) {
  if (bank_.size() == 0) throw ConfigError("exemplar bank is empty");
  if (bank_.num_labels != table_.num_semantic_labels()) throw ConfigError("exemplar bank uses a different class table");
  if (!(params_.epsilon > 0.0)) throw ConfigError("proximity radius must be positive");
}

WindowProposals BaselinePredictor::predict(const WindowInput& input) const {
  const WindowSubset& subset = input.subset;
  WindowProposals out{subset.window, subset.primitives, {}, {}};
  if (subset.primitives.empty()) return out;
  if (input.features.rows() != static_cast<Eigen::Index>(input.drawing.size()) ||
      input.features.cols() != kDescriptorSize) {
    throw ArgumentError("baseline predictor needs one descriptor row per primitive");
  }
  const int K = bank_.num_labels;
  const std::size_t n = subset.primitives.size();
  std::vector<int> cls(n);
  std::vector<double> similarity(n);
  out.semantic.resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    const auto desc = input.features.row(subset.primitives[k]);
    std::vector<double> best(K, std::numeric_limits<double>::infinity());
    for (std::size_t r = 0; r < bank_.size(); ++r) {
      const double dist = (bank_.prototypes.row(static_cast<Eigen::Index>(r)) - desc).norm();
      best[bank_.labels[r]] = std::min(best[bank_.labels[r]], dist);
    }
    double nearest = std::numeric_limits<double>::infinity();
    for (double v : best) nearest = std::min(nearest, v);
    double z = 0.0;
    for (double v : best) {
      if (std::isfinite(v)) z += std::exp(nearest - v);
    }
    auto& row = out.semantic[k];
    row.resize(K);
    for (int c = 0; c < K; ++c) {
      row[c] = std::isfinite(best[c]) ? (nearest - best[c]) - std::log(z) : kAbsentLogLikelihood;
    }
    cls[k] = argmax_class(row);
    similarity[k] = 1.0 / (1.0 + nearest);
  }

  // Proximity graph over in-window points of thing-classified primitives.
  const double eps = params_.epsilon;
  struct CellHash {
    std::size_t operator()(const std::pair<long long, long long>& c) const {
      return std::hash<long long>()(c.first * 73856093LL ^ c.second * 19349663LL);
    }
  };
  std::unordered_map<std::pair<long long, long long>, std::vector<std::pair<Vec2, int>>, CellHash> grid;
  auto cell_of = [&](Vec2 p) {
    return std::pair<long long, long long>{static_cast<long long>(std::floor(p.x / eps)),
                                           static_cast<long long>(std::floor(p.y / eps))};
  };
  std::vector<int> rank(n), parent(n);
  boost::disjoint_sets<int*, int*> sets(rank.data(), parent.data());
  for (std::size_t k = 0; k < n; ++k) sets.make_set(static_cast<int>(k));
  for (std::size_t k = 0; k < n; ++k) {
    if (!table_.is_thing(cls[k])) continue;
    for (const Point3& q : input.cloud.points_of(subset.primitives[k])) {
      const Vec2 p = q.xy();
      if (!subset.window.contains(p)) continue;
      const auto [cx, cy] = cell_of(p);
      for (long long dx = -1; dx <= 1; ++dx) {
        for (long long dy = -1; dy <= 1; ++dy) {
          auto it = grid.find({cx + dx, cy + dy});
          if (it == grid.end()) continue;
          for (const auto& [other, j] : it->second) {
            if (cls[j] == cls[k] && distance(p, other) <= eps) sets.union_set(static_cast<int>(k), j);
          }
        }
      }
      grid[{cx, cy}].push_back({p, static_cast<int>(k)});
    }
  }
  std::map<int, std::vector<int>> components;  // keyed by smallest member
  std::map<int, int> root_to_first;
  for (std::size_t k = 0; k < n; ++k) {
    if (!table_.is_thing(cls[k])) continue;
    const int root = sets.find_set(static_cast<int>(k));
    auto [it, inserted] = root_to_first.emplace(root, static_cast<int>(k));
    components[it->second].push_back(static_cast<int>(k));
  }
  for (const auto& [first, members] : components) {
    InstanceProposal p;
    p.mask.assign(n, 0.0);
    p.class_scores.assign(K, 0.0);
    double sim = 0.0;
    for (int k : members) {
      p.mask[k] = 1.0;
      for (int c = 0; c < K; ++c) p.class_scores[c] += std::exp(out.semantic[k][c]);
      sim += similarity[k];
    }
    for (double& v : p.class_scores) v /= static_cast<double>(members.size());
    p.score = sim / static_cast<double>(members.size());
    out.instances.push_back(std::move(p));
  }
  out.instances = select_topk(out.instances, params_.top_k);
  return out;
}

}  // namespace cadspot
