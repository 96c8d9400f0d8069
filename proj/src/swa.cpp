#include "cadspot/swa.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <numeric>
#include <thread>

#include "cadspot/error.hpp"

namespace cadspot {

using nlohmann::json;

SemanticAccumulator::SemanticAccumulator(std::size_t num_primitives, int num_labels)
    : num_labels_(num_labels), votes_(num_primitives * static_cast<std::size_t>(num_labels), 0.0),
      touched_(num_primitives, 0) {
  if (num_labels <= 0) throw ArgumentError("accumulator needs at least one label");
}

void SemanticAccumulator::add(int primitive, int label, double weight) {
  if (primitive < 0 || static_cast<std::size_t>(primitive) >= touched_.size()) {
    throw ArgumentError("vote for unknown primitive " + std::to_string(primitive));
  }
  if (label < 0 || label >= num_labels_) throw ArgumentError("vote for unknown label " + std::to_string(label));
  votes_[static_cast<std::size_t>(primitive) * num_labels_ + label] += weight;
  touched_[primitive] = 1;
}

void SemanticAccumulator::merge(const SemanticAccumulator& other) {
  if (other.num_labels_ != num_labels_ || other.touched_.size() != touched_.size()) {
    throw ArgumentError("accumulator shapes differ");
  }
  for (std::size_t i = 0; i < votes_.size(); ++i) votes_[i] += other.votes_[i];
  for (std::size_t i = 0; i < touched_.size(); ++i) touched_[i] = static_cast<char>(touched_[i] | other.touched_[i]);
}

void vote_semantic(SemanticAccumulator& acc, const WindowProposals& proposals, const WindowSubset& subset,
                   const DensePointCloud& cloud, bool weighted) {
  if (proposals.semantic.size() != proposals.primitives.size()) {
    throw ArgumentError("window has " + std::to_string(proposals.semantic.size()) + " semantic rows for " +
                        std::to_string(proposals.primitives.size()) + " primitives");
  }
  for (std::size_t k = 0; k < proposals.primitives.size(); ++k) {
    const int pid = proposals.primitives[k];
    auto it = std::lower_bound(subset.primitives.begin(), subset.primitives.end(), pid);
    if (it == subset.primitives.end() || *it != pid) {
      throw ArgumentError("primitive " + std::to_string(pid) + " is not observed by the window");
    }
    const int observed = subset.observed[it - subset.primitives.begin()];
    if (observed <= 0) continue;
    const auto& row = proposals.semantic[k];
    if (static_cast<int>(row.size()) != acc.num_labels()) {
      throw ArgumentError("semantic row of primitive " + std::to_string(pid) + " has " + std::to_string(row.size()) +
                          " entries, expected " + std::to_string(acc.num_labels()));
    }
    const double weight =
        weighted ? static_cast<double>(observed) / static_cast<double>(cloud.per_primitive_count[pid]) : 1.0;
    acc.add(pid, argmax_class(row), weight);
  }
}

SemanticResult finalize_semantic(const SemanticAccumulator& acc, int background) {
  SemanticResult out;
  out.labels.resize(acc.num_primitives());
  for (std::size_t i = 0; i < acc.num_primitives(); ++i) {
    const int p = static_cast<int>(i);
    if (!acc.touched(p)) {
      out.labels[i] = background;
      out.untouched.push_back(p);
      continue;
    }
    int best = 0;
    for (int c = 1; c < acc.num_labels(); ++c) {
      if (acc.at(p, c) > acc.at(p, best)) best = c;
    }
    out.labels[i] = best;
  }
  return out;
}

AggregatedInstances aggregate_instances(const std::vector<WindowProposals>& windows, const ClassTable& table,
                                        const InstanceParams& params) {
  AggregatedInstances out;
  for (std::size_t w = 0; w < windows.size(); ++w) {
    const WindowProposals& wp = windows[w];
    for (int idx : topk_indices(wp.instances, params.top_k)) {
      const InstanceProposal& p = wp.instances[idx];
      if (p.mask.size() != wp.primitives.size()) {
        throw ArgumentError("instance mask length " + std::to_string(p.mask.size()) + " does not match " +
                            std::to_string(wp.primitives.size()) + " window primitives");
      }
      const int label = argmax_class(p.class_scores);
      if (label < 0 || !table.is_thing(label)) continue;
      ScoredMask m;
      for (int local : binarize_mask(p, params.mask_threshold)) m.primitives.push_back(wp.primitives[local]);
      if (m.primitives.empty()) continue;
      m.label = label;
      m.score = p.score;
      m.window = static_cast<int>(w);
      out.pool.push_back(std::move(m));
    }
  }
  const SparseIoUMatrix iou = build_sparse_iou(out.pool);
  out.stored_pairs = iou.stored_pairs();
  out.dense_pairs = iou.dense_pairs();
  out.nms = sparse_nms(out.pool, iou, params.nms);
  return out;
}

SwaResult fuse_panoptic(const SemanticResult& semantic, const AggregatedInstances& instances) {
  SwaResult out;
  const std::size_t n = semantic.labels.size();
  out.labeling.semantic = semantic.labels;
  out.labeling.instance.assign(n, 0);
  out.report.untouched = semantic.untouched;

  std::vector<int> order(instances.nms.kept.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return instances.nms.scores[a] > instances.nms.scores[b]; });
  std::vector<int> claim(n, -1);
  struct Claimed {
    std::vector<int> members;
    int label;
    double score;
  };
  std::vector<Claimed> claimed;
  for (int k : order) {
    const ScoredMask& m = instances.pool[instances.nms.kept[k]];
    Claimed c{{}, m.label, instances.nms.scores[k]};
    for (int pid : m.primitives) {
      if (pid < 0 || static_cast<std::size_t>(pid) >= n) throw ArgumentError("instance references unknown primitive");
      if (claim[pid] < 0) c.members.push_back(pid);
    }
    if (c.members.empty()) continue;
    for (int pid : c.members) claim[pid] = static_cast<int>(claimed.size());
    claimed.push_back(std::move(c));
  }
  std::sort(claimed.begin(), claimed.end(),
            [](const Claimed& a, const Claimed& b) { return a.members.front() < b.members.front(); });
  for (std::size_t i = 0; i < claimed.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    for (int pid : claimed[i].members) {
      out.labeling.instance[pid] = id;
      out.labeling.semantic[pid] = claimed[i].label;
    }
    out.instances.push_back({id, claimed[i].label, claimed[i].score});
  }
  out.report.survivors = instances.nms.kept.size();
  out.report.proposals = instances.pool.size();
  out.report.stored_pairs = instances.stored_pairs;
  out.report.dense_pairs = instances.dense_pairs;
  return out;
}

// ---------------------------------------------------------------------------

int resolve_threads(int requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("CADSPOT_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) return static_cast<int>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& body) {
  const std::size_t workers = std::min<std::size_t>(n, static_cast<std::size_t>(resolve_threads(threads)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        body(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < workers; ++t) pool.emplace_back(work);
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

std::vector<WindowProposals> predict_windows(const Drawing& drawing, const DensePointCloud& cloud,
                                             const FeatureMatrix& features, const std::vector<WindowSubset>& subsets,
                                             const Predictor& predictor, int threads) {
  std::vector<WindowProposals> out(subsets.size());
  parallel_for(subsets.size(), threads, [&](std::size_t w) {
    const WindowSubset& subset = subsets[w];
    if (subset.primitives.empty()) {
      out[w].window = subset.window;
      return;
    }
    WindowProposals wp = predictor.predict(WindowInput{drawing, cloud, features, subset});
    if (wp.semantic.size() != wp.primitives.size()) {
      throw Error("predictor", "window " + std::to_string(w) + " returned " + std::to_string(wp.semantic.size()) +
                                   " semantic rows for " + std::to_string(wp.primitives.size()) + " primitives");
    }
    for (const auto& p : wp.instances) {
      if (p.mask.size() != wp.primitives.size()) {
        throw Error("predictor", "window " + std::to_string(w) + " returned a mask of length " +
                                     std::to_string(p.mask.size()) + " for " + std::to_string(wp.primitives.size()) +
                                     " primitives");
      }
    }
    out[w] = std::move(wp);
  });
  return out;
}

SwaResult run_swa(const Drawing& drawing, const Predictor& predictor, const ClassTable& table,
                  const SwaConfig& config) {
  validate(config);
  const DensePointCloud cloud = sample_drawing(drawing, config.interval);
  const FeatureMatrix features = describe_drawing(drawing, cloud);
  const WindowGrid grid = enumerate_windows(drawing.bounds, config.window, config.step);
  const std::vector<WindowSubset> subsets = collect_windows(cloud, grid.windows);
  const std::vector<WindowProposals> proposals =
      predict_windows(drawing, cloud, features, subsets, predictor, config.threads);

  SemanticAccumulator acc(drawing.size(), table.num_semantic_labels());
  for (std::size_t w = 0; w < proposals.size(); ++w) {
    vote_semantic(acc, proposals[w], subsets[w], cloud, config.weighted_vote);
  }
  const SemanticResult semantic = finalize_semantic(acc, table.background_id());
  const AggregatedInstances instances = aggregate_instances(proposals, table, config.instances);
  SwaResult result = fuse_panoptic(semantic, instances);
  result.report.windows = subsets.size();
  result.report.empty_windows = static_cast<std::size_t>(
      std::count_if(subsets.begin(), subsets.end(), [](const WindowSubset& s) { return s.primitives.empty(); }));
  if (!semantic.untouched.empty()) {
    result.report.warnings.push_back(std::to_string(semantic.untouched.size()) +
                                     " primitives were not observed by any window and were labeled background");
  }
  return result;
}

// ---------------------------------------------------------------------------

json to_json(const SwaConfig& c) {
  return {{"interval", c.interval},
          {"window", c.window},
          {"step", c.step},
          {"weighted_vote", c.weighted_vote},
          {"mask_threshold", c.instances.mask_threshold},
          {"top_k", c.instances.top_k},
          {"nms_sigma", c.instances.nms.sigma},
          {"nms_kernel", c.instances.nms.kernel == DecayKernel::Gaussian ? "gaussian" : "linear"},
          {"nms_threshold", c.instances.nms.score_threshold},
          {"class_aware", c.instances.nms.class_aware}};
}

namespace {

template <class T>
void read_key(const json& j, const char* key, T& target) {
  auto it = j.find(key);
  if (it == j.end()) return;
  try {
    target = it->get<T>();
  } catch (const json::exception&) {
    throw ConfigError(std::string("config key \"") + key + "\" has the wrong type");
  }
}

}  // namespace

void apply_json(SwaConfig& c, const json& j) {
  if (j.is_null()) return;
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  read_key(j, "interval", c.interval);
  read_key(j, "window", c.window);
  read_key(j, "step", c.step);
  read_key(j, "weighted_vote", c.weighted_vote);
  read_key(j, "mask_threshold", c.instances.mask_threshold);
  read_key(j, "top_k", c.instances.top_k);
  read_key(j, "nms_sigma", c.instances.nms.sigma);
  read_key(j, "nms_threshold", c.instances.nms.score_threshold);
  read_key(j, "class_aware", c.instances.nms.class_aware);
  if (j.contains("nms_kernel")) {
    std::string kernel;
    read_key(j, "nms_kernel", kernel);
    if (kernel == "gaussian") {
      c.instances.nms.kernel = DecayKernel::Gaussian;
    } else if (kernel == "linear") {
      c.instances.nms.kernel = DecayKernel::Linear;
    } else {
      throw ConfigError("nms_kernel must be \"gaussian\" or \"linear\"");
    }
  }
}

void validate(const SwaConfig& c) {
  if (!(c.interval > 0.0) || !std::isfinite(c.interval)) throw ConfigError("interval must be positive");
  if (!(c.window > 0.0) || !std::isfinite(c.window)) throw ConfigError("window must be positive");
  if (!(c.step > 0.0) || c.step > c.window) throw ConfigError("step must satisfy 0 < step <= window");
  if (!std::isfinite(c.instances.mask_threshold)) throw ConfigError("mask_threshold must be finite");
  if (c.instances.top_k < 0) throw ConfigError("top_k must be nonnegative");
  if (!(c.instances.nms.sigma > 0.0)) throw ConfigError("nms_sigma must be positive");
  if (!std::isfinite(c.instances.nms.score_threshold)) throw ConfigError("nms_threshold must be finite");
}

}  // namespace cadspot
