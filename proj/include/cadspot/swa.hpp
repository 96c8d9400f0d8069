#pragma once

#include <functional>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "cadspot/assignment.hpp"
#include "cadspot/io.hpp"
#include "cadspot/predictor.hpp"
#include "cadspot/window.hpp"

namespace cadspot {

/// N x K_sem vote weights. Rows never touched by a window stay zero.
class SemanticAccumulator {
 public:
  SemanticAccumulator(std::size_t num_primitives, int num_labels);

  std::size_t num_primitives() const { return touched_.size(); }
  int num_labels() const { return num_labels_; }
  double at(int primitive, int label) const { return votes_[static_cast<std::size_t>(primitive) * num_labels_ + label]; }
  void add(int primitive, int label, double weight);
  bool touched(int primitive) const { return touched_[primitive] != 0; }
  /// Elementwise sum with another accumulator of the same shape.
  void merge(const SemanticAccumulator& other);

 private:
  int num_labels_;
  std::vector<double> votes_;
  std::vector<char> touched_;
};

/// Adds one window's votes: for each primitive row, the argmax class receives
/// observed/total points (or 1 when `weighted` is false). Throws ArgumentError
/// when rows do not align with the proposal's primitive list.
void vote_semantic(SemanticAccumulator& acc, const WindowProposals& proposals, const WindowSubset& subset,
                   const DensePointCloud& cloud, bool weighted = true);

struct SemanticResult {
  std::vector<int> labels;
  std::vector<int> untouched;  // primitives no window voted for; labeled background
};

/// Row argmax with ties to the lowest id; untouched rows get `background`.
SemanticResult finalize_semantic(const SemanticAccumulator& acc, int background);

struct InstanceParams {
  double mask_threshold = 0.5;
  int top_k = kDefaultTopK;
  NmsParams nms;
};

struct AggregatedInstances {
  std::vector<ScoredMask> pool;   // binarized global proposals entering NMS
  NmsResult nms;
  std::size_t stored_pairs = 0;
  std::size_t dense_pairs = 0;
};

/// Pools the top-k proposals of every window in the drawing-wide primitive id
/// space, keeps those whose argmax class is a thing class, and merges them with
/// Sparse-NMS. Window order in `windows` defines proposal order.
AggregatedInstances aggregate_instances(const std::vector<WindowProposals>& windows, const ClassTable& table,
                                        const InstanceParams& params = {});

struct SwaConfig {
  double window = kDefaultWindowSize;
  double step = kDefaultWindowStep;
  double interval = kDefaultSamplingInterval;
  bool weighted_vote = true;
  InstanceParams instances;
  int threads = 0;  // 0: hardware concurrency; never affects results
};

/// Effective configuration as JSON (thread count omitted so outputs do not depend on it).
nlohmann::json to_json(const SwaConfig& config);
/// Overlays the recognised keys of `j` onto `config`; other keys are left to the caller. Throws ConfigError on bad types.
void apply_json(SwaConfig& config, const nlohmann::json& j);
/// Throws ConfigError when a value is out of range.
void validate(const SwaConfig& config);

struct SwaReport {
  std::size_t windows = 0;
  std::size_t empty_windows = 0;
  std::size_t proposals = 0;
  std::size_t stored_pairs = 0;
  std::size_t dense_pairs = 0;
  std::size_t survivors = 0;
  std::vector<int> untouched;
  std::vector<std::string> warnings;
};

struct SwaResult {
  PanopticLabeling labeling;
  std::vector<InstanceScore> instances;  // one per final instance id, ascending
  SwaReport report;
};

/// Fuses semantic labels and NMS survivors into a panoptic labeling. Survivors
/// claim primitives in decayed-score order; a survivor that claims nothing is
/// discarded. Member primitives take the instance class. Instance ids are
/// numbered from 1 by smallest member primitive id.
SwaResult fuse_panoptic(const SemanticResult& semantic, const AggregatedInstances& instances);

/// Window proposals for every grid window, in grid order.
std::vector<WindowProposals> predict_windows(const Drawing& drawing, const DensePointCloud& cloud,
                                             const FeatureMatrix& features, const std::vector<WindowSubset>& subsets,
                                             const Predictor& predictor, int threads);

/// Full sliding-window aggregation: sample, tile, predict per window, vote,
/// aggregate instances, fuse. Deterministic for any thread count.
SwaResult run_swa(const Drawing& drawing, const Predictor& predictor, const ClassTable& table,
                  const SwaConfig& config = {});

/// Runs `body(i)` for i in [0, n) on up to `threads` workers (0: hardware
/// concurrency). Rethrows the exception of the lowest failing index.
void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& body);

/// Resolves a requested thread count: explicit value, else CADSPOT_THREADS, else hardware concurrency.
int resolve_threads(int requested);

}  // namespace cadspot
