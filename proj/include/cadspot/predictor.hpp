#pragma once

#include <map>
#include <memory>
#include <vector>

#include "cadspot/features.hpp"
#include "cadspot/model.hpp"
#include "cadspot/window.hpp"

namespace cadspot {

inline constexpr int kDefaultTopK = 220;

/// Everything a predictor may look at for one window.
struct WindowInput {
  const Drawing& drawing;
  const DensePointCloud& cloud;
  const FeatureMatrix& features;  // primitive-wise features, one row per drawing primitive
  const WindowSubset& subset;
};

/// Source of per-window semantic and instance proposals. Implementations must be
/// deterministic and safe to call concurrently on distinct windows.
class Predictor {
 public:
  virtual ~Predictor() = default;
  /// Rows of the result align with `input.subset.primitives`. An empty subset yields empty proposals.
  virtual WindowProposals predict(const WindowInput& input) const = 0;
};

/// The k highest-scoring proposals ordered by (score desc, index asc).
std::vector<InstanceProposal> select_topk(const std::vector<InstanceProposal>& proposals, int k = kDefaultTopK);

/// Indices chosen by select_topk.
std::vector<int> topk_indices(const std::vector<InstanceProposal>& proposals, int k = kDefaultTopK);

/// Serves proposals recorded in a predictions file, matched to windows by rectangle.
class ReplayPredictor final : public Predictor {
 public:
  explicit ReplayPredictor(std::vector<WindowProposals> recorded);

  /// Returns the recording for the window. Recordings without a primitive list
  /// are aligned with the collected subset. Throws Error("predictor") when a
  /// non-empty window was never recorded or a recording disagrees with the subset.
  WindowProposals predict(const WindowInput& input) const override;

  std::size_t size() const { return recorded_.size(); }

 private:
  std::vector<WindowProposals> recorded_;
};

/// Labeled primitive descriptors that the baseline predictor retrieves from.
struct ExemplarBank {
  FeatureMatrix prototypes;  // one row per distinct descriptor
  std::vector<int> labels;   // semantic class of each prototype
  int num_labels = 0;        // K_sem, including background

  std::size_t size() const { return labels.size(); }
};

/// Builds a bank from an annotated drawing. Identical descriptors are merged and
/// take their most frequent label (lowest id on ties).
ExemplarBank build_exemplar_bank(const Drawing& drawing, const PanopticLabeling& labeling, const ClassTable& table,
                                 double interval = kDefaultSamplingInterval);

struct BaselineParams {
  double epsilon = 2.0 * kDefaultSamplingInterval;  // proximity graph radius
  int top_k = kDefaultTopK;
};

/// Geometric stand-in for a trained decoder. Semantic rows are log-softmax of
/// negative nearest-prototype distance per class (classes without prototypes get
/// kAbsentLogLikelihood). Instances are connected components of same-class thing
/// primitives whose in-window points come within epsilon; confidence is the mean
/// member similarity 1 / (1 + distance).
class BaselinePredictor final : public Predictor {
 public:
  BaselinePredictor(ExemplarBank bank, const ClassTable& table, BaselineParams params = {});

  WindowProposals predict(const WindowInput& input) const override;

 private:
  ExemplarBank bank_;
  ClassTable table_;
  BaselineParams params_;
};

inline constexpr double kAbsentLogLikelihood = -1e9;

}  // namespace cadspot
