#pragma once

#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "cadspot/assignment.hpp"
#include "cadspot/model.hpp"
#include "cadspot/sampler.hpp"

namespace cadspot {

// ---------------------------------------------------------------------------
// Semantic F1

struct ClassF1 {
  int id = 0;
  int tp = 0, fp = 0, fn = 0;
  double precision = 0.0, recall = 0.0, f1 = 0.0;
  double gt_length = 0.0;  // total GT arc length of the class (wF1 weight)
};

struct SemanticF1 {
  double f1 = 0.0;        // macro mean over classes present in GT
  double wf1 = 0.0;       // macro mean weighted by GT arc length
  double micro_f1 = 0.0;  // pooled TP/FP/FN over all symbol classes
  std::vector<ClassF1> per_class;  // classes present in GT, ascending id
};

/// Per-primitive precision/recall/F1 over symbol classes (background excluded).
/// Throws ArgumentError when the vectors have different lengths.
SemanticF1 semantic_f1(const std::vector<int>& gt, const std::vector<int>& pred, const ClassTable& table,
                       const std::vector<double>& lengths);

// ---------------------------------------------------------------------------
// Instance AP

struct InstanceRecord {
  PrimitiveSet primitives;
  int label = 0;
  double score = 1.0;
};

/// Thing instances of a labeling (instance id != 0 on thing classes), ordered by
/// instance id. `scores`, indexed by instance id, sets the confidence (default 1).
std::vector<InstanceRecord> instances_of(const PanopticLabeling& labeling, const ClassTable& table,
                                         const std::vector<std::pair<int, double>>& scores = {});

struct ApResult {
  double ap50 = 0.0;
  double ap75 = 0.0;
  double map = 0.0;                      // mean over IoU 0.50:0.05:0.95
  std::vector<double> per_threshold;     // 10 entries
  std::vector<std::pair<int, double>> per_class_ap50;
};

/// Axis-aligned box of all sampled points of the given primitives.
BBox instance_box(const PrimitiveSet& primitives, const DensePointCloud& cloud);

/// Box IoU; two identical zero-area boxes score 1.
double box_iou(const BBox& a, const BBox& b);

/// All-point interpolated precision-recall area for one class at one threshold.
/// Predictions are matched greedily by (score desc, index asc) to the unmatched
/// GT box of the same class with the highest IoU >= threshold.
double average_precision(const std::vector<BBox>& gt, const std::vector<BBox>& pred,
                         const std::vector<double>& scores, double threshold);

/// Per-class AP averaged over thing classes present in GT, at each threshold.
ApResult instance_ap(const std::vector<InstanceRecord>& gt, const std::vector<InstanceRecord>& pred,
                     const DensePointCloud& cloud);

// ---------------------------------------------------------------------------
// Panoptic quality

struct PqClassRow {
  int id = 0;
  bool thing = true;
  int tp = 0, fp = 0, fn = 0;
  double iou_sum = 0.0;
  double pq = 0.0, sq = 0.0, rq = 0.0;
};

struct MatchedPair {
  int label = 0;
  int gt_segment = 0;    // GT instance id (things) or 0 (stuff)
  int pred_segment = 0;
  double iou = 0.0;
};

struct PqSummary {
  double pq = 0.0, sq = 0.0, rq = 0.0;
  int classes = 0;
};

struct PanopticReport {
  std::vector<PqClassRow> per_class;  // classes with TP + FP + FN > 0
  PqSummary all, things, stuff;
  std::vector<MatchedPair> matches;
};

struct PqOptions {
  /// Per-primitive weights for IoU (for example arc length); empty means count-based.
  std::vector<double> weights;
};

/// Segments are thing instances (class, instance id != 0) and one segment per
/// stuff class; background primitives are void. A GT/pred pair of the same class
/// matches when IoU > 0.5. Throws ArgumentError when either labeling is invalid.
PanopticReport panoptic_quality(const PanopticLabeling& gt, const PanopticLabeling& pred, const ClassTable& table,
                                const PqOptions& options = {});

nlohmann::json to_json(const SemanticF1& f1, const ClassTable& table);
nlohmann::json to_json(const ApResult& ap);
nlohmann::json to_json(const PanopticReport& report, const ClassTable& table);

}  // namespace cadspot
