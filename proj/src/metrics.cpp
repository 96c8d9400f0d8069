#include "cadspot/metrics.hpp"

#include <algorithm>
#include <map>
#include <numeric>

#include "cadspot/error.hpp"

namespace cadspot {

using nlohmann::json;

SemanticF1 semantic_f1(const std::vector<int>& gt, const std::vector<int>& pred, const ClassTable& table,
                       const std::vector<double>& lengths) {
  if (gt.size() != pred.size()) throw ArgumentError("ground truth and prediction lengths differ");
  if (!lengths.empty() && lengths.size() != gt.size()) throw ArgumentError("primitive length vector size differs");
  const int K = static_cast<int>(table.size());
  std::vector<ClassF1> rows(K);
  for (int c = 0; c < K; ++c) rows[c].id = c;
  for (std::size_t i = 0; i < gt.size(); ++i) {
    const int g = gt[i];
    const int p = pred[i];
    const bool g_sym = g >= 0 && g < K;
    const bool p_sym = p >= 0 && p < K;
    if (g_sym) rows[g].gt_length += lengths.empty() ? 1.0 : lengths[i];
    if (g_sym && p == g) {
      ++rows[g].tp;
      continue;
    }
    if (g_sym) ++rows[g].fn;
    if (p_sym) ++rows[p].fp;
  }
  SemanticF1 out;
  long tp = 0, fp = 0, fn = 0;
  double weight_sum = 0.0;
  for (auto& r : rows) {
    tp += r.tp;
    fp += r.fp;
    fn += r.fn;
    if (r.tp + r.fn == 0) continue;
    r.precision = r.tp + r.fp > 0 ? static_cast<double>(r.tp) / (r.tp + r.fp) : 0.0;
    r.recall = static_cast<double>(r.tp) / (r.tp + r.fn);
    r.f1 = r.precision + r.recall > 0.0 ? 2.0 * r.precision * r.recall / (r.precision + r.recall) : 0.0;
    out.per_class.push_back(r);
    out.f1 += r.f1;
    out.wf1 += r.f1 * r.gt_length;
    weight_sum += r.gt_length;
  }
  if (out.per_class.empty()) {
    out.f1 = out.wf1 = fp == 0 ? 1.0 : 0.0;
  } else {
    out.f1 /= static_cast<double>(out.per_class.size());
    out.wf1 = weight_sum > 0.0 ? out.wf1 / weight_sum : 0.0;
  }
  out.micro_f1 = 2 * tp + fp + fn > 0 ? 2.0 * tp / static_cast<double>(2 * tp + fp + fn) : 1.0;
  return out;
}

// ---------------------------------------------------------------------------

std::vector<InstanceRecord> instances_of(const PanopticLabeling& labeling, const ClassTable& table,
                                         const std::vector<std::pair<int, double>>& scores) {
  std::map<int, InstanceRecord> groups;
  for (std::size_t i = 0; i < labeling.size(); ++i) {
    const int inst = labeling.instance[i];
    if (inst == 0 || !table.is_thing(labeling.semantic[i])) continue;
    auto [it, inserted] = groups.try_emplace(inst);
    if (inserted) it->second.label = labeling.semantic[i];
    it->second.primitives.push_back(static_cast<int>(i));
  }
  for (const auto& [id, score] : scores) {
    auto it = groups.find(id);
    if (it != groups.end()) it->second.score = score;
  }
  std::vector<InstanceRecord> out;
  for (auto& [id, rec] : groups) out.push_back(std::move(rec));
  return out;
}

BBox instance_box(const PrimitiveSet& primitives, const DensePointCloud& cloud) {
  BBox box;
  for (int pid : primitives) {
    if (pid < 0 || static_cast<std::size_t>(pid) >= cloud.num_primitives()) {
      throw ArgumentError("instance references unknown primitive " + std::to_string(pid));
    }
    for (const Point3& p : cloud.points_of(pid)) box.expand(p.xy());
  }
  return box;
}

double box_iou(const BBox& a, const BBox& b) {
  if (a.empty() || b.empty()) return 0.0;
  const double iw = std::max(0.0, std::min(a.max.x, b.max.x) - std::max(a.min.x, b.min.x));
  const double ih = std::max(0.0, std::min(a.max.y, b.max.y) - std::max(a.min.y, b.min.y));
  const double inter = iw * ih;
  const double uni = a.area() + b.area() - inter;
  if (uni <= 0.0) return a == b ? 1.0 : 0.0;
  return inter / uni;
}

double average_precision(const std::vector<BBox>& gt, const std::vector<BBox>& pred,
                         const std::vector<double>& scores, double threshold) {
  if (pred.size() != scores.size()) throw ArgumentError("prediction and score counts differ");
  if (gt.empty()) return 0.0;
  std::vector<int> order(pred.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return scores[a] > scores[b]; });
  std::vector<char> used(gt.size(), 0);
  std::vector<char> hit(order.size(), 0);
  for (std::size_t k = 0; k < order.size(); ++k) {
    int best = -1;
    double best_iou = threshold;
    for (std::size_t g = 0; g < gt.size(); ++g) {
      if (used[g]) continue;
      const double iou = box_iou(gt[g], pred[order[k]]);
      if (iou >= best_iou && (best < 0 || iou > box_iou(gt[best], pred[order[k]]))) {
        best = static_cast<int>(g);
        best_iou = iou;
      }
    }
    if (best >= 0) {
      used[best] = 1;
      hit[k] = 1;
    }
  }
  std::vector<double> precision(order.size()), recall(order.size());
  int tp = 0;
  for (std::size_t k = 0; k < order.size(); ++k) {
    tp += hit[k];
    precision[k] = static_cast<double>(tp) / static_cast<double>(k + 1);
    recall[k] = static_cast<double>(tp) / static_cast<double>(gt.size());
  }
  for (std::size_t k = order.size(); k-- > 1;) precision[k - 1] = std::max(precision[k - 1], precision[k]);
  double ap = 0.0;
  double prev_recall = 0.0;
  for (std::size_t k = 0; k < order.size(); ++k) {
    if (!hit[k]) continue;
    ap += (recall[k] - prev_recall) * precision[k];
    prev_recall = recall[k];
  }
  return ap;
}

ApResult instance_ap(const std::vector<InstanceRecord>& gt, const std::vector<InstanceRecord>& pred,
                     const DensePointCloud& cloud) {
  static constexpr double kThresholds[10] = {0.50, 0.55, 0.60, 0.65, 0.70, 0.75, 0.80, 0.85, 0.90, 0.95};
  std::map<int, std::vector<BBox>> gt_boxes, pred_boxes;
  std::map<int, std::vector<double>> pred_scores;
  for (const auto& g : gt) gt_boxes[g.label].push_back(instance_box(g.primitives, cloud));
  for (const auto& p : pred) {
    pred_boxes[p.label].push_back(instance_box(p.primitives, cloud));
    pred_scores[p.label].push_back(p.score);
  }
  ApResult out;
  out.per_threshold.assign(10, 0.0);
  if (gt_boxes.empty()) {
    const double v = pred.empty() ? 1.0 : 0.0;
    out.per_threshold.assign(10, v);
    out.ap50 = out.ap75 = out.map = v;
    return out;
  }
  for (const auto& [label, boxes] : gt_boxes) {
    const auto& pb = pred_boxes[label];
    const auto& ps = pred_scores[label];
    for (int t = 0; t < 10; ++t) {
      const double ap = average_precision(boxes, pb, ps, kThresholds[t]);
      out.per_threshold[t] += ap;
      if (t == 0) out.per_class_ap50.push_back({label, ap});
    }
  }
  for (double& v : out.per_threshold) v /= static_cast<double>(gt_boxes.size());
  out.ap50 = out.per_threshold[0];
  out.ap75 = out.per_threshold[5];
  out.map = std::accumulate(out.per_threshold.begin(), out.per_threshold.end(), 0.0) / 10.0;
  return out;
}

// ---------------------------------------------------------------------------

namespace {

struct SegmentKey {
  int label;
  int id;
  auto operator<=>(const SegmentKey&) const = default;
};

std::optional<SegmentKey> segment_of(const PanopticLabeling& lab, std::size_t i, const ClassTable& table) {
  const int c = lab.semantic[i];
  if (table.is_thing(c)) {
    if (lab.instance[i] == 0) return std::nullopt;
    return SegmentKey{c, lab.instance[i]};
  }
  if (table.is_stuff(c)) return SegmentKey{c, 0};
  return std::nullopt;
}

void require_valid(const PanopticLabeling& lab, const ClassTable& table, std::size_t n, const char* which) {
  const LabelingReport report = validate_labeling(lab, table, n);
  if (!report.ok()) throw ArgumentError(std::string(which) + " labeling is invalid: " + report.violations.front().message);
}

PqSummary summarize(const std::vector<PqClassRow>& rows, int filter) {
  PqSummary s;
  for (const auto& r : rows) {
    if (filter == 1 && !r.thing) continue;
    if (filter == 2 && r.thing) continue;
    s.pq += r.pq;
    s.sq += r.sq;
    s.rq += r.rq;
    ++s.classes;
  }
  if (s.classes > 0) {
    s.pq /= s.classes;
    s.sq /= s.classes;
    s.rq /= s.classes;
  }
  return s;
}

}  // namespace

PanopticReport panoptic_quality(const PanopticLabeling& gt, const PanopticLabeling& pred, const ClassTable& table,
                                const PqOptions& options) {
  const std::size_t n = gt.size();
  require_valid(gt, table, n, "ground truth");
  require_valid(pred, table, n, "predicted");
  if (!options.weights.empty() && options.weights.size() != n) throw ArgumentError("IoU weight vector size differs");
  std::map<SegmentKey, double> gt_area, pred_area;
  std::map<std::pair<SegmentKey, SegmentKey>, double> inter;
  for (std::size_t i = 0; i < n; ++i) {
    const double w = options.weights.empty() ? 1.0 : options.weights[i];
    const auto g = segment_of(gt, i, table);
    const auto p = segment_of(pred, i, table);
    if (g) gt_area[*g] += w;
    if (p) pred_area[*p] += w;
    if (g && p && g->label == p->label) inter[{*g, *p}] += w;
  }
  std::map<SegmentKey, char> gt_matched, pred_matched;
  std::map<int, PqClassRow> rows;
  PanopticReport report;
  for (const auto& [pair, area] : inter) {
    const auto& [g, p] = pair;
    const double uni = gt_area[g] + pred_area[p] - area;
    const double iou = uni > 0.0 ? area / uni : 0.0;
    if (iou <= 0.5) continue;
    gt_matched[g] = pred_matched[p] = 1;
    auto& row = rows[g.label];
    ++row.tp;
    row.iou_sum += iou;
    report.matches.push_back({g.label, g.id, p.id, iou});
  }
  for (const auto& [g, area] : gt_area) {
    if (!gt_matched.count(g)) ++rows[g.label].fn;
  }
  for (const auto& [p, area] : pred_area) {
    if (!pred_matched.count(p)) ++rows[p.label].fp;
  }
  for (auto& [label, row] : rows) {
    row.id = label;
    row.thing = table.is_thing(label);
    const double denom = row.tp + 0.5 * row.fp + 0.5 * row.fn;
    row.pq = denom > 0.0 ? row.iou_sum / denom : 0.0;
    row.rq = denom > 0.0 ? row.tp / denom : 0.0;
    row.sq = row.tp > 0 ? row.iou_sum / row.tp : 0.0;
    report.per_class.push_back(row);
  }
  report.all = summarize(report.per_class, 0);
  report.things = summarize(report.per_class, 1);
  report.stuff = summarize(report.per_class, 2);
  return report;
}

// ---------------------------------------------------------------------------

namespace {

std::string class_name(const ClassTable& table, int id) {
  if (id >= 0 && static_cast<std::size_t>(id) < table.size()) return table.classes()[id].name;
  return "background";
}

json summary_json(const PqSummary& s) { return {{"pq", s.pq}, {"sq", s.sq}, {"rq", s.rq}, {"classes", s.classes}}; }

}  // namespace

json to_json(const SemanticF1& f1, const ClassTable& table) {
  json rows = json::array();
  for (const auto& r : f1.per_class) {
    rows.push_back({{"id", r.id},
                    {"name", class_name(table, r.id)},
                    {"tp", r.tp},
                    {"fp", r.fp},
                    {"fn", r.fn},
                    {"precision", r.precision},
                    {"recall", r.recall},
                    {"f1", r.f1},
                    {"gt_length", r.gt_length}});
  }
  return {{"f1", f1.f1}, {"wf1", f1.wf1}, {"micro_f1", f1.micro_f1}, {"per_class", rows}};
}

json to_json(const ApResult& ap) {
  json per_class = json::array();
  for (const auto& [label, v] : ap.per_class_ap50) per_class.push_back({{"id", label}, {"ap50", v}});
  return {{"ap50", ap.ap50},
          {"ap75", ap.ap75},
          {"map", ap.map},
          {"per_threshold", ap.per_threshold},
          {"per_class", per_class}};
}

json to_json(const PanopticReport& report, const ClassTable& table) {
  json rows = json::array();
  for (const auto& r : report.per_class) {
    rows.push_back({{"id", r.id},
                    {"name", class_name(table, r.id)},
                    {"kind", r.thing ? "thing" : "stuff"},
                    {"tp", r.tp},
                    {"fp", r.fp},
                    {"fn", r.fn},
                    {"iou_sum", r.iou_sum},
                    {"pq", r.pq},
                    {"sq", r.sq},
                    {"rq", r.rq}});
  }
  json matches = json::array();
  for (const auto& m : report.matches) {
    matches.push_back({{"class", m.label}, {"gt", m.gt_segment}, {"pred", m.pred_segment}, {"iou", m.iou}});
  }
  return {{"total", summary_json(report.all)},
          {"thing", summary_json(report.things)},
          {"stuff", summary_json(report.stuff)},
          {"per_class", rows},
          {"matches", matches}};
}

}  // namespace cadspot
