#include "cadspot/losses.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "cadspot/error.hpp"

namespace cadspot {
namespace {

void check_lengths(std::span<const double> pred, std::span<const double> gt, const char* what) {
  if (pred.size() != gt.size()) {
    throw ArgumentError(std::string(what) + ": length mismatch (" + std::to_string(pred.size()) + " vs " +
                        std::to_string(gt.size()) + ")");
  }
}

void check_logits(std::span<const double> logits, int target) {
  if (target < 0 || static_cast<std::size_t>(target) >= logits.size()) {
    throw ArgumentError("cross_entropy_cls: target " + std::to_string(target) + " outside [0, " +
                        std::to_string(logits.size()) + ")");
  }
  for (double x : logits) {
    if (!std::isfinite(x)) throw ArgumentError("cross_entropy_cls: non-finite logit");
  }
}

std::vector<double> softmax(std::span<const double> logits) {
  const double shift = *std::max_element(logits.begin(), logits.end());
  std::vector<double> out(logits.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - shift);
    sum += out[i];
  }
  for (double& v : out) v /= sum;
  return out;
}

}  // namespace

double cross_entropy_cls(std::span<const double> logits, int target, double class_weight) {
  check_logits(logits, target);
  const double shift = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (double x : logits) sum += std::exp(x - shift);
  return class_weight * (std::log(sum) + shift - logits[target]);
}

std::vector<double> cross_entropy_cls_grad(std::span<const double> logits, int target, double class_weight) {
  check_logits(logits, target);
  std::vector<double> grad = softmax(logits);
  grad[target] -= 1.0;
  for (double& g : grad) g *= class_weight;
  return grad;
}

double bce_mask(std::span<const double> pred, std::span<const double> gt, double clamp) {
  check_lengths(pred, gt, "bce_mask");
  if (pred.empty()) return 0.0;
  double sum = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double p = std::clamp(pred[i], clamp, 1.0 - clamp);
    sum -= gt[i] * std::log(p) + (1.0 - gt[i]) * std::log(1.0 - p);
  }
  return sum / static_cast<double>(pred.size());
}

std::vector<double> bce_mask_grad(std::span<const double> pred, std::span<const double> gt, double clamp) {
  check_lengths(pred, gt, "bce_mask");
  std::vector<double> grad(pred.size(), 0.0);
  const double n = static_cast<double>(pred.size());
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (pred[i] < clamp || pred[i] > 1.0 - clamp) continue;  // flat outside the clamp
    grad[i] = (-gt[i] / pred[i] + (1.0 - gt[i]) / (1.0 - pred[i])) / n;
  }
  return grad;
}

double dice_mask(std::span<const double> pred, std::span<const double> gt, double eps) {
  check_lengths(pred, gt, "dice_mask");
  double inter = 0.0, sp = 0.0, sg = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    inter += pred[i] * gt[i];
    sp += pred[i];
    sg += gt[i];
  }
  return 1.0 - (2.0 * inter + eps) / (sp + sg + eps);
}

std::vector<double> dice_mask_grad(std::span<const double> pred, std::span<const double> gt, double eps) {
  check_lengths(pred, gt, "dice_mask");
  double inter = 0.0, sp = 0.0, sg = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    inter += pred[i] * gt[i];
    sp += pred[i];
    sg += gt[i];
  }
  const double num = 2.0 * inter + eps;
  const double den = sp + sg + eps;
  std::vector<double> grad(pred.size());
  for (std::size_t i = 0; i < pred.size(); ++i) grad[i] = -(2.0 * gt[i] * den - num) / (den * den);
  return grad;
}

double total_loss(const LossParts& parts, const LossWeights& weights) {
  return weights.cls * parts.cls + weights.bce * parts.bce + weights.dice * parts.dice;
}

Assignment match_predictions(const std::vector<std::vector<double>>& class_logits,
                             const std::vector<std::vector<double>>& pred_masks,
                             const std::vector<int>& target_classes,
                             const std::vector<std::vector<double>>& target_masks, const LossWeights& weights) {
  if (class_logits.size() != pred_masks.size() || target_classes.size() != target_masks.size()) {
    throw ArgumentError("match_predictions: prediction/target list sizes disagree");
  }
  Eigen::MatrixXd cost(static_cast<Eigen::Index>(pred_masks.size()), static_cast<Eigen::Index>(target_masks.size()));
  for (std::size_t i = 0; i < pred_masks.size(); ++i) {
    const auto prob = softmax(class_logits[i]);
    for (std::size_t j = 0; j < target_masks.size(); ++j) {
      const int cls = target_classes[j];
      if (cls < 0 || static_cast<std::size_t>(cls) >= prob.size()) {
        throw ArgumentError("match_predictions: target class out of range");
      }
      cost(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          weights.cls * -prob[cls] + weights.bce * bce_mask(pred_masks[i], target_masks[j]) +
          weights.dice * dice_mask(pred_masks[i], target_masks[j]);
    }
  }
  return hungarian(cost);
}

}  // namespace cadspot
