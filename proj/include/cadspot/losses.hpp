#pragma once

#include <Eigen/Core>
#include <span>
#include <vector>

#include "cadspot/assignment.hpp"

namespace cadspot {

struct LossWeights {
  double cls = 0.5;
  double bce = 1.0;
  double dice = 1.0;
};

struct LossParts {
  double cls = 0.0;
  double bce = 0.0;
  double dice = 0.0;
};

inline constexpr double kProbabilityClamp = 1e-7;
inline constexpr double kDiceSmoothing = 1.0;

/// -log softmax(logits)[target], evaluated with the max-shift log-sum-exp.
/// `class_weight` scales the term (e.g. a down-weighted no-object class).
double cross_entropy_cls(std::span<const double> logits, int target, double class_weight = 1.0);
/// d/dlogits of cross_entropy_cls.
std::vector<double> cross_entropy_cls_grad(std::span<const double> logits, int target, double class_weight = 1.0);

/// Mean binary cross-entropy of mask probabilities (clamped to [clamp, 1 - clamp]).
double bce_mask(std::span<const double> pred, std::span<const double> gt, double clamp = kProbabilityClamp);
std::vector<double> bce_mask_grad(std::span<const double> pred, std::span<const double> gt,
                                  double clamp = kProbabilityClamp);

/// 1 - (2 Σ p g + eps) / (Σ p + Σ g + eps).
double dice_mask(std::span<const double> pred, std::span<const double> gt, double eps = kDiceSmoothing);
std::vector<double> dice_mask_grad(std::span<const double> pred, std::span<const double> gt,
                                   double eps = kDiceSmoothing);

double total_loss(const LossParts& parts, const LossWeights& weights = {});

/// Training-time bipartite matching of predicted instances to targets.
/// Cost(i, j) = w.cls * (-prob_i[class_j]) + w.bce * bce(mask_i, gt_j) + w.dice * dice(mask_i, gt_j),
/// with class probabilities from softmax(class_logits_i). Returns (prediction, target) pairs.
Assignment match_predictions(const std::vector<std::vector<double>>& class_logits,
                             const std::vector<std::vector<double>>& pred_masks,
                             const std::vector<int>& target_classes,
                             const std::vector<std::vector<double>>& target_masks,
                             const LossWeights& weights = {});

}  // namespace cadspot
