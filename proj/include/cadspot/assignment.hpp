#pragma once

#include <Eigen/Core>
#include <cstddef>
#include <span>
#include <utility>
#include <vector>

namespace cadspot {

// ---------------------------------------------------------------------------
// Linear assignment

struct Assignment {
  std::vector<std::pair<int, int>> pairs;  // (row, col), sorted by row
  double cost = 0.0;
};

/// Minimum-cost assignment of min(R, C) pairs with the O(n^3) potentials
/// (Kuhn-Munkres / Jonker-Volgenant) formulation. Rectangular matrices are
/// solved on the transposed problem when R > C. Column scans take the first
/// strict minimum, so results are reproducible for equal costs. Costs must be finite.
Assignment hungarian(const Eigen::MatrixXd& cost);

// ---------------------------------------------------------------------------
// Mask overlap

/// Sorted, duplicate-free primitive ids.
using PrimitiveSet = std::vector<int>;

/// |a ∩ b| / |a ∪ b| for sorted sets. Throws ArgumentError when both are empty.
double mask_iou(std::span<const int> a, std::span<const int> b);

/// A binarized instance proposal in the drawing-wide primitive id space.
struct ScoredMask {
  PrimitiveSet primitives;
  int label = 0;
  double score = 0.0;
  int window = -1;  // provenance; -1 when not produced by a window
};

/// Upper-triangular IoU pairs (row < col, by proposal index) in compressed row
/// layout. Only pairs that share at least one primitive are stored.
struct SparseIoUMatrix {
  std::size_t size = 0;
  std::vector<std::size_t> row_ptr;  // size + 1
  std::vector<int> cols;
  std::vector<double> values;

  std::size_t stored_pairs() const { return cols.size(); }
  std::size_t dense_pairs() const { return size < 2 ? 0 : size * (size - 1) / 2; }
  /// Value for (i, j) in either order; 0 when not stored.
  double at(int i, int j) const;
};

/// Builds the sparse IoU structure through an inverted primitive -> proposal index,
/// so only proposals that actually share primitives are ever compared.
SparseIoUMatrix build_sparse_iou(std::span<const ScoredMask> masks);

/// Dense upper-triangular reference: every pair with nonzero IoU, same layout.
SparseIoUMatrix build_dense_iou(std::span<const ScoredMask> masks);

// ---------------------------------------------------------------------------
// Matrix NMS

enum class DecayKernel { Gaussian, Linear };

struct NmsParams {
  double sigma = 2.0;
  DecayKernel kernel = DecayKernel::Gaussian;
  double score_threshold = 0.5;
  bool class_aware = true;
};

struct NmsResult {
  std::vector<int> kept;         // surviving proposal indices, by (score desc, index asc)
  std::vector<double> scores;    // decayed scores of `kept`
  std::vector<double> decayed;   // decayed score of every input proposal, input order
};

/// Matrix NMS: every proposal is decayed by min_i f(iou_ij) / f(max_k iou_ki) over
/// higher-scored same-class proposals i, with f(x) = exp(-sigma x^2) (Gaussian)
/// or 1 - x (linear). Proposals whose decayed score falls below the threshold are dropped.
/// Evaluates the full pairwise matrix.
NmsResult matrix_nms(std::span<const ScoredMask> masks, const NmsParams& params = {});

/// Matrix NMS over the stored pairs of `iou` only. Produces the same survivors
/// and bitwise-identical decayed scores as matrix_nms.
NmsResult sparse_nms(std::span<const ScoredMask> masks, const SparseIoUMatrix& iou, const NmsParams& params = {});

}  // namespace cadspot
