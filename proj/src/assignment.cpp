#include "cadspot/assignment.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "cadspot/error.hpp"

namespace cadspot {

Assignment hungarian(const Eigen::MatrixXd& cost) {
  Assignment result;
  if (cost.rows() == 0 || cost.cols() == 0) return result;
  if (!cost.allFinite()) throw ArgumentError("hungarian: cost matrix contains non-finite entries");

  const bool transposed = cost.rows() > cost.cols();
  const Eigen::MatrixXd a = transposed ? Eigen::MatrixXd(cost.transpose()) : cost;
  const auto n = static_cast<std::size_t>(a.rows());
  const auto m = static_cast<std::size_t>(a.cols());
  constexpr double inf = std::numeric_limits<double>::infinity();

  // 1-based potentials; p[j] is the row matched to column j (0 = free).
  std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0);
  std::vector<std::size_t> p(m + 1, 0), way(m + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::vector<double> minv(m + 1, inf);
    std::vector<char> used(m + 1, 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = p[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= m; ++j) {
        if (used[j]) continue;
        const double cur = a(static_cast<Eigen::Index>(i0 - 1), static_cast<Eigen::Index>(j - 1)) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= m; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }

  for (std::size_t j = 1; j <= m; ++j) {
    if (p[j] == 0) continue;
    const int row = static_cast<int>(p[j] - 1);
    const int col = static_cast<int>(j - 1);
    result.pairs.emplace_back(transposed ? col : row, transposed ? row : col);
  }
  std::sort(result.pairs.begin(), result.pairs.end());
  for (auto [r, c] : result.pairs) result.cost += cost(r, c);
  return result;
}

double mask_iou(std::span<const int> a, std::span<const int> b) {
  if (a.empty() && b.empty()) throw ArgumentError("mask_iou: both masks are empty");
  std::size_t inter = 0;
  auto ia = a.begin();
  auto ib = b.begin();
  while (ia != a.end() && ib != b.end()) {
    if (*ia < *ib) {
      ++ia;
    } else if (*ib < *ia) {
      ++ib;
    } else {
      ++inter;
      ++ia;
      ++ib;
    }
  }
  const std::size_t uni = a.size() + b.size() - inter;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

double SparseIoUMatrix::at(int i, int j) const {
  if (i == j) return 0.0;
  if (i > j) std::swap(i, j);
  const auto begin = cols.begin() + static_cast<std::ptrdiff_t>(row_ptr[i]);
  const auto end = cols.begin() + static_cast<std::ptrdiff_t>(row_ptr[i + 1]);
  auto it = std::lower_bound(begin, end, j);
  if (it == end || *it != j) return 0.0;
  return values[static_cast<std::size_t>(it - cols.begin())];
}

namespace {

double iou_from_counts(std::size_t inter, std::size_t size_a, std::size_t size_b) {
  return static_cast<double>(inter) / static_cast<double>(size_a + size_b - inter);
}

}  // namespace

SparseIoUMatrix build_sparse_iou(std::span<const ScoredMask> masks) {
  SparseIoUMatrix out;
  out.size = masks.size();
  out.row_ptr.assign(masks.size() + 1, 0);
  int max_primitive = -1;
  for (const auto& m : masks) {
    if (!m.primitives.empty()) max_primitive = std::max(max_primitive, m.primitives.back());
  }
  // primitive -> proposals containing it, in ascending proposal order
  std::vector<std::vector<int>> holders(static_cast<std::size_t>(max_primitive + 1));
  for (std::size_t k = 0; k < masks.size(); ++k) {
    for (int pid : masks[k].primitives) holders[pid].push_back(static_cast<int>(k));
  }
  std::vector<std::size_t> inter(masks.size(), 0);
  std::vector<int> touched;
  for (std::size_t i = 0; i < masks.size(); ++i) {
    touched.clear();
    for (int pid : masks[i].primitives) {
      const auto& list = holders[pid];
      for (auto it = std::upper_bound(list.begin(), list.end(), static_cast<int>(i)); it != list.end(); ++it) {
        if (inter[*it]++ == 0) touched.push_back(*it);
      }
    }
    std::sort(touched.begin(), touched.end());
    for (int j : touched) {
      out.cols.push_back(j);
      out.values.push_back(iou_from_counts(inter[j], masks[i].primitives.size(), masks[j].primitives.size()));
      inter[j] = 0;
    }
    out.row_ptr[i + 1] = out.cols.size();
  }
  return out;
}

SparseIoUMatrix build_dense_iou(std::span<const ScoredMask> masks) {
  SparseIoUMatrix out;
  out.size = masks.size();
  out.row_ptr.assign(masks.size() + 1, 0);
  for (std::size_t i = 0; i < masks.size(); ++i) {
    for (std::size_t j = i + 1; j < masks.size(); ++j) {
      if (masks[i].primitives.empty() && masks[j].primitives.empty()) continue;
      const double iou = mask_iou(masks[i].primitives, masks[j].primitives);
      if (iou > 0.0) {
        out.cols.push_back(static_cast<int>(j));
        out.values.push_back(iou);
      }
    }
    out.row_ptr[i + 1] = out.cols.size();
  }
  return out;
}

namespace {

std::vector<int> score_order(std::span<const ScoredMask> masks) {
  std::vector<int> order(masks.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return masks[a].score > masks[b].score; });
  return order;
}

double kernel_value(DecayKernel kernel, double sigma, double iou) {
  return kernel == DecayKernel::Gaussian ? std::exp(-sigma * iou * iou) : 1.0 - iou;
}

// Ratio f(iou) / f(compensate) shared by the dense and sparse paths.
double decay_term(const NmsParams& params, double iou, double compensate) {
  const double num = kernel_value(params.kernel, params.sigma, iou);
  double den = kernel_value(params.kernel, params.sigma, compensate);
  if (params.kernel == DecayKernel::Linear) den = std::max(den, 1e-12);
  return num / den;
}

bool same_class(const NmsParams& params, const ScoredMask& a, const ScoredMask& b) {
  return !params.class_aware || a.label == b.label;
}

NmsResult finish(std::span<const ScoredMask> masks, const std::vector<int>& order,
                 const std::vector<double>& coefficient, const NmsParams& params) {
  NmsResult result;
  result.decayed.resize(masks.size());
  for (std::size_t i = 0; i < masks.size(); ++i) result.decayed[i] = masks[i].score * coefficient[i];
  for (int idx : order) {
    if (result.decayed[idx] >= params.score_threshold) {
      result.kept.push_back(idx);
      result.scores.push_back(result.decayed[idx]);
    }
  }
  return result;
}

}  // namespace

NmsResult matrix_nms(std::span<const ScoredMask> masks, const NmsParams& params) {
  const std::size_t n = masks.size();
  const std::vector<int> order = score_order(masks);
  // Upper-triangular (in score order) class-masked IoU, evaluated densely.
  std::vector<double> iou(n * n, 0.0);
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = a + 1; b < n; ++b) {
      const auto& ma = masks[order[a]];
      const auto& mb = masks[order[b]];
      if (!same_class(params, ma, mb)) continue;
      if (ma.primitives.empty() && mb.primitives.empty()) continue;
      iou[a * n + b] = mask_iou(ma.primitives, mb.primitives);
    }
  }
  std::vector<double> compensate(n, 0.0);
  for (std::size_t b = 0; b < n; ++b) {
    for (std::size_t a = 0; a < n; ++a) compensate[b] = std::max(compensate[b], iou[a * n + b]);
  }
  std::vector<double> coefficient(n, 1.0);
  for (std::size_t b = 0; b < n; ++b) {
    double lowest = std::numeric_limits<double>::infinity();
    for (std::size_t a = 0; a < n; ++a) lowest = std::min(lowest, decay_term(params, iou[a * n + b], compensate[a]));
    coefficient[order[b]] = lowest;
  }
  return finish(masks, order, coefficient, params);
}

NmsResult sparse_nms(std::span<const ScoredMask> masks, const SparseIoUMatrix& iou, const NmsParams& params) {
  const std::size_t n = masks.size();
  if (iou.size != n || iou.row_ptr.size() != n + 1) {
    throw ArgumentError("sparse_nms: IoU matrix built for " + std::to_string(iou.size) + " proposals, got " +
                        std::to_string(n));
  }
  const std::vector<int> order = score_order(masks);
  std::vector<std::size_t> rank(n);
  for (std::size_t r = 0; r < n; ++r) rank[order[r]] = r;

  // compensate[k]: largest IoU of k with a higher-ranked same-class proposal.
  std::vector<double> compensate(n, 0.0);
  auto for_each_pair = [&](auto&& fn) {
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t e = iou.row_ptr[i]; e < iou.row_ptr[i + 1]; ++e) {
        const auto j = static_cast<std::size_t>(iou.cols[e]);
        if (!same_class(params, masks[i], masks[j])) continue;
        const bool i_first = rank[i] < rank[j];
        fn(i_first ? i : j, i_first ? j : i, iou.values[e]);
      }
    }
  };
  for_each_pair([&](std::size_t, std::size_t lower, double value) {
    compensate[lower] = std::max(compensate[lower], value);
  });
  std::vector<double> coefficient(n, 1.0);
  for_each_pair([&](std::size_t higher, std::size_t lower, double value) {
    coefficient[lower] = std::min(coefficient[lower], decay_term(params, value, compensate[higher]));
  });
  return finish(masks, order, coefficient, params);
}

}  // namespace cadspot
