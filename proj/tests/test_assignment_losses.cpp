#include <doctest.h>

#include "cadspot/error.hpp"
#include "cadspot/losses.hpp"
#include "support.hpp"

using namespace cadspot;
using namespace cadspot::testing;

TEST_SUITE("assignment") {
  TEST_CASE("hungarian examples") {
    Eigen::MatrixXd one(1, 1);
    one << 0;
    Assignment a = hungarian(one);
    CHECK(a.pairs == std::vector<std::pair<int, int>>{{0, 0}});
    CHECK(a.cost == 0.0);

    Eigen::MatrixXd two(2, 2);
    two << 1, 2, 3, 0;
    a = hungarian(two);
    CHECK(a.pairs == std::vector<std::pair<int, int>>{{0, 0}, {1, 1}});
    CHECK(a.cost == 1.0);

    Eigen::MatrixXd three(3, 3);
    three << 4, 1, 3, 2, 0, 5, 3, 2, 2;
    CHECK(hungarian(three).cost == 5.0);

    CHECK(hungarian(Eigen::MatrixXd(0, 0)).pairs.empty());
    CHECK(hungarian(Eigen::MatrixXd(0, 3)).pairs.empty());
  }

  TEST_CASE("hungarian is optimal on random rectangles") {
    Rng rng(101);
    for (int trial = 0; trial < 1500; ++trial) {
      const int r = uniform_int(rng, 1, 6), c = uniform_int(rng, 1, 6);
      Eigen::MatrixXd m(r, c);
      const bool integer = trial % 2 == 0;
      for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = integer ? uniform_int(rng, -5, 9) : uniform(rng, -1, 1);
      const Assignment a = hungarian(m);
      REQUIRE(a.pairs.size() == static_cast<std::size_t>(std::min(r, c)));
      std::set<int> rows, cols;
      double total = 0.0;
      for (auto [i, j] : a.pairs) {
        rows.insert(i);
        cols.insert(j);
        total += m(i, j);
      }
      CHECK(rows.size() == a.pairs.size());
      CHECK(cols.size() == a.pairs.size());
      CHECK(std::is_sorted(a.pairs.begin(), a.pairs.end()));
      const double best = brute_force_assignment(m);
      if (integer) {
        CHECK(total == best);
        CHECK(a.cost == best);
      } else {
        CHECK(std::abs(total - best) < 1e-12);
      }
    }
  }

  TEST_CASE("hungarian ties are reproducible") {
    Eigen::MatrixXd flat = Eigen::MatrixXd::Ones(4, 4);
    const Assignment a = hungarian(flat);
    CHECK(a.pairs == hungarian(flat).pairs);
    CHECK(a.cost == 4.0);
  }

  TEST_CASE("mask iou") {
    const std::vector<int> a{1, 2, 3}, b{2, 3, 4}, c{7, 8};
    CHECK(mask_iou(a, a) == 1.0);
    CHECK(mask_iou(a, c) == 0.0);
    CHECK(mask_iou(a, b) == 0.5);
    CHECK_THROWS_AS(mask_iou(std::vector<int>{}, std::vector<int>{}), ArgumentError);
  }

  TEST_CASE("sparse iou matches the dense table") {
    Rng rng(103);
    for (int trial = 0; trial < 50; ++trial) {
      const auto pool = strip_pool(rng, 6, 12, 3, false);
      const SparseIoUMatrix sparse = build_sparse_iou(pool);
      const SparseIoUMatrix dense = build_dense_iou(pool);
      CHECK(sparse.row_ptr == dense.row_ptr);
      CHECK(sparse.cols == dense.cols);
      CHECK(sparse.values == dense.values);
      for (std::size_t i = 0; i < pool.size(); ++i) {
        for (std::size_t j = i + 1; j < pool.size(); ++j) {
          CHECK(sparse.at(static_cast<int>(i), static_cast<int>(j)) == mask_iou(pool[i].primitives, pool[j].primitives));
        }
      }
    }
  }

  TEST_CASE("sparse iou storage examples") {
    std::vector<ScoredMask> far{{{1, 2}, 0, 0.9, 0}, {{50, 51}, 0, 0.8, 5}};
    CHECK(build_sparse_iou(far).stored_pairs() == 0);
    std::vector<ScoredMask> dup{{{1, 2, 3}, 0, 0.9, 0}, {{1, 2, 3}, 0, 0.8, 1}};
    const SparseIoUMatrix m = build_sparse_iou(dup);
    CHECK(m.stored_pairs() == 1);
    CHECK(m.at(1, 0) == 1.0);
  }

  TEST_CASE("matrix nms examples") {
    std::vector<ScoredMask> same{{{1, 2, 3}, 4, 0.9, 0}, {{1, 2, 3}, 4, 0.8, 1}};
    NmsResult r = matrix_nms(same);
    CHECK(r.kept == std::vector<int>{0});
    CHECK(r.decayed[0] == 0.9);
    CHECK(r.decayed[1] == doctest::Approx(0.8 * std::exp(-2.0)).epsilon(1e-15));

    std::vector<ScoredMask> disjoint{{{1}, 4, 0.9, 0}, {{2}, 4, 0.8, 1}};
    r = matrix_nms(disjoint);
    CHECK(r.kept == std::vector<int>{0, 1});
    CHECK(r.scores == std::vector<double>{0.9, 0.8});

    std::vector<ScoredMask> classes{{{1, 2}, 4, 0.9, 0}, {{1, 2}, 5, 0.8, 1}};
    CHECK(matrix_nms(classes).kept.size() == 2);
    NmsParams agnostic;
    agnostic.class_aware = false;
    CHECK(matrix_nms(classes, agnostic).kept.size() == 1);

    NmsParams linear;
    linear.kernel = DecayKernel::Linear;
    std::vector<ScoredMask> half{{{1, 2}, 0, 0.9, 0}, {{2, 3}, 0, 0.9, 1}};
    r = matrix_nms(half, linear);
    CHECK(r.decayed[1] == doctest::Approx(0.9 * (1.0 - 1.0 / 3.0)));
  }

  TEST_CASE("matrix and sparse nms agree with the reference decay") {
    Rng rng(107);
    for (int trial = 0; trial < 200; ++trial) {
      const bool grid = trial % 2 == 0;
      const bool gaussian = trial % 3 != 0;
      const auto pool = strip_pool(rng, uniform_int(rng, 1, 8), uniform_int(rng, 1, 12), 3, grid);
      NmsParams params;
      params.kernel = gaussian ? DecayKernel::Gaussian : DecayKernel::Linear;
      const ReferenceNms ref = reference_nms(pool, params.sigma, gaussian, params.score_threshold);
      const NmsResult dense = matrix_nms(pool, params);
      const NmsResult sparse = sparse_nms(pool, build_sparse_iou(pool), params);
      CHECK(dense.kept == ref.kept);
      CHECK(sparse.kept == dense.kept);
      CHECK(sparse.decayed == dense.decayed);
      for (std::size_t i = 0; i < pool.size(); ++i) CHECK(std::abs(dense.decayed[i] - ref.decayed[i]) <= 1e-12);
    }
  }

  TEST_CASE("sparse nms rejects a foreign matrix") {
    std::vector<ScoredMask> pool{{{1}, 0, 0.9, 0}, {{1}, 0, 0.8, 0}};
    std::vector<ScoredMask> other{{{1}, 0, 0.9, 0}};
    CHECK_THROWS_AS(sparse_nms(pool, build_sparse_iou(other)), ArgumentError);
  }

  TEST_CASE("survivors keep surviving on a second pass over fixed points") {
    // Decay is soft, so repeated application lowers overlapping survivors; a pool
    // whose survivors are pairwise disjoint is a fixed point.
    Rng rng(109);
    for (int trial = 0; trial < 100; ++trial) {
      const auto pool = strip_pool(rng, 3, 8, 2, false);
      const NmsResult first = matrix_nms(pool);
      std::vector<ScoredMask> survivors;
      for (std::size_t k = 0; k < first.kept.size(); ++k) {
        ScoredMask m = pool[first.kept[k]];
        m.score = first.scores[k];
        survivors.push_back(m);
      }
      if (build_sparse_iou(survivors).stored_pairs() != 0) continue;
      const NmsResult second = matrix_nms(survivors);
      CHECK(second.kept.size() == survivors.size());
      for (std::size_t k = 0; k < survivors.size(); ++k) CHECK(second.decayed[k] == survivors[k].score);
    }
  }

  TEST_CASE("raising a survivor's score keeps it") {
    Rng rng(113);
    for (int trial = 0; trial < 200; ++trial) {
      auto pool = strip_pool(rng, 3, 8, 2, false);
      const NmsResult base = matrix_nms(pool);
      if (base.kept.empty()) continue;
      const int pick = base.kept[uniform_int(rng, 0, static_cast<int>(base.kept.size()) - 1)];
      pool[pick].score = std::min(1.0, pool[pick].score + uniform(rng, 0.0, 0.5));
      const NmsResult raised = matrix_nms(pool);
      CHECK(std::find(raised.kept.begin(), raised.kept.end(), pick) != raised.kept.end());
    }
  }

  TEST_CASE("sparse storage on the strip generator") {
    Rng rng(127);
    const auto pool = strip_pool(rng, 100, 100, 4, false);
    const SparseIoUMatrix m = build_sparse_iou(pool);
    CHECK(pool.size() == 10000);
    CHECK(static_cast<double>(m.stored_pairs()) < 0.05 * static_cast<double>(m.dense_pairs()));
  }
}

TEST_SUITE("losses") {
  namespace {
  double direct_ce(const std::vector<double>& z, int t) {
    double sum = 0.0;
    for (double v : z) sum += std::exp(v);
    return -(z[t] - std::log(sum));
  }
  double direct_bce(const std::vector<double>& p, const std::vector<double>& g) {
    double s = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double q = std::clamp(p[i], 1e-7, 1 - 1e-7);
      s += -(g[i] * std::log(q) + (1 - g[i]) * std::log(1 - q));
    }
    return s / static_cast<double>(p.size());
  }
  double direct_dice(const std::vector<double>& p, const std::vector<double>& g) {
    double pg = 0, ps = 0, gs = 0;
    for (std::size_t i = 0; i < p.size(); ++i) {
      pg += p[i] * g[i];
      ps += p[i];
      gs += g[i];
    }
    return 1.0 - (2 * pg + 1.0) / (ps + gs + 1.0);
  }
  template <typename F>
  std::vector<double> central_difference(F f, std::vector<double> x, double h) {
    std::vector<double> g(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double keep = x[i];
      x[i] = keep + h;
      const double up = f(x);
      x[i] = keep - h;
      const double down = f(x);
      x[i] = keep;
      g[i] = (up - down) / (2 * h);
    }
    return g;
  }
  void check_gradient(const std::vector<double>& analytic, const std::vector<double>& numeric) {
    REQUIRE(analytic.size() == numeric.size());
    for (std::size_t i = 0; i < analytic.size(); ++i) {
      CHECK(std::abs(analytic[i] - numeric[i]) <= 1e-5 * std::max(1.0, std::abs(numeric[i])));
    }
  }
  }  // namespace

  TEST_CASE("cross entropy examples") {
    const std::vector<double> zero{0.0, 0.0};
    CHECK(cross_entropy_cls(zero, 0) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
    const std::vector<double> hot{50.0, 0.0, 0.0};
    CHECK(cross_entropy_cls(hot, 0) < 1e-20);
    const std::vector<double> bad{0.0, std::nan("")};
    CHECK_THROWS_AS(cross_entropy_cls(bad, 0), ArgumentError);
    CHECK_THROWS_AS(cross_entropy_cls(zero, 2), ArgumentError);
    CHECK(cross_entropy_cls(zero, 1, 0.1) == doctest::Approx(0.1 * std::log(2.0)));
  }

  TEST_CASE("bce and dice examples") {
    const std::vector<double> mask{1, 0, 1, 1, 0};
    CHECK(bce_mask(mask, mask) <= 1e-6);
    const std::vector<double> half(5, 0.5);
    CHECK(bce_mask(half, mask) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
    const std::vector<double> ten(10, 1.0);
    CHECK(dice_mask(ten, ten) == 0.0);
    const std::vector<double> a{1, 0}, b{0, 1};
    CHECK(dice_mask(a, b) == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
    const std::vector<double> empty(4, 0.0);
    CHECK(dice_mask(empty, empty) == 0.0);
    CHECK_THROWS_AS(bce_mask(a, ten), ArgumentError);
    CHECK_THROWS_AS(dice_mask(a, ten), ArgumentError);
  }

  TEST_CASE("total loss") {
    CHECK(total_loss({1, 1, 1}) == 2.5);
    CHECK(total_loss({0, 0, 0}) == 0.0);
    Rng rng(131);
    for (int trial = 0; trial < 100; ++trial) {
      const LossParts p{uniform(rng, 0, 3), uniform(rng, 0, 3), uniform(rng, 0, 3)};
      const double s = uniform(rng, 0, 4);
      CHECK(total_loss({p.cls * s, p.bce, p.dice}) - total_loss({0, p.bce, p.dice}) ==
            doctest::Approx(s * (total_loss(p) - total_loss({0, p.bce, p.dice}))));
    }
  }

  TEST_CASE("losses match direct formulas and finite differences") {
    Rng rng(137);
    for (int trial = 0; trial < 200; ++trial) {
      const int k = uniform_int(rng, 2, 36);
      std::vector<double> z(k);
      for (double& v : z) v = uniform(rng, -8, 8);
      const int t = uniform_int(rng, 0, k - 1);
      CHECK(std::abs(cross_entropy_cls(z, t) - direct_ce(z, t)) < 1e-10);
      check_gradient(cross_entropy_cls_grad(z, t), central_difference([&](const auto& x) { return cross_entropy_cls(x, t); }, z, 1e-6));

      const int n = uniform_int(rng, 1, 40);
      std::vector<double> p(n), g(n);
      for (int i = 0; i < n; ++i) {
        p[i] = uniform(rng, 0.05, 0.95);
        g[i] = uniform_int(rng, 0, 1);
      }
      CHECK(std::abs(bce_mask(p, g) - direct_bce(p, g)) < 1e-10);
      CHECK(std::abs(dice_mask(p, g) - direct_dice(p, g)) < 1e-10);
      CHECK(bce_mask(p, g) >= 0.0);
      CHECK(dice_mask(p, g) >= 0.0);
      check_gradient(bce_mask_grad(p, g), central_difference([&](const auto& x) { return bce_mask(x, g); }, p, 1e-7));
      check_gradient(dice_mask_grad(p, g), central_difference([&](const auto& x) { return dice_mask(x, g); }, p, 1e-7));

      std::vector<int> perm(n);
      std::iota(perm.begin(), perm.end(), 0);
      std::shuffle(perm.begin(), perm.end(), rng);
      std::vector<double> pp(n), gp(n);
      for (int i = 0; i < n; ++i) {
        pp[i] = p[perm[i]];
        gp[i] = g[perm[i]];
      }
      CHECK(std::abs(dice_mask(pp, gp) - dice_mask(p, g)) < 1e-12);
    }
  }

  TEST_CASE("prediction matching uses the weighted cost") {
    // Prediction 1 fits target 0 and prediction 0 fits target 1.
    const std::vector<std::vector<double>> logits{{0.0, 5.0}, {5.0, 0.0}};
    const std::vector<std::vector<double>> masks{{0.1, 0.9}, {0.9, 0.1}};
    const Assignment a = match_predictions(logits, masks, {0, 1}, {{1, 0}, {0, 1}});
    CHECK(a.pairs == std::vector<std::pair<int, int>>{{0, 1}, {1, 0}});

    Rng rng(139);
    for (int trial = 0; trial < 100; ++trial) {
      const int np = uniform_int(rng, 1, 5), nt = uniform_int(rng, 1, 5), n = 6, k = 4;
      std::vector<std::vector<double>> lg(np, std::vector<double>(k)), pm(np, std::vector<double>(n)),
          tm(nt, std::vector<double>(n));
      std::vector<int> tc(nt);
      for (auto& row : lg) for (double& v : row) v = uniform(rng, -3, 3);
      for (auto& row : pm) for (double& v : row) v = uniform(rng, 0.05, 0.95);
      for (auto& row : tm) for (double& v : row) v = uniform_int(rng, 0, 1);
      for (int& c : tc) c = uniform_int(rng, 0, k - 1);
      Eigen::MatrixXd cost(np, nt);
      for (int i = 0; i < np; ++i) {
        double mx = *std::max_element(lg[i].begin(), lg[i].end()), sum = 0.0;
        for (double v : lg[i]) sum += std::exp(v - mx);
        for (int j = 0; j < nt; ++j) {
          const double prob = std::exp(lg[i][tc[j]] - mx) / sum;
          cost(i, j) = 0.5 * -prob + direct_bce(pm[i], tm[j]) + direct_dice(pm[i], tm[j]);
        }
      }
      const Assignment a2 = match_predictions(lg, pm, tc, tm);
      CHECK(std::abs(a2.cost - brute_force_assignment(cost)) < 1e-9);
    }
  }
}
