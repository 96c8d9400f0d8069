#include <doctest.h>

#include <boost/math/quadrature/gauss.hpp>
#include <cmath>

#include "cadspot/error.hpp"
#include "cadspot/features.hpp"
#include "cadspot/sampler.hpp"
#include "support.hpp"

using namespace cadspot;
using namespace cadspot::testing;

namespace {

Primitive prim(Geometry g) { return Primitive{0, std::move(g)}; }

// Composite 20-point Gauss-Legendre on the speed of a parametric curve.
double gauss_length(const Primitive& p, int pieces = 64) {
  boost::math::quadrature::gauss<double, 20> gl;
  const double h = 1e-6;
  auto speed = [&](double t) {
    const double a = std::max(0.0, t - h), b = std::min(1.0, t + h);
    return distance(evaluate(p, b), evaluate(p, a)) / (b - a);
  };
  double total = 0.0;
  for (int i = 0; i < pieces; ++i) total += gl.integrate(speed, double(i) / pieces, double(i + 1) / pieces);
  return total;
}

// Closed-form elliptic-integral length of an elliptical arc.
double ellipse_length(const Ellipse& e) {
  const double a = std::max(e.rx, e.ry), b = std::min(e.rx, e.ry);
  const double k = std::sqrt(1.0 - (b * b) / (a * a));
  const double shift = e.rx >= e.ry ? kPi / 2 : 0.0;
  // speed = a sqrt(1 - k^2 sin^2(u)) with u = shift - t (rx >= ry) or u = t.
  if (e.rx >= e.ry) return a * (std::ellint_2(k, shift - e.start) - std::ellint_2(k, shift - e.start - e.sweep));
  return a * (std::ellint_2(k, e.start + e.sweep) - std::ellint_2(k, e.start));
}

}  // namespace

TEST_SUITE("sampler") {
  TEST_CASE("exact lengths") {
    CHECK(arc_length(prim(Segment{{0, 0}, {3, 4}})) == 5.0);
    CHECK(arc_length(prim(Circle{{1, 1}, 1.0})) == doctest::Approx(2 * kPi).epsilon(1e-15));
    CHECK(arc_length(prim(Arc{{0, 0}, 2.0, 0.3, 1.5})) == doctest::Approx(3.0).epsilon(1e-15));
    CHECK(arc_length(prim(Polyline{{{0, 0}, {3, 0}, {3, 4}}, true})) == doctest::Approx(12.0).epsilon(1e-15));
  }

  TEST_CASE("bezier lengths against quadrature and flattening") {
    // speed of this cubic is 3 - 6t(1 - t), so its length is exactly 2.
    const Primitive cubic = prim(CubicBezier{{Vec2{0, 0}, Vec2{0, 1}, Vec2{1, 1}, Vec2{1, 0}}});
    CHECK(std::abs(arc_length(cubic) - 2.0) < 1e-9);
    CHECK(std::abs(gauss_length(cubic) - 2.0) < 1e-9);
    CHECK(std::abs(flatten(cubic, 1e-4).length() - 2.0) < 1e-8);
    const Primitive quad = prim(QuadBezier{{Vec2{0, 0}, Vec2{1, 2}, Vec2{2, 0}}});
    CHECK(std::abs(arc_length(quad) - 2.957885715089195) < 1e-9);

    Rng rng(21);
    for (int i = 0; i < 200; ++i) {
      const auto kind = i % 2 ? PrimitiveKind::CubicBezier : PrimitiveKind::QuadBezier;
      const Primitive p = random_primitive(rng, kind);
      const double ref = gauss_length(p);
      CHECK(std::abs(arc_length(p) - ref) <= 1e-6 * ref);
    }
  }

  TEST_CASE("ellipse lengths against elliptic integrals") {
    const Primitive full = prim(Ellipse{{0, 0}, 3.0, 1.0, 0.4, 0.0, kTwoPi});
    CHECK(arc_length(full) == doctest::Approx(4 * 3.0 * std::comp_ellint_2(std::sqrt(1 - 1.0 / 9.0))).epsilon(1e-9));
    Rng rng(22);
    for (int i = 0; i < 200; ++i) {
      const Primitive p = random_primitive(rng, PrimitiveKind::Ellipse);
      const double ref = ellipse_length(std::get<Ellipse>(p.geometry));
      CHECK(std::abs(arc_length(p) - ref) <= 1e-6 * ref);
    }
  }

  TEST_CASE("segment and circle sample counts") {
    const auto seg = sample_primitive(prim(Segment{{0, 0}, {1.4, 0}}), 0.14);
    REQUIRE(seg.size() == 11);
    for (std::size_t i = 0; i < seg.size(); ++i) CHECK(std::abs(seg[i].x - 0.14 * i) < 1e-12);
    CHECK(seg.back() == Vec2{1.4, 0});

    const auto circle = sample_primitive(prim(Circle{{0, 0}, 1.0}), 0.14);
    REQUIRE(circle.size() == 45);
    const double arc = 0.14;
    for (std::size_t i = 0; i + 1 < circle.size(); ++i) {
      const double chord = distance(circle[i], circle[i + 1]);
      CHECK(std::abs(chord - 2 * std::sin(arc / 2)) < 1e-6);
    }
    CHECK(distance(circle.back(), circle.front()) < 2 * std::sin(arc / 2));
  }

  TEST_CASE("degenerate and invalid input") {
    const auto one = sample_primitive(prim(Segment{{2, 3}, {2, 3}}), 0.14);
    REQUIRE(one.size() == 1);
    CHECK(one[0] == Vec2{2, 3});
    CHECK(sample_primitive(prim(Segment{{0, 0}, {0.01, 0}}), 0.14).size() == 2);
    CHECK(sample_primitive(prim(Circle{{0, 0}, 0.01}), 0.14).size() == 3);
    CHECK_THROWS_AS(sample_primitive(prim(Segment{{0, 0}, {1, 0}}), 0.0), ArgumentError);
    CHECK_THROWS_AS(sample_primitive(prim(Segment{{0, 0}, {1, 0}}), -1.0), ArgumentError);
    CHECK_THROWS_AS(sample_drawing(Drawing{}, 0.14), ArgumentError);
  }

  TEST_CASE("drawing cloud bookkeeping") {
    Drawing d;
    d.add(Segment{{0, 0}, {1.4, 0}});
    d.add(Segment{{0, 1}, {1.4, 1}});
    const DensePointCloud c = sample_drawing(d, 0.14);
    CHECK(c.size() == 22);
    CHECK(c.per_primitive_count == std::vector<int>{11, 11});

    Rng rng(4);
    Drawing r;
    for (int i = 0; i < 70; ++i) r.add(random_primitive(rng, static_cast<PrimitiveKind>(i % 7)).geometry);
    const DensePointCloud rc = sample_drawing(r, 0.05);
    std::size_t total = 0;
    for (std::size_t i = 0; i < r.size(); ++i) {
      CHECK(rc.per_primitive_count[i] >= 1);
      CHECK(rc.offsets[i] == total);
      for (std::size_t k = 0; k < static_cast<std::size_t>(rc.per_primitive_count[i]); ++k) {
        CHECK(rc.owner[total + k] == static_cast<int>(i));
      }
      total += rc.per_primitive_count[i];
    }
    CHECK(total == rc.size());
    for (const Point3& p : rc.points) CHECK(p.z == 0.0);
  }

  TEST_CASE("interior spacing against the flattening oracle") {
    Rng rng(31);
    const double d = 0.14;
    for (int k = 0; k < kNumPrimitiveKinds; ++k) {
      for (int i = 0; i < 30; ++i) {
        const Primitive p = random_primitive(rng, static_cast<PrimitiveKind>(k));
        const auto samples = sample_primitive(p, d);
        const Flattened f = flatten(p, 1e-4);
        std::size_t cursor = 0;
        std::vector<double> at;
        for (const Vec2& s : samples) at.push_back(position_along(f, s, cursor));
        // The last gap of open primitives and the closing gap are allowed to be short.
        for (std::size_t j = 1; j + 1 < at.size(); ++j) CHECK(std::abs(at[j] - at[j - 1] - d) <= 0.01 * d);
      }
    }
  }

  TEST_CASE("rigid motions commute with sampling") {
    Rng rng(41);
    for (int k = 0; k < kNumPrimitiveKinds; ++k) {
      for (int i = 0; i < 30; ++i) {
        const Primitive p = random_primitive(rng, static_cast<PrimitiveKind>(k));
        const Affine2 m = Affine2::translate(uniform(rng, -50, 50), uniform(rng, -50, 50)) * Affine2::rotate(uniform(rng, -4, 4));
        const auto a = sample_primitive(transformed(p, m), 0.1);
        const auto b = sample_primitive(p, 0.1);
        REQUIRE(a.size() == b.size());
        if (const auto* c = std::get_if<Circle>(&p.geometry)) {
          // Circles carry no phase: samples start at angle 0 in either frame.
          const Vec2 center = m.apply(c->center);
          for (std::size_t j = 0; j < a.size(); ++j) {
            CHECK(std::abs(distance(a[j], center) - c->radius) < 1e-9);
            CHECK(std::abs(distance(a[j], a[(j + 1) % a.size()]) - distance(b[j], b[(j + 1) % b.size()])) < 1e-9);
          }
          continue;
        }
        for (std::size_t j = 0; j < a.size(); ++j) CHECK(distance(a[j], m.apply(b[j])) < 1e-9);
      }
    }
  }

  TEST_CASE("translations commute with sampling for every kind") {
    Rng rng(43);
    for (int k = 0; k < kNumPrimitiveKinds; ++k) {
      for (int i = 0; i < 30; ++i) {
        const Primitive p = random_primitive(rng, static_cast<PrimitiveKind>(k));
        const Affine2 m = Affine2::translate(uniform(rng, -50, 50), uniform(rng, -50, 50));
        const auto a = sample_primitive(transformed(p, m), 0.1);
        const auto b = sample_primitive(p, 0.1);
        REQUIRE(a.size() == b.size());
        for (std::size_t j = 0; j < a.size(); ++j) CHECK(distance(a[j], m.apply(b[j])) < 1e-9);
      }
    }
  }

  TEST_CASE("halving the interval about doubles the count") {
    Rng rng(51);
    for (int k = 0; k < kNumPrimitiveKinds; ++k) {
      for (int i = 0; i < 50; ++i) {
        const Primitive p = random_primitive(rng, static_cast<PrimitiveKind>(k));
        const double d = uniform(rng, 0.02, 0.3);
        const auto coarse = sample_primitive(p, d).size();
        const auto fine = sample_primitive(p, d / 2).size();
        CHECK(fine + 2 >= 2 * coarse);
      }
    }
  }
}

TEST_SUITE("features") {
  namespace {
  DensePointCloud cloud_of(const std::vector<int>& counts) {
    DensePointCloud c;
    c.offsets.push_back(0);
    for (std::size_t i = 0; i < counts.size(); ++i) {
      for (int k = 0; k < counts[i]; ++k) {
        c.points.push_back({0, 0, 0});
        c.owner.push_back(static_cast<int>(i));
      }
      c.per_primitive_count.push_back(counts[i]);
      c.offsets.push_back(c.points.size());
    }
    return c;
  }
  }  // namespace

  TEST_CASE("pooling examples") {
    FeatureMatrix single(1, 2);
    single << 0.2, -1.0;
    const FeatureMatrix s = mixed_pool(single, cloud_of({1}));
    CHECK(s(0, 0) == doctest::Approx(0.4));
    CHECK(s(0, 1) == doctest::Approx(-2.0));

    FeatureMatrix two(2, 2);
    two << 1, 3, 5, 1;
    const DensePointCloud c = cloud_of({2});
    const FeatureMatrix mixed = mixed_pool(two, c);
    CHECK(mixed(0, 0) == 8.0);
    CHECK(mixed(0, 1) == 5.0);
    const FeatureMatrix mx = pool_variant(two, c, PoolMode::Max);
    CHECK(mx(0, 0) == 5.0);
    CHECK(mx(0, 1) == 3.0);
    const FeatureMatrix avg = pool_variant(two, c, PoolMode::Average);
    CHECK(avg(0, 0) == 3.0);
    CHECK(avg(0, 1) == 2.0);

    const FeatureMatrix zero = FeatureMatrix::Zero(5, 3);
    CHECK(mixed_pool(zero, cloud_of({2, 3})).isZero(0.0));
  }

  TEST_CASE("pooling errors") {
    CHECK_THROWS_AS(mixed_pool(FeatureMatrix::Zero(3, 2), cloud_of({2})), ArgumentError);
    CHECK_THROWS_AS(mixed_pool(FeatureMatrix::Zero(2, 2), cloud_of({2, 0})), ArgumentError);
  }

  TEST_CASE("mixed equals max plus average, is permutation invariant and shifts by 2k") {
    Rng rng(61);
    for (int trial = 0; trial < 100; ++trial) {
      std::vector<int> counts;
      for (int i = 0; i < 6; ++i) counts.push_back(uniform_int(rng, 1, 7));
      const DensePointCloud c = cloud_of(counts);
      const int channels = uniform_int(rng, 1, 5);
      FeatureMatrix f(static_cast<Eigen::Index>(c.size()), channels);
      for (Eigen::Index i = 0; i < f.size(); ++i) f.data()[i] = uniform(rng, -3, 3);
      const FeatureMatrix mixed = mixed_pool(f, c);
      // Independent per-channel reduction.
      for (std::size_t p = 0; p < counts.size(); ++p) {
        for (int ch = 0; ch < channels; ++ch) {
          double mx = -1e300, sum = 0.0;
          for (std::size_t r = c.offsets[p]; r < c.offsets[p + 1]; ++r) {
            mx = std::max(mx, f(static_cast<Eigen::Index>(r), ch));
            sum += f(static_cast<Eigen::Index>(r), ch);
          }
          CHECK(std::abs(mixed(static_cast<Eigen::Index>(p), ch) - (mx + sum / counts[p])) < 1e-12);
        }
      }
      CHECK((mixed - (pool_variant(f, c, PoolMode::Max) + pool_variant(f, c, PoolMode::Average))).isZero(0.0));

      FeatureMatrix permuted = f;
      for (std::size_t p = 0; p < counts.size(); ++p) {
        std::vector<Eigen::Index> rows;
        for (std::size_t r = c.offsets[p]; r < c.offsets[p + 1]; ++r) rows.push_back(static_cast<Eigen::Index>(r));
        std::vector<Eigen::Index> shuffled = rows;
        std::shuffle(shuffled.begin(), shuffled.end(), rng);
        for (std::size_t j = 0; j < rows.size(); ++j) permuted.row(rows[j]) = f.row(shuffled[j]);
      }
      CHECK((mixed_pool(permuted, c) - mixed).cwiseAbs().maxCoeff() < 1e-12);
      CHECK(pool_variant(permuted, c, PoolMode::Max) == pool_variant(f, c, PoolMode::Max));

      const double k = uniform(rng, -2, 2);
      const FeatureMatrix shifted = mixed_pool((f.array() + k).matrix(), c);
      CHECK(((shifted - mixed).array() - 2 * k).abs().maxCoeff() < 1e-12);
    }
  }

  TEST_CASE("descriptor invariance") {
    Rng rng(71);
    for (int k = 0; k < kNumPrimitiveKinds; ++k) {
      for (int i = 0; i < 20; ++i) {
        const Primitive p = random_primitive(rng, static_cast<PrimitiveKind>(k));
        auto describe = [](const Primitive& q) {
          const auto s = sample_primitive(q, 0.05);
          std::vector<Point3> pts;
          for (const Vec2& v : s) pts.push_back({v.x, v.y, 0.0});
          return describe_primitive(q, pts);
        };
        const auto base = describe(p);
        REQUIRE(base.size() == static_cast<std::size_t>(kDescriptorSize));
        const auto moved = describe(transformed(p, Affine2::translate(uniform(rng, -9, 9), uniform(rng, -9, 9))));
        const auto turned = describe(transformed(p, Affine2::rotate(uniform(rng, -4, 4))));
        for (std::size_t j = 0; j < base.size(); ++j) {
          CHECK(std::abs(moved[j] - base[j]) < 1e-9);
          CHECK(std::abs(turned[j] - base[j]) < 1e-6);
        }
      }
    }
  }

  TEST_CASE("descriptor kind block separates equal-length shapes") {
    const Primitive seg = prim(Segment{{0, 0}, {kTwoPi, 0}});
    const Primitive circ = prim(Circle{{0, 0}, 1.0});
    auto describe = [](const Primitive& q) {
      std::vector<Point3> pts;
      for (const Vec2& v : sample_primitive(q, 0.1)) pts.push_back({v.x, v.y, 0.0});
      return describe_primitive(q, pts);
    };
    const auto a = describe(seg), b = describe(circ);
    bool differs = false;
    for (int j = 0; j < kNumPrimitiveKinds; ++j) differs |= a[j] != b[j];
    CHECK(differs);
    CHECK(a[kNumPrimitiveKinds] == doctest::Approx(b[kNumPrimitiveKinds]));
  }
}
