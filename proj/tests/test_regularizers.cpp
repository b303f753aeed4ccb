#include "dgd/regularizers.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace dgd;

namespace {

Point scalar_point(double v) { return Point::Constant(1, v); }

}  // namespace

TEST(Prox, SoftThresholdOfZero) {
  EXPECT_EQ(Regularizer::l1(1.0).prox(scalar_point(0.0), 1.0)(0), 0.0);
  EXPECT_DOUBLE_EQ(Regularizer::l1(1.0).prox(scalar_point(2.5), 1.0)(0), 1.5);
  EXPECT_DOUBLE_EQ(Regularizer::l1(1.0).prox(scalar_point(-2.5), 0.5)(0), -2.0);
}

TEST(Prox, HardThresholdAtSqrtTwo) {
  const auto r = Regularizer::l0(1.0);
  const double t = std::sqrt(2.0);
  EXPECT_EQ(r.prox_scalar(t, 1.0), 0.0);
  EXPECT_EQ(r.prox_scalar(-t, 1.0), 0.0);
  EXPECT_EQ(r.prox_scalar(std::nextafter(t, 2.0), 1.0), std::nextafter(t, 2.0));
  EXPECT_EQ(r.prox_scalar(std::nextafter(t, 0.0), 1.0), 0.0);
  EXPECT_EQ(r.prox_scalar(-1.5, 1.0), -1.5);
  // Brute force agrees away from the tie.
  for (double v : {-3.0, -1.2, 0.3, 1.41, 1.42, 2.0}) {
    const double u = r.prox_scalar(v, 1.0);
    EXPECT_LE(oracle::prox_objective(r.penalty(), u, v, 1.0),
              oracle::grid_prox_minimum(r.penalty(), v, 1.0) + 1e-12);
  }
}

TEST(Prox, PaperL0Rows) {
  std::mt19937_64 rng(1);
  const std::vector<Regularizer> regs(4, Regularizer::l0(0.5));
  const double alpha = 0.3;
  const auto x = oracle::random_matrix(rng, 4, 30, -1.0, 1.0);
  const auto out = stacked_prox(regs, x, alpha);
  const double t = std::sqrt(2.0 * alpha * 0.5);
  for (Eigen::Index i = 0; i < x.rows(); ++i)
    for (Eigen::Index j = 0; j < x.cols(); ++j)
      EXPECT_EQ(out(i, j), std::abs(x(i, j)) > t ? x(i, j) : 0.0);
}

TEST(Prox, ScadMatchesOracle) {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> v_dist(-5.0, 5.0);
  const auto r = Regularizer::scad(0.5, 3.7);
  for (double alpha : {0.1, 1.0}) {
    for (int s = 0; s < 200; ++s) {
      const double v = v_dist(rng);
      const double got = oracle::prox_objective(r.penalty(), r.prox_scalar(v, alpha), v, alpha);
      const double best = oracle::grid_prox_minimum(r.penalty(), v, alpha, 1e-4);
      EXPECT_NEAR(got, best, 1e-6) << "v=" << v << " alpha=" << alpha;
    }
  }
}

TEST(Prox, EveryKindBeatsTheGrid) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> v_dist(-5.0, 5.0);
  std::uniform_real_distribution<double> a_dist(0.01, 2.0);
  for (const auto& r : oracle::every_kind()) {
    for (int s = 0; s < 100; ++s) {
      const double v = v_dist(rng), alpha = a_dist(rng);
      const double u = r.prox_scalar(v, alpha);
      EXPECT_LE(oracle::prox_objective(r.penalty(), u, v, alpha),
                oracle::grid_prox_minimum(r.penalty(), v, alpha, 1e-3) + 1e-9)
          << r.kind() << " v=" << v << " alpha=" << alpha << " u=" << u;
    }
  }
}

TEST(Prox, LqClosedFormsAgreeWithRootFinder) {
  // q = 1/2 and 2/3 have closed forms; a q just off those values goes through
  // the root finder and should land on nearly the same point.
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> v_dist(-4.0, 4.0);
  for (double q : {0.5, 2.0 / 3.0}) {
    const auto exact = Regularizer::lq(0.7, q);
    const auto nearby = Regularizer::lq(0.7, q + 1e-9);
    for (int s = 0; s < 300; ++s) {
      const double v = v_dist(rng);
      const double a = exact.prox_scalar(v, 0.8), b = nearby.prox_scalar(v, 0.8);
      if ((a == 0.0) != (b == 0.0)) continue;  // within 1e-9 of the jump
      EXPECT_NEAR(a, b, 1e-6) << "q=" << q << " v=" << v;
    }
  }
}

TEST(Prox, LqLowerBoundProperty) {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> v_dist(-6.0, 6.0);
  std::uniform_real_distribution<double> a_dist(0.05, 2.0);
  for (double q : {0.1, 0.3, 0.5, 2.0 / 3.0, 0.9}) {
    for (int s = 0; s < 400; ++s) {
      const double v = v_dist(rng), alpha = a_dist(rng), lambda = 0.6;
      const double u = Regularizer::lq(lambda, q).prox_scalar(v, alpha);
      if (u == 0.0) continue;
      EXPECT_GE(std::abs(u), scalar::lq_lower_bound(alpha, lambda, q) * (1.0 - 1e-12))
          << "q=" << q << " v=" << v << " alpha=" << alpha;
    }
  }
}

TEST(Prox, ConvexKindsAreNonexpansive) {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> a_dist(0.05, 3.0);
  for (const auto& r : oracle::every_kind()) {
    if (!r.is_convex()) continue;
    for (int s = 0; s < 300; ++s) {
      const Point a = oracle::random_matrix(rng, 5, 1, -4.0, 4.0).col(0);
      const Point b = oracle::random_matrix(rng, 5, 1, -4.0, 4.0).col(0);
      const double alpha = a_dist(rng);
      EXPECT_LE((r.prox(a, alpha) - r.prox(b, alpha)).norm(), (a - b).norm() * (1 + 1e-14))
          << r.kind();
    }
  }
}

TEST(Regularizer, ConvexFlagIsHonest) {
  std::mt19937_64 rng(21);
  for (const auto& r : oracle::every_kind()) {
    if (!r.is_convex()) continue;
    for (int s = 0; s < 500; ++s) {
      const Point a = oracle::random_matrix(rng, 3, 1, -3.0, 3.0).col(0);
      const Point b = oracle::random_matrix(rng, 3, 1, -3.0, 3.0).col(0);
      const double ra = r.value(a), rb = r.value(b);
      if (!std::isfinite(ra) || !std::isfinite(rb)) continue;
      EXPECT_LE(r.value(0.5 * (a + b)), 0.5 * (ra + rb) + 1e-12) << r.kind();
    }
  }
  // And the nonconvex ones really are: one midpoint counterexample each.
  EXPECT_GT(Regularizer::l0(1.0).value(scalar_point(0.5)), 0.5 * (0.0 + 1.0) - 1e-12);
  EXPECT_FALSE(Regularizer::scad(1.0).is_convex());
  EXPECT_FALSE(Regularizer::mcp(1.0).is_convex());
  EXPECT_FALSE(Regularizer::lq(1.0, 0.5).is_convex());
}

TEST(Regularizer, SeparableKindsActComponentwise) {
  std::mt19937_64 rng(2);
  for (const auto& r : oracle::every_kind()) {
    if (!r.is_separable()) continue;
    const Point v = oracle::random_matrix(rng, 7, 1, -4.0, 4.0).col(0);
    const Point out = r.prox(v, 0.7);
    for (Eigen::Index j = 0; j < v.size(); ++j) EXPECT_EQ(out(j), r.prox_scalar(v(j), 0.7)) << r.kind();
  }
  EXPECT_FALSE(Regularizer::ball(1.0).is_separable());
}

TEST(Regularizer, Values) {
  Point v(3);
  v << 1.0, 0.0, -3.0;
  EXPECT_DOUBLE_EQ(Regularizer::l0(0.5).value(v), 1.0);
  EXPECT_DOUBLE_EQ(Regularizer::lq(1.0, 0.5).value(scalar_point(4.0)), 2.0);
  EXPECT_DOUBLE_EQ(Regularizer::lq(1.0, 0.0).value(v), 2.0);
  EXPECT_EQ(Regularizer::box(0.0, 1.0).value(scalar_point(2.0)), kInfinity);
  EXPECT_EQ(Regularizer::box(0.0, 1.0).value(scalar_point(0.5)), 0.0);
  EXPECT_EQ(Regularizer::ball(1.0).value(v), kInfinity);
  EXPECT_DOUBLE_EQ(Regularizer::l1(2.0).value(v), 8.0);
  EXPECT_EQ(Regularizer::zero().value(v), 0.0);
  for (double t : {-9.0, -1.0, 0.0, 0.3, 2.0, 7.0}) {
    for (const auto& r : oracle::every_kind())
      EXPECT_DOUBLE_EQ(r.value(scalar_point(t)), oracle::scalar_penalty(r.penalty(), t)) << r.kind();
  }
}

TEST(Regularizer, ZeroIsIdentity) {
  std::mt19937_64 rng(13);
  const auto r = Regularizer::zero();
  const Point v = oracle::random_matrix(rng, 6, 1).col(0);
  for (double alpha : {1e-8, 0.3, 1.0, 1e6}) EXPECT_EQ(r.prox(v, alpha), v);
}

TEST(Regularizer, BallProjection) {
  Point v(2);
  v << 3.0, 4.0;
  const Point u = Regularizer::ball(1.0).prox(v, 0.5);
  EXPECT_NEAR(u(0), 0.6, 1e-15);
  EXPECT_NEAR(u(1), 0.8, 1e-15);
  EXPECT_EQ(Regularizer::ball(10.0).prox(v, 0.5), v);
}

TEST(Regularizer, SubgradientBounds) {
  EXPECT_DOUBLE_EQ(*Regularizer::l1(0.5).subgradient_bound(16), 2.0);
  EXPECT_EQ(*Regularizer::zero().subgradient_bound(3), 0.0);
  EXPECT_FALSE(Regularizer::l0(0.5).subgradient_bound(3).has_value());
  EXPECT_FALSE(Regularizer::scad(0.5).subgradient_bound(3).has_value());
}

TEST(Regularizer, Errors) {
  EXPECT_THROW(Regularizer::l1(1.0).prox(scalar_point(1.0), 0.0), ValidationError);
  EXPECT_THROW(Regularizer::l0(1.0).prox(scalar_point(1.0), -1.0), ValidationError);
  EXPECT_THROW(Regularizer::lq(1.0, 1.0), ValidationError);
  EXPECT_THROW(Regularizer::lq(1.0, -0.1), ValidationError);
  EXPECT_THROW(Regularizer::scad(1.0, 2.0), ValidationError);
  EXPECT_THROW(Regularizer::mcp(1.0, 1.0), ValidationError);
  EXPECT_THROW(Regularizer::box(1.0, 0.0), ValidationError);
  EXPECT_THROW(Regularizer::ball(-1.0), ValidationError);
  EXPECT_THROW(Regularizer::l1(-1.0), ValidationError);
}

TEST(StackedProx, ZeroRegularizersAreIdentity) {
  std::mt19937_64 rng(3);
  const auto x = oracle::random_matrix(rng, 3, 4);
  EXPECT_EQ(stacked_prox(std::vector<Regularizer>(3, Regularizer::zero()), x, 0.2), x);
}

TEST(StackedProx, MixedRowsTransformIndependently) {
  std::mt19937_64 rng(5);
  const std::vector<Regularizer> regs{Regularizer::l1(0.4), Regularizer::l0(0.3), Regularizer::ball(0.5)};
  const auto x = oracle::random_matrix(rng, 3, 6, -2.0, 2.0);
  const auto out = stacked_prox(regs, x, 0.9);
  for (Eigen::Index i = 0; i < 3; ++i) {
    const Point row = regs[static_cast<std::size_t>(i)].prox(x.row(i).transpose(), 0.9);
    EXPECT_EQ(Point(out.row(i).transpose()), row);
  }
  double total = 0.0;
  for (Eigen::Index i = 0; i < 3; ++i)
    total += regs[static_cast<std::size_t>(i)].value(out.row(i).transpose());
  EXPECT_DOUBLE_EQ(stacked_regularizer_value(regs, out), total);
  EXPECT_THROW(stacked_prox(regs, oracle::random_matrix(rng, 2, 6), 0.9), ValidationError);
  EXPECT_THROW(stacked_regularizer_value(regs, oracle::random_matrix(rng, 4, 6)), ValidationError);
}
