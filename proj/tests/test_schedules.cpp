#include "dgd/schedules.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace dgd;

TEST(Fixed, RegimeFlags) {
  const double bound = 0.5 / 1288.0;
  EXPECT_EQ(StepSchedule::make_fixed(3e-4, bound).regime(), "safe");
  EXPECT_EQ(StepSchedule::make_fixed(bound, bound).regime(), "unsafe");
  const auto big = StepSchedule::make_fixed(1e-3, bound);
  EXPECT_FALSE(big.safe());
  EXPECT_EQ(big.at(0), 1e-3);
  EXPECT_EQ(big.at(123456), 1e-3);
  EXPECT_EQ(big.inverse_difference_bound(5), 0.0);
}

TEST(Fixed, RejectsNonpositive) {
  EXPECT_THROW(StepSchedule::make_fixed(0.0, 1.0), ValidationError);
  EXPECT_THROW(StepSchedule::make_fixed(-1e-3, 1.0), ValidationError);
  EXPECT_THROW(StepSchedule::make_fixed(std::nan(""), 1.0), ValidationError);
}

TEST(Decreasing, Formula) {
  const auto s = StepSchedule::make_decreasing(1.0, 1288.0);
  EXPECT_DOUBLE_EQ(s.at(0), 1.0 / 1288.0);
  EXPECT_NEAR(s.at(0), 7.7640e-4, 1e-8);
  EXPECT_DOUBLE_EQ(s.at(1), 1.0 / 2576.0);
  EXPECT_EQ(s.regime(), "decreasing");
  EXPECT_FALSE(s.is_fixed());

  const auto half = StepSchedule::make_decreasing(0.5, 7.0);
  EXPECT_DOUBLE_EQ(half.at(3) / half.at(0), 0.5);

  const auto scaled = StepSchedule::make_decreasing(0.5, 7.0, 3.0);
  EXPECT_DOUBLE_EQ(scaled.at(8), 3.0 / (7.0 * 3.0));
}

TEST(Decreasing, RejectsBadParameters) {
  EXPECT_THROW(StepSchedule::make_decreasing(0.0, 1.0), ValidationError);
  EXPECT_THROW(StepSchedule::make_decreasing(1.5, 1.0), ValidationError);
  EXPECT_THROW(StepSchedule::make_decreasing(0.5, 0.0), ValidationError);
  EXPECT_THROW(StepSchedule::make_decreasing(0.5, 1.0, 0.0), ValidationError);
  EXPECT_NO_THROW(StepSchedule::make_decreasing(1.0, 1.0));
}

TEST(Decreasing, PositiveAndNonincreasing) {
  for (double eps : {0.1, 0.5, 1.0}) {
    const auto s = StepSchedule::make_decreasing(eps, 3.0, 2.0);
    for (std::size_t k = 0; k < 5000; ++k) {
      EXPECT_GT(s.at(k), 0.0);
      EXPECT_LE(s.at(k + 1), s.at(k));
    }
  }
}

TEST(Decreasing, InverseDifferenceBound) {
  for (double c : {1.0, 3.0}) {
    for (double eps : {0.25, 0.5, 1.0}) {
      const auto s = StepSchedule::make_decreasing(eps, 1.0, c);
      for (std::size_t k = 0; k <= 10000; ++k) {
        const double diff = 1.0 / s.at(k + 1) - 1.0 / s.at(k);
        EXPECT_LE(diff, s.inverse_difference_bound(k) * (1.0 + 1e-12)) << "eps=" << eps << " k=" << k;
      }
    }
  }
}

TEST(Decreasing, PartialSumsFollowTheIntegralBound) {
  // sum_{k<=K} (k+1)^-eps lies between the integrals over [1, K+2] and [1, K+1] plus 1.
  const std::size_t K = 10000;
  for (double eps : {0.25, 0.5, 0.75}) {
    const auto s = StepSchedule::make_decreasing(eps, 1.0);
    double sum = 0.0;
    for (std::size_t k = 0; k <= K; ++k) sum += s.at(k);
    const double growth = std::pow(static_cast<double>(K + 1), 1.0 - eps) / (1.0 - eps);
    EXPECT_GT(sum / growth, 0.5);
    EXPECT_LT(sum / growth, 2.0);
  }
}

TEST(Decreasing, StepsVanishButSumDiverges) {
  for (double eps : {0.5, 1.0}) {
    const auto s = StepSchedule::make_decreasing(eps, 1.0);
    double sum = 0.0;
    std::size_t k = 0;
    while (sum < 12.0 && k < 10'000'000) sum += s.at(k++);
    EXPECT_GE(sum, 12.0) << "eps=" << eps;
    EXPECT_LT(s.at(1000000), 1e-2);
  }
}
