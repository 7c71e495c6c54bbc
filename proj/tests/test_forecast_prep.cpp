#include <gtest/gtest.h>

#include <random>

#include "boundsde/forecast_prep.hpp"
#include "test_support.hpp"

using namespace boundsde;

TEST(Threshold, ThreeBranches) {
  EXPECT_EQ(threshold_forecast(0.5, 0.07), 0.5);
  EXPECT_EQ(threshold_forecast(0.01, 0.07), 0.07);
  EXPECT_EQ(threshold_forecast(0.99, 0.07), 1.0 - 0.07);
  EXPECT_THROW(threshold_forecast(0.5, 0.0), ParameterError);
  EXPECT_THROW(threshold_forecast(0.5, 0.5), ParameterError);
}

TEST(Threshold, IdempotentAndMonotone) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-0.2, 1.2), e(0.001, 0.49);
  for (int k = 0; k < 2000; ++k) {
    const double eps = e(rng), a = u(rng), b = u(rng);
    const double ta = threshold_forecast(a, eps);
    EXPECT_EQ(threshold_forecast(ta, eps), ta);
    EXPECT_GE(ta, eps);
    EXPECT_LE(ta, 1.0 - eps);
    if (a <= b) {
      EXPECT_LE(ta, threshold_forecast(b, eps));
    }
  }
}

TEST(ThetaT, HandEvaluations) {
  EXPECT_EQ(theta_t({10.0, 0.3, 0.07}, 0.5, 0.0, 0.0), 10.0);
  EXPECT_DOUBLE_EQ(theta_t({10.0, 0.8, 0.07}, 0.5, 0.0, 0.0), 16.0);
  EXPECT_NEAR(theta_t({10.0, 0.3, 0.07}, 0.07, 0.0, 0.0), 3.0 / 0.07, 1e-12);
  EXPECT_NEAR(theta_t({10.0, 0.3, 0.07}, 0.07, 0.0, 0.0), 42.857, 1e-3);
}

TEST(ThetaT, UsesAbsoluteRateAndSubtractsBoundGrowth) {
  const ModelParams p{1.0, 0.5, 0.1};
  EXPECT_DOUBLE_EQ(theta_t(p, 0.25, -2.0, 0.0), (0.5 + 2.0) / 0.25);
  EXPECT_DOUBLE_EQ(theta_t(p, 0.25, 2.0, 3.0), (0.5 + 2.0) / 0.25 - 3.0);
}

TEST(ThetaT, RejectsRatioOutsideThresholdBand) {
  EXPECT_THROW(theta_t({10.0, 0.3, 0.07}, 0.05, 0.0, 0.0), ContractError);
  EXPECT_THROW(theta_t({10.0, 0.3, 0.07}, 0.95, 0.0, 0.0), ContractError);
}

TEST(ThetaT, NeverBelowBaseline) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> r(0.07, 0.93), rd(-50, 50), hh(-100, 100);
  const ModelParams p{20.0, 0.15, 0.07};
  for (int k = 0; k < 5000; ++k) EXPECT_GE(theta_t(p, r(rng), rd(rng), hh(rng)), p.theta0);
}

TEST(ForecastError, PerfectForecastGivesZeroError) {
  const DaySeries d = testsupport::make_day("2019-01-01", {0.2, 0.3, 0.4}, {0.2, 0.3, 0.4}, {0.8, 0.9, 1.0});
  const PreparedDay pd = forecast_error_series(d, {20.0, 0.15, 0.07});
  for (std::size_t i = 0; i < pd.size(); ++i) EXPECT_NEAR(pd.v[i], 0.0, 1e-15);
}

TEST(ForecastError, ProductionAtBoundWithClampedForecast) {
  const double eps = 0.07;
  const DaySeries d = testsupport::make_day("2019-01-01", {0.9, 0.9}, {0.9, 0.9}, {0.9, 0.9});
  const PreparedDay pd = forecast_error_series(d, {20.0, 0.15, eps});
  EXPECT_DOUBLE_EQ(pd.r[0], 1.0 - eps);
  EXPECT_DOUBLE_EQ(pd.v[0], 1.0 - (1.0 - eps));
}

TEST(ForecastError, MatchesElementwiseRecomputation) {
  const auto days = testsupport::synthetic_days(3, {20.0, 0.15, 0.07}, 11);
  for (const auto& d : days) {
    const PreparedDay pd = forecast_error_series(d, {20.0, 0.15, 0.07});
    ASSERT_EQ(pd.size(), d.size());
    for (std::size_t i = 0; i < d.size(); ++i) {
      const double ratio = d.p[i] / d.h[i];
      const double r = std::min(std::max(ratio, 0.07), 1.0 - 0.07);
      EXPECT_EQ(pd.r[i], r);
      EXPECT_EQ(pd.v[i], d.y[i] / d.h[i] - r);
      EXPECT_GE(pd.theta[i], 20.0);
      EXPECT_GE(pd.v[i], -pd.r[i] - 1e-15);
      EXPECT_LE(pd.v[i], 1.0 - pd.r[i] + 1e-15);
    }
  }
}

TEST(ForecastError, ZeroBoundInsideSupportIsInternalError) {
  const DaySeries d = testsupport::make_day("2019-01-01", {0.0, 0.0}, {0.0, 0.0}, {0.5, 0.0});
  EXPECT_THROW(forecast_error_series(d, {20.0, 0.15, 0.07}), ContractError);
}

TEST(Partition, AllInnerAndAllBoundary) {
  const DaySeries mid = testsupport::make_day("2019-01-01", {0.5, 0.5, 0.5}, {0.5, 0.5, 0.5}, {1.0, 1.0, 1.0});
  const DaySeries high = testsupport::make_day("2019-01-02", {0.5, 0.5, 0.5}, {0.99, 0.99, 0.99}, {1.0, 1.0, 1.0});
  const ModelParams p{20.0, 0.15, 0.07};
  const std::vector<DaySeries> source1{mid};
  const auto a = partition_inner_boundary(prepare_days(source1, p), 0.07);
  EXPECT_EQ(a.inner.size(), 2u);
  EXPECT_TRUE(a.boundary.empty());
  const std::vector<DaySeries> source2{high};
  const auto b = partition_inner_boundary(prepare_days(source2, p), 0.07);
  EXPECT_TRUE(b.inner.empty());
  EXPECT_EQ(b.boundary.size(), 2u);
  EXPECT_EQ(b.boundary_percent(), 100.0);
}

TEST(Partition, UsesLeftEndpointOfRawRatio) {
  const DaySeries d = testsupport::make_day("2019-01-01", {0.5, 0.5, 0.5}, {0.5, 0.02, 0.5}, {1.0, 1.0, 1.0});
  const std::vector<DaySeries> source3{d};
  const auto parts = partition_inner_boundary(prepare_days(source3, {20.0, 0.15, 0.07}), 0.07);
  ASSERT_EQ(parts.inner.size(), 1u);
  ASSERT_EQ(parts.boundary.size(), 1u);
  EXPECT_EQ(parts.inner[0].i, 1u);
  EXPECT_EQ(parts.boundary[0].i, 2u);
}

TEST(Partition, CoversEveryTransitionExactlyOnce) {
  const auto days = testsupport::synthetic_days(4, {20.0, 0.15, 0.07}, 2);
  const auto prepared = prepare_days(days, {20.0, 0.15, 0.07});
  const auto parts = partition_inner_boundary(prepared, 0.07);
  std::size_t total = 0;
  for (const auto& d : days) total += d.size() - 1;
  EXPECT_EQ(parts.inner.size() + parts.boundary.size(), total);
}

TEST(ConditionB, HoldsByConstruction) {
  const auto days = testsupport::synthetic_days(5, {20.0, 0.15, 0.07}, 9);
  for (const ModelParams p : {ModelParams{20.0, 0.15, 0.07}, ModelParams{5.0, 2.0, 0.02}, ModelParams{40.0, 0.05, 0.2}})
    for (const auto& d : days) EXPECT_TRUE(check_condition_B(p, forecast_error_series(d, p)).ok);
}

TEST(ConditionB, ReportsViolationsForHalvedRate) {
  const ModelParams p{10.0, 3.0, 0.07};
  const DaySeries d = testsupport::make_day("2019-01-01", {0.5, 0.5, 0.5}, {0.3, 0.4, 0.5}, {1.0, 1.0, 1.0});
  PreparedDay pd = forecast_error_series(d, p);
  std::fill(pd.theta.begin(), pd.theta.end(), p.theta0 / 2.0);
  const auto rep = check_condition_B(p, pd);
  EXPECT_FALSE(rep.ok);
  EXPECT_EQ(rep.violations.size(), 3u);
}

TEST(ConditionB, EmptyDayIsVacuous) {
  const ModelParams p{10.0, 3.0, 0.07};
  EXPECT_TRUE(check_condition_B(p, {}, {}, {}, {}).ok);
}

TEST(Transitions, RecordsCarryLeftEndpointCoefficients) {
  const DaySeries d = testsupport::make_day("2019-01-01", {0.4, 0.6, 0.5}, {0.3, 0.4, 0.5}, {1.0, 1.0, 1.0});
  const std::vector<DaySeries> source4{d};
  const auto pd = prepare_days(source4, {20.0, 0.15, 0.07});
  const auto ts = transitions(pd);
  ASSERT_EQ(ts.size(), 2u);
  EXPECT_EQ(ts[1].v_prev, pd[0].v[1]);
  EXPECT_EQ(ts[1].v_next, pd[0].v[2]);
  EXPECT_EQ(ts[1].theta, pd[0].theta[1]);
  EXPECT_EQ(ts[1].theta_plus_next, pd[0].theta_plus(2));
  EXPECT_EQ(ts[1].dt, d.dt);
}
