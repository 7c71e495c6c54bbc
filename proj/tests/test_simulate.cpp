#include <gtest/gtest.h>

#include <cmath>

#include "boundsde/simulate.hpp"
#include "test_support.hpp"

using namespace boundsde;

namespace {

DaySeries wavy_day() {
  std::vector<double> y, p, h;
  for (int i = 0; i < 72; ++i) {
    p.push_back(0.5 + 0.1 * std::sin(i * 0.09));
    y.push_back(p.back());
    h.push_back(1.0);
  }
  return testsupport::make_day("2019-06-01", y, p, h);
}

}  // namespace

TEST(SimulateX, ConstantForecastWithoutNoiseIsFixed) {
  const DaySeries d = testsupport::make_day("2019-01-01", std::vector<double>(30, 0.4), std::vector<double>(30, 0.4),
                                            std::vector<double>(30, 0.9));
  PreparedDay pd = forecast_error_series(d, {20.0, 0.15, 0.07});
  pd.params.alpha = 0.0;
  const PathBundle b = simulate_x_paths(pd, 5, 1);
  for (const auto& path : b.x)
    for (double x : path) EXPECT_EQ(x, 0.4);
}

TEST(SimulateX, NoiselessPathTracksForecast) {
  const DaySeries d = wavy_day();
  PreparedDay pd = forecast_error_series(d, {20.0, 0.15, 0.07});
  pd.params.alpha = 0.0;
  const PathBundle b = simulate_x_paths(pd, 1, 1);
  for (std::size_t i = 0; i < d.size(); ++i) EXPECT_NEAR(b.x[0][i], d.p[i], 1e-12);
}

TEST(SimulateX, PathsStayBelowBound) {
  const auto days = testsupport::synthetic_days(4, {20.0, 0.3, 0.07}, 2);
  for (const auto& d : days) {
    const PreparedDay pd = forecast_error_series(d, {20.0, 0.3, 0.07});
    const PathBundle b = simulate_x_paths(pd, 200, 9);
    ASSERT_EQ(b.x.size(), 200u);
    for (const auto& path : b.x) {
      EXPECT_EQ(path[0], d.p[0]);
      for (std::size_t i = 0; i < path.size(); ++i) {
        EXPECT_GE(path[i], 0.0);
        EXPECT_LE(path[i], d.h[i]);
      }
    }
  }
}

TEST(SimulateX, MonteCarloMeanFollowsForecast) {
  const DaySeries d = wavy_day();
  const PreparedDay pd = forecast_error_series(d, {20.0, 0.05, 0.07});
  const PathBundle b = simulate_x_paths(pd, 10000, 31, 4);
  for (std::size_t i = 1; i < d.size(); ++i) {
    std::vector<double> col;
    for (const auto& path : b.x) col.push_back(path[i]);
    const double se = std::sqrt(testsupport::sample_variance(col) / static_cast<double>(col.size()));
    EXPECT_LT(std::fabs(testsupport::sample_mean(col) - d.p[i]), 4.0 * se) << "index " << i;
  }
}

TEST(SimulateX, DeterministicAndWorkerInvariant) {
  const auto days = testsupport::synthetic_days(1, {20.0, 0.15, 0.07}, 6);
  const PreparedDay pd = forecast_error_series(days[0], {20.0, 0.15, 0.07});
  const PathBundle a = simulate_x_paths(pd, 64, 77, 1);
  const PathBundle b = simulate_x_paths(pd, 64, 77, 8);
  EXPECT_EQ(a.x, b.x);
  EXPECT_NE(simulate_x_paths(pd, 64, 78).x, a.x);
}

TEST(SimulateV, VanishingNoiseKeepsProductionOnForecast) {
  const auto templates = synthetic_templates(3, testsupport::montevideo(), 228.8, 4);
  const auto days = simulate_v_days(templates, {20.0, 1e-20, 0.07}, 5);
  for (std::size_t j = 0; j < days.size(); ++j) {
    const PreparedDay pd = forecast_error_series(days[j], {20.0, 1e-20, 0.07});
    for (std::size_t i = 0; i < pd.size(); ++i) EXPECT_NEAR(pd.v[i], 0.0, 1e-6);
  }
}

TEST(SimulateV, StrongReversionPinsErrorNearZero) {
  const auto templates = synthetic_templates(3, testsupport::montevideo(), 228.8, 4);
  const ModelParams p{2000.0, 0.001, 0.07};
  const auto days = simulate_v_days(templates, p, 5);
  std::vector<double> vs;
  for (const auto& d : days) {
    const PreparedDay pd = forecast_error_series(d, p);
    vs.insert(vs.end(), pd.v.begin(), pd.v.end());
  }
  // stationary variance of the linear-noise OU with diffusion at most 2 a / 4
  const double bound = (2.0 * p.alpha_theta0() * 0.25) / (2.0 * p.theta0);
  EXPECT_LT(testsupport::sample_variance(vs), bound);
}

TEST(SimulateV, OutputHasIngestShape) {
  const auto templates = synthetic_templates(5, testsupport::montevideo(), 228.8, 8);
  const auto days = simulate_v_days(templates, {20.0, 0.15, 0.07}, 3);
  ASSERT_EQ(days.size(), templates.size());
  for (std::size_t j = 0; j < days.size(); ++j) {
    EXPECT_EQ(days[j].day_id, templates[j].day_id);
    EXPECT_EQ(days[j].p, templates[j].p);
    EXPECT_EQ(days[j].y.size(), templates[j].size());
    for (std::size_t i = 0; i < days[j].size(); ++i) {
      EXPECT_GE(days[j].y[i], 0.0);
      EXPECT_LE(days[j].y[i], days[j].h[i]);
      EXPECT_GT(days[j].h[i], 0.0);
    }
  }
  EXPECT_EQ(simulate_v_days(templates, {20.0, 0.15, 0.07}, 3)[2].y, days[2].y);
  EXPECT_THROW(simulate_v_days(templates, {20.0, 0.15, 0.07}, 3, 0), InputError);
}

TEST(Templates, ForecastBelowBoundOnSupport) {
  const auto templates = synthetic_templates(20, testsupport::montevideo(), 228.8, 1);
  EXPECT_EQ(templates.size(), 20u);
  for (const auto& d : templates) {
    EXPECT_GT(d.size(), 50u);
    for (std::size_t i = 0; i < d.size(); ++i) {
      EXPECT_GT(d.h[i], 0.0);
      EXPECT_LE(d.p[i], d.h[i]);
      EXPECT_GE(d.p[i], 0.0);
    }
  }
}
