#include <gtest/gtest.h>

#include <atomic>
#include <cmath>
#include <algorithm>
#include <random>
#include <stdexcept>

#include "boundsde/numerics.hpp"

using namespace boundsde;

TEST(ExactSum, CancellingTerms) {
  const std::vector<double> xs{1e100, 1.0, -1e100, 1e-100};
  EXPECT_EQ(exact_sum(xs), 1.0 + 1e-100);
  const std::vector<double> ys{1.0, 1e-16, 1e-16};
  EXPECT_EQ(1.0 + 1e-16 + 1e-16, 1.0);
  EXPECT_EQ(exact_sum(ys), std::nextafter(1.0, 2.0));
}

TEST(ExactSum, OrderIndependent) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-1e6, 1e6);
  std::vector<double> xs(5000);
  for (double& x : xs) x = u(rng) * std::pow(10.0, static_cast<int>(rng() % 20) - 10);
  const double a = exact_sum(xs);
  std::shuffle(xs.begin(), xs.end(), rng);
  EXPECT_EQ(exact_sum(xs), a);
  std::reverse(xs.begin(), xs.end());
  EXPECT_EQ(exact_sum(xs), a);
}

TEST(ExactSum, MergingAccumulators) {
  ExactAccumulator a, b, all;
  for (int k = 1; k <= 100; ++k) {
    (k % 2 ? a : b).add(1.0 / k);
    all.add(1.0 / k);
  }
  a.add(b);
  EXPECT_EQ(a.value(), all.value());
}

TEST(Streams, KeysSeparateCounters) {
  EXPECT_EQ(stream_key(1, 2, 3), stream_key(1, 2, 3));
  EXPECT_NE(stream_key(1, 2, 3), stream_key(1, 3, 2));
  EXPECT_NE(stream_key(1, 2), stream_key(2, 2));
  NormalStream a(stream_key(4, 5)), b(stream_key(4, 5));
  for (int k = 0; k < 10; ++k) EXPECT_EQ(a(), b());
}

TEST(Streams, NormalMoments) {
  NormalStream s(stream_key(9));
  double sum = 0.0, sq = 0.0;
  const int n = 200000;
  for (int k = 0; k < n; ++k) {
    const double x = s();
    sum += x;
    sq += x * x;
  }
  EXPECT_NEAR(sum / n, 0.0, 4.0 / std::sqrt(n));
  EXPECT_NEAR(sq / n, 1.0, 4.0 * std::sqrt(2.0 / n));
}

TEST(ParallelFor, VisitsEveryIndexOnce) {
  std::vector<int> hits(1000, 0);
  parallel_for(hits.size(), 7, [&](std::size_t i) { ++hits[i]; });
  for (int h : hits) EXPECT_EQ(h, 1);
  parallel_for(0, 4, [](std::size_t) { FAIL(); });
}

TEST(ParallelFor, PropagatesExceptions) {
  EXPECT_THROW(parallel_for(50, 4, [](std::size_t i) {
                 if (i == 17) throw std::runtime_error("boom");
               }),
               std::runtime_error);
}

TEST(FiniteDifference, CentralInsideOneSidedAtEnds) {
  const std::vector<double> v{0.0, 1.0, 4.0, 9.0};
  const auto d = finite_difference(v, 0.5);
  EXPECT_DOUBLE_EQ(d[0], 2.0);
  EXPECT_DOUBLE_EQ(d[1], 4.0);
  EXPECT_DOUBLE_EQ(d[2], 8.0);
  EXPECT_DOUBLE_EQ(d[3], 10.0);
}

TEST(Interpolation, LinearAndHeldOutside) {
  const std::vector<double> xs{0.0, 1.0, 3.0}, ys{1.0, 3.0, -1.0};
  EXPECT_EQ(interpolate_linear(xs, ys, -1.0), 1.0);
  EXPECT_EQ(interpolate_linear(xs, ys, 0.5), 2.0);
  EXPECT_EQ(interpolate_linear(xs, ys, 2.0), 1.0);
  EXPECT_EQ(interpolate_linear(xs, ys, 5.0), -1.0);
}

TEST(NormalFunctions, TailsAndQuantiles) {
  EXPECT_NEAR(normal_cdf(1.959963984540054), 0.975, 1e-15);
  EXPECT_NEAR(normal_quantile(0.975), 1.959963984540054, 1e-12);
  EXPECT_NEAR(normal_sf_quantile(1e-20), 9.262340089798408, 1e-9);
  EXPECT_TRUE(std::isfinite(log_normal_mass(30.0, 31.0)));
  EXPECT_NEAR(log_normal_mass(-1.0, 1.0), std::log(0.6826894921370859), 1e-14);
  EXPECT_NEAR(log_beta_function(2.0, 3.0), std::log(1.0 / 12.0), 1e-14);
}
