#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <exception>
#include <limits>
#include <mutex>
#include <numbers>
#include <random>
#include <span>
#include <string_view>
#include <thread>
#include <vector>

#include <boost/math/special_functions/erf.hpp>

namespace boundsde {

// ---------------------------------------------------------------------------
// Exactly rounded summation
// ---------------------------------------------------------------------------

/**
 * @brief Order-independent, exactly rounded floating-point accumulator.
 *
 * Shewchuk's nonoverlapping-partials algorithm: the returned value is the
 * exact sum of all added terms rounded once. Sums of a multiset therefore do
 * not depend on insertion order, and adding every term twice returns exactly
 * twice the value.
 */
class ExactAccumulator {
 public:
  void add(double x) {
    if (!std::isfinite(x)) {
      nonfinite_ += x;
      has_nonfinite_ = true;
      return;
    }
    std::size_t used = 0;
    for (double y : partials_) {
      if (std::fabs(x) < std::fabs(y)) std::swap(x, y);
      const double hi = x + y;
      const double lo = y - (hi - x);
      if (lo != 0.0) partials_[used++] = lo;
      x = hi;
    }
    partials_.resize(used);
    partials_.push_back(x);
  }

  void add(const ExactAccumulator& other) {
    for (double p : other.partials_) add(p);
    if (other.has_nonfinite_) {
      nonfinite_ += other.nonfinite_;
      has_nonfinite_ = true;
    }
  }

  double value() const {
    if (has_nonfinite_) return nonfinite_;
    std::size_t n = partials_.size();
    if (n == 0) return 0.0;
    double hi = partials_[--n];
    double lo = 0.0;
    while (n > 0) {
      const double x = hi;
      const double y = partials_[--n];
      hi = x + y;
      const double yr = hi - x;
      lo = y - yr;
      if (lo != 0.0) break;
    }
    // Round-half-even correction across the remaining partials.
    if (n > 0 && ((lo < 0.0 && partials_[n - 1] < 0.0) || (lo > 0.0 && partials_[n - 1] > 0.0))) {
      const double y = lo * 2.0;
      const double x = hi + y;
      if (y == x - hi) hi = x;
    }
    return hi;
  }

 private:
  std::vector<double> partials_;
  double nonfinite_ = 0.0;
  bool has_nonfinite_ = false;
};

inline double exact_sum(std::span<const double> values) {
  ExactAccumulator acc;
  for (double v : values) acc.add(v);
  return acc.value();
}

// ---------------------------------------------------------------------------
// Standard normal helpers
// ---------------------------------------------------------------------------

inline constexpr double kInvSqrt2Pi = 0.39894228040143267794;  // 1/sqrt(2 pi)
inline constexpr double kLogSqrt2Pi = 0.91893853320467274178;  // log(sqrt(2 pi))

inline double normal_pdf(double z) { return kInvSqrt2Pi * std::exp(-0.5 * z * z); }

inline double normal_pdf(double x, double mean, double sd) { return normal_pdf((x - mean) / sd) / sd; }

inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

/// Upper tail 1 - Phi(z) without cancellation.
inline double normal_sf(double z) { return 0.5 * std::erfc(z / std::numbers::sqrt2); }

/// log Phi(z), accurate far into both tails.
inline double log_normal_cdf(double z) {
  if (z > 0.0) return std::log1p(-normal_sf(z));
  if (z > -35.0) return std::log(normal_cdf(z));
  // Asymptotic Mills-ratio expansion; erfc underflows below about -37.
  const double z2 = z * z;
  const double series = 1.0 - 1.0 / z2 + 3.0 / (z2 * z2) - 15.0 / (z2 * z2 * z2);
  return -0.5 * z2 - std::log(-z) - kLogSqrt2Pi + std::log(series);
}

/// log(Phi(b) - Phi(a)) for a < b, stable when both endpoints sit in the same tail.
inline double log_normal_mass(double a, double b) {
  if (!(a < b)) return -std::numeric_limits<double>::infinity();
  if (a > 0.0) return log_normal_mass(-b, -a);
  const double la = log_normal_cdf(a);
  const double lb = log_normal_cdf(b);
  return lb + std::log(-std::expm1(la - lb));
}

/// Standard normal quantile.
inline double normal_quantile(double p) {
  if (p <= 0.0) return -std::numeric_limits<double>::infinity();
  if (p >= 1.0) return std::numeric_limits<double>::infinity();
  return -std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * p);
}

/// Quantile of the upper tail: returns z with 1 - Phi(z) = q.
inline double normal_sf_quantile(double q) {
  if (q <= 0.0) return std::numeric_limits<double>::infinity();
  if (q >= 1.0) return -std::numeric_limits<double>::infinity();
  return std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * q);
}

/// Reentrant log-gamma (glibc's lgamma writes the global signgam).
inline double log_gamma(double x) {
#if defined(__GLIBC__)
  int sign = 0;
  return ::lgamma_r(x, &sign);
#else
  return std::lgamma(x);
#endif
}

inline double log_beta_function(double a, double b) { return log_gamma(a) + log_gamma(b) - log_gamma(a + b); }

// ---------------------------------------------------------------------------
// Finite differences
// ---------------------------------------------------------------------------

/**
 * Derivative of a uniformly sampled series: central differences at interior
 * points, first-order one-sided differences at the two ends. A single sample
 * has derivative 0.
 */
inline std::vector<double> finite_difference(std::span<const double> values, double step) {
  const std::size_t n = values.size();
  std::vector<double> d(n, 0.0);
  if (n < 2) return d;
  d.front() = (values[1] - values[0]) / step;
  d.back() = (values[n - 1] - values[n - 2]) / step;
  for (std::size_t i = 1; i + 1 < n; ++i) d[i] = (values[i + 1] - values[i - 1]) / (2.0 * step);
  return d;
}

/// Linear interpolation on a sorted abscissa; holds the end values outside the range.
inline double interpolate_linear(std::span<const double> xs, std::span<const double> ys, double x) {
  if (xs.empty()) return 0.0;
  if (x <= xs.front()) return ys.front();
  if (x >= xs.back()) return ys.back();
  const auto it = std::upper_bound(xs.begin(), xs.end(), x);
  const std::size_t hi = static_cast<std::size_t>(it - xs.begin());
  const std::size_t lo = hi - 1;
  const double w = (x - xs[lo]) / (xs[hi] - xs[lo]);
  return ys[lo] + w * (ys[hi] - ys[lo]);
}

// ---------------------------------------------------------------------------
// Counter-based random streams
// ---------------------------------------------------------------------------

inline constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

inline constexpr std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001B3ULL;
  }
  return h;
}

/// Derives an independent stream key from a base seed and any number of counters.
template <class... Keys>
constexpr std::uint64_t stream_key(std::uint64_t seed, Keys... keys) {
  std::uint64_t h = splitmix64(seed);
  ((h = splitmix64(h ^ static_cast<std::uint64_t>(keys))), ...);
  return h;
}

/// Standard normal variates from one counter-derived stream.
class NormalStream {
 public:
  explicit NormalStream(std::uint64_t key) : engine_(key) {}
  double operator()() { return dist_(engine_); }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> dist_{0.0, 1.0};
};

// ---------------------------------------------------------------------------
// Work splitting
// ---------------------------------------------------------------------------

/// Runs fn(i) for i in [0, n) on up to `workers` threads. Results must be written per index.
template <class Fn>
void parallel_for(std::size_t n, unsigned workers, Fn&& fn) {
  workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(std::max<std::size_t>(n, 1))));
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(workers);
  std::exception_ptr failure;
  std::mutex failure_mutex;
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = w; i < n; i += workers) fn(i);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace boundsde
