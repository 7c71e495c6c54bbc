#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "boundsde/errors.hpp"
#include "boundsde/forecast_prep.hpp"
#include "boundsde/moments.hpp"
#include "boundsde/numerics.hpp"
#include "boundsde/surrogates.hpp"

namespace boundsde {

// ---------------------------------------------------------------------------
// Confidence bands
// ---------------------------------------------------------------------------

enum class BandMode {
  Marginal,     // moments chained from V = 0 at the first support point
  Conditional,  // one step ahead from each observed v
};

struct BandLevel {
  double level = 0.9;
  std::vector<double> v_lower, v_upper;
  std::vector<double> x_lower, x_upper;  // normalized production units
};

struct BandSeries {
  std::string day_id;
  std::vector<double> t;
  std::vector<double> mu;
  std::vector<double> sigma2;
  std::vector<BandLevel> levels;
  std::size_t infeasible_points = 0;  // surrogate could not match the moments; band spans the support
  std::size_t clipped_points = 0;     // X band clipped into [0, h]
};

/// Quantile at one grid point; a degenerate variance collapses the band to the mean.
inline double band_quantile(double q, SurrogateKind kind, double mu, double sigma2_raw, double epsilon, bool& infeasible) {
  if (sigma2_raw <= kVarianceFloor) return mu;
  if (!surrogate_feasible(kind, mu, sigma2_raw, epsilon)) {
    infeasible = true;
    return q < 0.5 ? -1.0 + epsilon : 1.0 - epsilon;
  }
  return surrogate_quantile(q, kind, mu, sigma2_raw, epsilon);
}

/**
 * Per-time surrogate quantiles from the propagated moment equations; the X
 * band is h (q + r). Levels are central coverages such as 0.5, 0.9, 0.99.
 */
inline BandSeries confidence_bands(const PreparedDay& day, SurrogateKind kind, const std::vector<double>& levels,
                                   BandMode mode = BandMode::Marginal) {
  for (double l : levels)
    if (!(l > 0.0 && l < 1.0)) throw InputError("band levels must lie in (0, 1)");
  const DaySeries& d = *day.day;
  const std::size_t n = day.size();
  const double eps = day.params.epsilon;
  BandSeries b;
  b.day_id = d.day_id;
  b.t = d.t;
  b.mu.resize(n);
  b.sigma2.resize(n);
  for (double l : levels) {
    BandLevel bl;
    bl.level = l;
    bl.v_lower.resize(n);
    bl.v_upper.resize(n);
    bl.x_lower.resize(n);
    bl.x_upper.resize(n);
    b.levels.push_back(std::move(bl));
  }

  MomentPair m = MomentPair::point(0.0);
  for (std::size_t i = 0; i < n; ++i) {
    if (i > 0) {
      const StepCoefficients c{day.theta_plus(i - 1), day.theta_plus(i), day.r[i - 1], day.r[i],
                               day.params.alpha_theta0(), d.dt, 4, true};
      const MomentPair start = mode == BandMode::Marginal ? m : MomentPair::point(day.v[i - 1]);
      m = v_moment_step(start, c);
    }
    b.mu[i] = m.mu();
    b.sigma2[i] = std::max(m.sigma2_raw(), 0.0);
    bool infeasible = false;
    bool clipped = false;
    for (auto& bl : b.levels) {
      const double lo = band_quantile(0.5 * (1.0 - bl.level), kind, b.mu[i], b.sigma2[i], eps, infeasible);
      const double hi = band_quantile(0.5 * (1.0 + bl.level), kind, b.mu[i], b.sigma2[i], eps, infeasible);
      bl.v_lower[i] = lo;
      bl.v_upper[i] = hi;
      const double xl = d.h[i] * (lo + day.r[i]);
      const double xu = d.h[i] * (hi + day.r[i]);
      bl.x_lower[i] = std::clamp(xl, 0.0, d.h[i]);
      bl.x_upper[i] = std::clamp(xu, 0.0, d.h[i]);
      clipped = clipped || bl.x_lower[i] != xl || bl.x_upper[i] != xu;
    }
    if (infeasible) ++b.infeasible_points;
    if (clipped) ++b.clipped_points;
  }
  return b;
}

// ---------------------------------------------------------------------------
// Mean absolute errors
// ---------------------------------------------------------------------------

struct MaeCurve {
  std::vector<double> t;          // clock time, days since midnight
  std::vector<double> mae;
  std::vector<std::size_t> count; // days contributing at each time
};

/**
 * Mean of |v| across days at each clock time. Days cover different daylight
 * windows, so each time is averaged over the days that contain it.
 */
inline MaeCurve mae_10min(const std::vector<PreparedDay>& days) {
  std::map<long long, std::pair<ExactAccumulator, std::size_t>> by_minute;
  std::map<long long, double> time_of;
  for (const auto& d : days) {
    for (std::size_t i = 0; i < d.size(); ++i) {
      const long long key = std::llround(d.day->t[i] * 1440.0 * 60.0);  // seconds
      auto& slot = by_minute[key];
      slot.first.add(std::fabs(d.v[i]));
      ++slot.second;
      time_of[key] = d.day->t[i];
    }
  }
  MaeCurve c;
  for (auto& [key, slot] : by_minute) {
    c.t.push_back(time_of[key]);
    c.mae.push_back(slot.first.value() / static_cast<double>(slot.second));
    c.count.push_back(slot.second);
  }
  return c;
}

inline std::vector<double> mae_daily(const std::vector<PreparedDay>& days) {
  std::vector<double> out;
  out.reserve(days.size());
  for (const auto& d : days) {
    ExactAccumulator acc;
    for (double v : d.v) acc.add(std::fabs(v));
    out.push_back(d.size() > 0 ? acc.value() / static_cast<double>(d.size()) : 0.0);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Kernel density of forecast-error transitions
// ---------------------------------------------------------------------------

enum class PowerBand { All, Low, Mid, High };

inline PowerBand parse_power_band(std::string_view s) {
  if (s == "all") return PowerBand::All;
  if (s == "low") return PowerBand::Low;
  if (s == "mid") return PowerBand::Mid;
  if (s == "high") return PowerBand::High;
  throw InputError("unknown power band '" + std::string(s) + "' (expected all, low, mid or high)");
}

inline std::string to_string(PowerBand b) {
  switch (b) {
    case PowerBand::All: return "all";
    case PowerBand::Low: return "low";
    case PowerBand::Mid: return "mid";
    case PowerBand::High: return "high";
  }
  return "all";
}

/// Low [0, 0.3), mid [0.3, 0.6), high [0.6, 1], on normalized production.
inline bool in_power_band(double y, PowerBand band) {
  switch (band) {
    case PowerBand::All: return true;
    case PowerBand::Low: return y < 0.3;
    case PowerBand::Mid: return y >= 0.3 && y < 0.6;
    case PowerBand::High: return y >= 0.6;
  }
  return false;
}

/// Forecast-error transitions v_i - v_{i-1}, selected by production at the left endpoint.
inline std::vector<double> error_transitions(const std::vector<PreparedDay>& days, PowerBand band) {
  std::vector<double> out;
  for (const auto& d : days)
    for (std::size_t i = 1; i < d.size(); ++i)
      if (in_power_band(d.day->y[i - 1], band)) out.push_back(d.v[i] - d.v[i - 1]);
  return out;
}

struct KdeCurve {
  std::vector<double> x;
  std::vector<double> density;
  double bandwidth = 0.0;
  std::size_t n = 0;
};

/// Gaussian KDE with Scott's bandwidth sigma_hat n^{-1/5}, on a uniform grid spanning the data +/- 5 h.
inline KdeCurve gaussian_kde(const std::vector<double>& values, std::size_t grid_points = 512) {
  if (values.size() < 2) throw DataError("kernel density needs at least 2 points");
  if (grid_points < 2) throw InputError("grid needs at least 2 points");
  const double n = static_cast<double>(values.size());
  ExactAccumulator s;
  for (double v : values) s.add(v);
  const double mean = s.value() / n;
  ExactAccumulator ss;
  for (double v : values) ss.add((v - mean) * (v - mean));
  const double sd = std::sqrt(ss.value() / (n - 1.0));
  const auto [mn, mx] = std::minmax_element(values.begin(), values.end());
  KdeCurve c;
  c.n = values.size();
  c.bandwidth = sd > 0.0 ? sd * std::pow(n, -0.2) : 1e-3 * std::max(1.0, std::fabs(mean));
  const double lo = *mn - 5.0 * c.bandwidth, hi = *mx + 5.0 * c.bandwidth;
  c.x.resize(grid_points);
  c.density.resize(grid_points);
  for (std::size_t g = 0; g < grid_points; ++g) {
    const double x = lo + (hi - lo) * static_cast<double>(g) / static_cast<double>(grid_points - 1);
    ExactAccumulator acc;
    for (double v : values) acc.add(normal_pdf((x - v) / c.bandwidth));
    c.x[g] = x;
    c.density[g] = acc.value() / (n * c.bandwidth);
  }
  return c;
}

inline KdeCurve error_transition_kde(const std::vector<PreparedDay>& days, PowerBand band, std::size_t grid_points = 512) {
  return gaussian_kde(error_transitions(days, band), grid_points);
}

}  // namespace boundsde
