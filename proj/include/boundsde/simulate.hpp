#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "boundsde/errors.hpp"
#include "boundsde/forecast_prep.hpp"
#include "boundsde/ingest.hpp"
#include "boundsde/numerics.hpp"
#include "boundsde/solar_clearsky.hpp"

namespace boundsde {

/// Simulated normalized production paths of one day; x[path][i] on the day grid.
struct PathBundle {
  std::string day_id;
  std::size_t n_paths = 0;
  std::uint64_t seed = 0;
  std::vector<double> t;
  std::vector<std::vector<double>> x;
};

inline std::uint64_t path_key(std::uint64_t seed, const std::string& day_id, std::size_t path) {
  return stream_key(seed, fnv1a64(day_id), 0x58ULL, static_cast<std::uint64_t>(path));
}

/**
 * Projected Euler scheme for the normalized production X:
 *   X <- clamp(X, 0, h_i)
 *   X <- X + (p_dot_i - theta_i (X - p_i)) dt + sqrt(2 alpha theta0 X (h_i - X)) dW
 *   X <- clamp(X, 0, h_{i+1})
 * starting from X_0 = p_0. p_dot_i is the forward difference (p_{i+1} - p_i)/dt,
 * so that E[X_i] = p_i whenever the clamps are inactive.
 */
inline PathBundle simulate_x_paths(const PreparedDay& day, std::size_t n_paths, std::uint64_t seed, unsigned workers = 1) {
  const DaySeries& d = *day.day;
  const std::size_t n = d.size();
  PathBundle b;
  b.day_id = d.day_id;
  b.n_paths = n_paths;
  b.seed = seed;
  b.t = d.t;
  b.x.assign(n_paths, std::vector<double>(n, 0.0));
  if (n == 0) return b;
  const double dt = d.dt;
  const double sqrt_dt = std::sqrt(dt);
  const double a = day.params.alpha_theta0();
  std::vector<double> p_fwd(n, 0.0);
  for (std::size_t i = 0; i + 1 < n; ++i) p_fwd[i] = (d.p[i + 1] - d.p[i]) / dt;

  parallel_for(n_paths, workers, [&](std::size_t path) {
    NormalStream normal(path_key(seed, d.day_id, path));
    auto& x = b.x[path];
    double cur = d.p[0];
    x[0] = std::clamp(cur, 0.0, d.h[0]);
    for (std::size_t i = 0; i + 1 < n; ++i) {
      cur = std::clamp(cur, 0.0, d.h[i]);
      const double diffusion = std::sqrt(std::max(2.0 * a * cur * (d.h[i] - cur), 0.0));
      cur += (p_fwd[i] - day.theta[i] * (cur - d.p[i])) * dt + diffusion * sqrt_dt * normal();
      cur = std::clamp(cur, 0.0, d.h[i + 1]);
      x[i + 1] = cur;
    }
  });
  return b;
}

/**
 * Synthetic days whose production follows the error model exactly: V starts
 * at 0, takes Euler substeps (at least `substeps` per interval, more when
 * theta_plus dt is large) with r and theta_plus linear inside each interval,
 * is projected into [-r, 1 - r], and y = h (V + r).
 */
inline std::vector<DaySeries> simulate_v_days(const std::vector<DaySeries>& templates, const ModelParams& params,
                                              std::uint64_t seed, int substeps = 10) {
  params.validate();
  if (substeps < 1) throw InputError("substeps must be >= 1");
  std::vector<DaySeries> out;
  out.reserve(templates.size());
  const double a = params.alpha_theta0();
  for (const auto& tmpl : templates) {
    DaySeries d = tmpl;
    const PreparedDay prep = forecast_error_series(tmpl, params);
    const std::size_t n = d.size();
    NormalStream normal(stream_key(seed, fnv1a64(d.day_id), 0x56ULL));
    double v = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (i > 0) {
        const double tp0 = prep.theta_plus(i - 1), tp1 = prep.theta_plus(i);
        const double r0 = prep.r[i - 1], r1 = prep.r[i];
        const double rate = std::max(std::fabs(tp0), std::fabs(tp1)) + a;
        const int k = std::max(substeps, static_cast<int>(std::ceil(rate * d.dt / 0.05)));
        const double h = d.dt / k, sqrt_h = std::sqrt(h);
        for (int s = 0; s < k; ++s) {
          const double f = static_cast<double>(s) / k;
          const double tp = tp0 + f * (tp1 - tp0);
          const double r = r0 + f * (r1 - r0);
          const double x = v + r;
          const double diffusion = std::sqrt(std::max(2.0 * a * x * (1.0 - x), 0.0));
          v += -tp * v * h + diffusion * sqrt_h * normal();
          const double r_after = r0 + (f + 1.0 / k) * (r1 - r0);
          v = std::clamp(v, -r_after, 1.0 - r_after);
        }
      }
      d.y[i] = std::clamp(d.h[i] * (v + prep.r[i]), 0.0, d.h[i]);
    }
    out.push_back(std::move(d));
  }
  return out;
}

struct TemplateOptions {
  int year = 2019;
  double grid_minutes = 10.0;
  double clear_fraction = 0.08;
  double overcast_fraction = 0.05;
  double clear_level = 0.97;
  double overcast_level = 0.03;
  double level_low = 0.2;
  double level_high = 0.8;
  double knot_noise = 0.15;
};

/**
 * Forecast templates on the clear-sky support: hourly forecast-to-bound ratios
 * (a few near-clear and near-overcast days, the rest around a random level),
 * linearly interpolated onto the grid. y is set equal to p.
 */
inline std::vector<DaySeries> synthetic_templates(std::size_t n_days, const solar::SolarSite& site, double capacity_mw,
                                                  std::uint64_t seed, const TemplateOptions& opt = {}) {
  if (n_days == 0) return {};
  if (!(capacity_mw > 0.0)) throw InputError("capacity must be positive");
  std::vector<int> day_numbers;
  for (std::size_t k = 0; k < n_days; ++k)
    day_numbers.push_back(1 + static_cast<int>((k * 365) / n_days));
  solar::SolarSite s = site;
  s.panel_area_m2 = solar::calibrate_k(capacity_mw, site, day_numbers, opt.grid_minutes);

  std::mt19937_64 rng(splitmix64(seed));
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const std::int64_t jan1 = days_from_date(opt.year, 1, 1);

  std::vector<DaySeries> out;
  for (int dn : day_numbers) {
    const solar::BoundSeries b = solar::upper_bound_series(s, dn, opt.grid_minutes);
    if (!b.has_support()) continue;
    const double u = unif(rng);
    double level;
    double noise;
    if (u < opt.clear_fraction) {
      level = opt.clear_level;
      noise = 0.01;
    } else if (u < opt.clear_fraction + opt.overcast_fraction) {
      level = opt.overcast_level;
      noise = 0.01;
    } else {
      level = opt.level_low + (opt.level_high - opt.level_low) * unif(rng);
      noise = opt.knot_noise;
    }
    std::vector<double> knot_t, knot_r;
    for (int hour = 0; hour <= 24; ++hour) {
      knot_t.push_back(hour / 24.0);
      knot_r.push_back(std::clamp(level + noise * gauss(rng), 0.005, 0.995));
    }

    DaySeries d;
    d.day_id = format_date(jan1 + dn - 1);
    d.day_number = dn;
    d.dt = b.step_days();
    for (std::size_t i = b.support_begin; i < b.support_end; ++i) {
      const double t = b.times[i] / 24.0;
      const double h = b.h[i] / capacity_mw;
      const double p = std::min(interpolate_linear(knot_t, knot_r, t) * h, std::min(h, 1.0));
      d.t.push_back(t);
      d.h.push_back(h);
      d.h_dot.push_back(b.h_dot[i] / capacity_mw);
      d.p.push_back(p);
      d.y.push_back(p);
      d.extrapolated.push_back(0);
    }
    d.p_dot = finite_difference(d.p, d.dt);
    out.push_back(std::move(d));
  }
  return out;
}

}  // namespace boundsde
