#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "boundsde/errors.hpp"
#include "boundsde/forecast_prep.hpp"
#include "boundsde/numerics.hpp"
#include "boundsde/optimize.hpp"
#include "boundsde/surrogates.hpp"

namespace boundsde {

// ---------------------------------------------------------------------------
// Closed-form starting values
// ---------------------------------------------------------------------------

struct InitGuess {
  double value = 0.0;
  bool fallback = false;
};

inline constexpr double kDefaultTheta0 = 10.0;
inline constexpr double kDefaultAlpha = 0.1;

/// theta0* = sum v_prev (v_prev - v_next) / (dt sum v_prev^2).
inline InitGuess init_theta0(std::span<const TransitionRecord> ts, double dt, Warnings* warnings = nullptr) {
  ExactAccumulator num, den;
  for (const auto& t : ts) {
    num.add(t.v_prev * (t.v_prev - t.v_next));
    den.add(t.v_prev * t.v_prev);
  }
  const double d = den.value();
  if (!(d > 0.0) || !(dt > 0.0)) {
    warn(warnings, "init_theta0: zero denominator, using default 10");
    return {kDefaultTheta0, true};
  }
  return {num.value() / (dt * d), false};
}

/// (theta0 alpha)* = sum (v_next - v_prev)^2 / (2 dt sum (v_next + r_next)(1 - v_next - r_next)).
inline InitGuess init_theta0alpha(std::span<const TransitionRecord> ts, double dt, Warnings* warnings = nullptr) {
  ExactAccumulator num, den;
  for (const auto& t : ts) {
    const double dv = t.v_next - t.v_prev;
    const double x = t.v_next + t.r_next;
    num.add(dv * dv);
    den.add(x * (1.0 - x));
  }
  const double d = den.value();
  if (!(d > 0.0) || !(dt > 0.0)) {
    warn(warnings, "init_theta0alpha: zero denominator, using default");
    return {kDefaultTheta0 * kDefaultAlpha, true};
  }
  return {num.value() / (2.0 * dt * d), false};
}

struct InitialParams {
  double theta0 = kDefaultTheta0;
  double alpha = kDefaultAlpha;
  double theta0_raw = 0.0;       // as computed, before any fallback
  double theta0alpha_raw = 0.0;
};

/// Starting (theta0, alpha) from the two closed-form estimators, with positive fallbacks.
inline InitialParams initial_params(std::span<const TransitionRecord> ts, double dt, Warnings* warnings = nullptr) {
  InitialParams p;
  const InitGuess th = init_theta0(ts, dt, warnings);
  const InitGuess ta = init_theta0alpha(ts, dt, warnings);
  p.theta0_raw = th.value;
  p.theta0alpha_raw = ta.value;
  p.theta0 = (th.value > 0.0 && std::isfinite(th.value)) ? th.value : kDefaultTheta0;
  if (p.theta0 != th.value) warn(warnings, "theta0 initial guess not positive, using default 10");
  p.alpha = (ta.value > 0.0 && std::isfinite(ta.value)) ? ta.value / p.theta0 : kDefaultAlpha;
  return p;
}

inline double common_dt(const std::vector<DaySeries>& days) {
  if (days.empty()) throw DataError("no days to calibrate on");
  const double dt = days.front().dt;
  for (const auto& d : days)
    if (std::fabs(d.dt - dt) > 1e-12 * dt) throw DataError("days use different grid spacings");
  return dt;
}

// ---------------------------------------------------------------------------
// Options and report
// ---------------------------------------------------------------------------

struct CalibrationOptions {
  double eps_tol = 1e-3;              // stop when |eps_new - eps_old| <= eps_tol
  int max_iterations = 50;
  double eps_lower = 1e-3;
  double eps_upper = 0.25;
  double eps_search_tol = 1e-4;
  opt::SimplexOptions simplex{};
  unsigned workers = 1;
};

struct ThetaAlphaResult {
  double theta0 = 0.0;
  double alpha = 0.0;
  double neg_loglik = std::numeric_limits<double>::infinity();
  int evaluations = 0;
  bool converged = false;
};

struct IterationRecord {
  double eps_old = 0.0;
  double eps_new = 0.0;
  double abs_delta = 0.0;
  double theta0 = 0.0;
  double alpha = 0.0;
  double init_theta0 = 0.0;
  double init_theta0alpha = 0.0;
  double neg_loglik_inner = 0.0;
  double neg_loglik_boundary = 0.0;
  double inner_percent = 0.0;
  double boundary_percent = 0.0;
};

struct CalibrationReport {
  SurrogateKind kind = SurrogateKind::Beta;
  double epsilon_init = 0.0;
  double epsilon_hat = 0.0;
  double theta0_hat = 0.0;
  double alpha_hat = 0.0;
  double neg_loglik = 0.0;
  double init_theta0 = 0.0;         // starting point of the final optimization
  double init_alpha = 0.0;
  double init_neg_loglik = 0.0;
  double inner_percent = 0.0;
  double boundary_percent = 0.0;
  std::vector<IterationRecord> trace;
  int evaluations = 0;
  bool converged = false;           // two-stage loop met eps_tol
  bool optimizer_converged = false; // final simplex met its diameter tolerance
  std::size_t infeasible_terms = 0;
  Warnings warnings;

  ModelParams params() const { return {theta0_hat, alpha_hat, epsilon_hat}; }
};

// ---------------------------------------------------------------------------
// Objectives
// ---------------------------------------------------------------------------

/// -loglik of the selected transitions under (theta0, alpha, eps); the filter's split is independent of eps.
inline double neg_loglik(const std::vector<DaySeries>& days, const ModelParams& params, SurrogateKind kind,
                         const TransitionFilter& filter, unsigned workers = 1) {
  return -surrogate_loglik(days, params, kind, filter, workers).value;
}

// ---------------------------------------------------------------------------
// Stage optimizers
// ---------------------------------------------------------------------------

/// Simplex search on (log theta0, log alpha).
inline ThetaAlphaResult optimize_theta_alpha(const std::function<double(double, double)>& objective,
                                             double theta0_init, double alpha_init,
                                             const opt::SimplexOptions& options = {}) {
  if (!(theta0_init > 0.0) || !(alpha_init > 0.0)) throw ParameterError("optimize_theta_alpha: initial point must be positive");
  const auto f = [&](const std::vector<double>& x) { return objective(std::exp(x[0]), std::exp(x[1])); };
  const opt::SimplexResult r = opt::nelder_mead(f, {std::log(theta0_init), std::log(alpha_init)}, options);
  return {std::exp(r.x[0]), std::exp(r.x[1]), r.value, r.evaluations, r.converged};
}

inline ThetaAlphaResult optimize_theta_alpha(const std::vector<DaySeries>& days, double epsilon, SurrogateKind kind,
                                             const TransitionFilter& filter, double theta0_init, double alpha_init,
                                             const CalibrationOptions& options = {}) {
  return optimize_theta_alpha(
      [&](double th, double al) { return neg_loglik(days, {th, al, epsilon}, kind, filter, options.workers); },
      theta0_init, alpha_init, options.simplex);
}

struct EpsilonResult {
  double epsilon = 0.0;
  double neg_loglik = 0.0;
  int evaluations = 0;
  bool searched = false;
};

inline EpsilonResult optimize_epsilon(const std::function<double(double)>& objective, double lower = 1e-3,
                                      double upper = 0.25, double tol = 1e-4) {
  const opt::ScalarResult r = opt::golden_section(objective, lower, upper, tol);
  return {r.x, r.value, r.evaluations, true};
}

/**
 * Stage two: golden-section search over eps on the boundary transitions, the
 * boundary set being fixed by split_epsilon. The candidate eps sets both the
 * thresholding and the surrogate support.
 */
inline EpsilonResult optimize_epsilon(const std::vector<DaySeries>& days, double theta0, double alpha,
                                      SurrogateKind kind, double split_epsilon, const CalibrationOptions& options = {},
                                      Warnings* warnings = nullptr) {
  const TransitionFilter filter{TransitionScope::Boundary, split_epsilon};
  const auto prepared = prepare_days(days, {theta0, alpha, split_epsilon});
  bool any = false;
  for (const auto& d : prepared)
    for (std::size_t i = 1; i < d.size() && !any; ++i) any = filter.accepts(d.raw_ratio[i - 1]);
  if (!any) {
    warn(warnings, "optimize_epsilon: empty boundary set, epsilon unchanged");
    return {split_epsilon, 0.0, 0, false};
  }
  return optimize_epsilon(
      [&](double eps) { return neg_loglik(days, {theta0, alpha, eps}, kind, filter, options.workers); },
      options.eps_lower, options.eps_upper, options.eps_search_tol);
}

// ---------------------------------------------------------------------------
// Two-stage iteration
// ---------------------------------------------------------------------------

struct StageOne {
  double theta0 = 0.0;
  double alpha = 0.0;
  double neg_loglik = 0.0;
  int evaluations = 0;
  double init_theta0 = 0.0;
  double init_theta0alpha = 0.0;
  double inner_percent = 0.0;
};

struct StageTwo {
  double epsilon = 0.0;
  double neg_loglik = 0.0;
  int evaluations = 0;
};

/**
 * Alternates stage one (theta0, alpha at fixed eps) and stage two (eps at
 * fixed theta0, alpha) until |eps_new - eps_old| <= eps_tol or the cap is hit.
 */
inline CalibrationReport two_stage_driver(double epsilon_init, const std::function<StageOne(double)>& stage_one,
                                          const std::function<StageTwo(double, double, double)>& stage_two,
                                          const CalibrationOptions& options = {}) {
  if (!(epsilon_init > 0.0 && epsilon_init <= 0.25)) throw ParameterError("epsilon_init must lie in (0, 0.25]");
  CalibrationReport rep;
  rep.epsilon_init = epsilon_init;
  double eps = epsilon_init;
  for (int it = 0; it < options.max_iterations; ++it) {
    const StageOne s1 = stage_one(eps);
    const StageTwo s2 = stage_two(s1.theta0, s1.alpha, eps);
    IterationRecord rec;
    rec.eps_old = eps;
    rec.eps_new = s2.epsilon;
    rec.abs_delta = std::fabs(s2.epsilon - eps);
    rec.theta0 = s1.theta0;
    rec.alpha = s1.alpha;
    rec.init_theta0 = s1.init_theta0;
    rec.init_theta0alpha = s1.init_theta0alpha;
    rec.neg_loglik_inner = s1.neg_loglik;
    rec.neg_loglik_boundary = s2.neg_loglik;
    rec.inner_percent = s1.inner_percent;
    rec.boundary_percent = 100.0 - s1.inner_percent;
    rep.trace.push_back(rec);
    rep.evaluations += s1.evaluations + s2.evaluations;
    rep.theta0_hat = s1.theta0;
    rep.alpha_hat = s1.alpha;
    eps = s2.epsilon;
    if (rec.abs_delta <= options.eps_tol) {
      rep.converged = true;
      break;
    }
  }
  rep.epsilon_hat = eps;
  if (!rep.converged) rep.warnings.add("two-stage iteration hit the cap of " + std::to_string(options.max_iterations));
  return rep;
}

inline CalibrationReport two_stage_iterate(const std::vector<DaySeries>& days, double epsilon_init, SurrogateKind kind,
                                           const CalibrationOptions& options = {}) {
  const double dt = common_dt(days);
  Warnings stage_warnings;
  auto stage_one = [&](double eps) {
    const auto prepared = prepare_days(days, {kDefaultTheta0, kDefaultAlpha, eps});
    const TransitionPartition part = partition_inner_boundary(prepared, eps);
    const InitialParams init = initial_params(part.inner, dt, &stage_warnings);
    const ThetaAlphaResult r = optimize_theta_alpha(days, eps, kind, {TransitionScope::Inner, eps}, init.theta0,
                                                    init.alpha, options);
    return StageOne{r.theta0, r.alpha, r.neg_loglik, r.evaluations, init.theta0_raw, init.theta0alpha_raw,
                    part.inner_percent()};
  };
  auto stage_two = [&](double th, double al, double eps) {
    const EpsilonResult r = optimize_epsilon(days, th, al, kind, eps, options, &stage_warnings);
    return StageTwo{r.epsilon, r.neg_loglik, r.evaluations};
  };
  CalibrationReport rep = two_stage_driver(epsilon_init, stage_one, stage_two, options);
  rep.kind = kind;
  for (auto& m : stage_warnings.messages) rep.warnings.add(std::move(m));
  return rep;
}

/**
 * Final (theta0, alpha) on all transitions at eps_hat, restarted from the
 * closed-form guesses on all transitions.
 */
inline CalibrationReport finalize(const std::vector<DaySeries>& days, double epsilon_hat, SurrogateKind kind,
                                  const CalibrationOptions& options = {}, CalibrationReport rep = {}) {
  check_epsilon(epsilon_hat);
  const double dt = common_dt(days);
  const auto prepared = prepare_days(days, {kDefaultTheta0, kDefaultAlpha, epsilon_hat});
  const auto all = transitions(prepared);
  const TransitionPartition part = partition_inner_boundary(prepared, epsilon_hat);
  const InitialParams init = initial_params(all, dt, &rep.warnings);
  const TransitionFilter everything{};
  const ThetaAlphaResult r = optimize_theta_alpha(days, epsilon_hat, kind, everything, init.theta0, init.alpha, options);

  rep.kind = kind;
  rep.epsilon_hat = epsilon_hat;
  rep.theta0_hat = r.theta0;
  rep.alpha_hat = r.alpha;
  rep.neg_loglik = r.neg_loglik;
  rep.init_theta0 = init.theta0;
  rep.init_alpha = init.alpha;
  rep.init_neg_loglik = neg_loglik(days, {init.theta0, init.alpha, epsilon_hat}, kind, everything, options.workers);
  rep.inner_percent = part.inner_percent();
  rep.boundary_percent = part.boundary_percent();
  rep.evaluations += r.evaluations;
  rep.optimizer_converged = r.converged;
  rep.infeasible_terms = surrogate_loglik(days, rep.params(), kind, everything, options.workers).infeasible;
  if (!r.converged) rep.warnings.add("final simplex stopped at the evaluation cap");
  return rep;
}

/// Two-stage iteration followed by the final all-data optimization.
inline CalibrationReport calibrate(const std::vector<DaySeries>& days, double epsilon_init, SurrogateKind kind,
                                   const CalibrationOptions& options = {}) {
  CalibrationReport rep = two_stage_iterate(days, epsilon_init, kind, options);
  return finalize(days, rep.epsilon_hat, kind, options, std::move(rep));
}

// ---------------------------------------------------------------------------
// Profiles and level sets
// ---------------------------------------------------------------------------

struct ProfilePoint {
  double epsilon = 0.0;
  double neg_loglik = 0.0;
};

/// Stage-two objective over a grid of eps, on the boundary set fixed by split_epsilon.
inline std::vector<ProfilePoint> profile_epsilon(const std::vector<DaySeries>& days, double theta0, double alpha,
                                                 SurrogateKind kind, std::span<const double> grid, double split_epsilon,
                                                 unsigned workers = 1) {
  const TransitionFilter filter{TransitionScope::Boundary, split_epsilon};
  std::vector<ProfilePoint> out;
  for (double eps : grid) {
    if (!(eps > 0.0 && eps <= 0.25)) throw InputError("profile grid must lie in (0, 0.25]");
    out.push_back({eps, neg_loglik(days, {theta0, alpha, eps}, kind, filter, workers)});
  }
  return out;
}

struct LevelSetGrid {
  std::vector<double> theta0;
  std::vector<double> alpha;
  std::vector<std::vector<double>> values;  // values[i][j] at (theta0[i], alpha[j])
  std::size_t argmin_theta0 = 0;
  std::size_t argmin_alpha = 0;

  double min_value() const { return values[argmin_theta0][argmin_alpha]; }
};

inline LevelSetGrid level_sets(const std::function<double(double, double)>& objective, std::span<const double> theta0_grid,
                               std::span<const double> alpha_grid) {
  if (theta0_grid.empty() || alpha_grid.empty()) throw InputError("level_sets: empty grid");
  LevelSetGrid g;
  g.theta0.assign(theta0_grid.begin(), theta0_grid.end());
  g.alpha.assign(alpha_grid.begin(), alpha_grid.end());
  g.values.assign(g.theta0.size(), std::vector<double>(g.alpha.size()));
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < g.theta0.size(); ++i) {
    for (std::size_t j = 0; j < g.alpha.size(); ++j) {
      if (!(g.theta0[i] > 0.0) || !(g.alpha[j] > 0.0)) throw InputError("level_sets: grids must be positive");
      g.values[i][j] = objective(g.theta0[i], g.alpha[j]);
      if (g.values[i][j] < best) {
        best = g.values[i][j];
        g.argmin_theta0 = i;
        g.argmin_alpha = j;
      }
    }
  }
  return g;
}

inline LevelSetGrid level_sets(const std::vector<DaySeries>& days, double epsilon_hat, SurrogateKind kind,
                               std::span<const double> theta0_grid, std::span<const double> alpha_grid,
                               unsigned workers = 1) {
  return level_sets([&](double th, double al) { return neg_loglik(days, {th, al, epsilon_hat}, kind, {}, workers); },
                    theta0_grid, alpha_grid);
}

}  // namespace boundsde
