#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <string_view>
#include <vector>

#include <boost/math/special_functions/beta.hpp>

#include "boundsde/errors.hpp"
#include "boundsde/forecast_prep.hpp"
#include "boundsde/moments.hpp"
#include "boundsde/numerics.hpp"

namespace boundsde {

enum class SurrogateKind { Beta, TruncatedNormal };

inline std::string to_string(SurrogateKind k) { return k == SurrogateKind::Beta ? "beta" : "truncnorm"; }

inline SurrogateKind parse_surrogate_kind(std::string_view s) {
  if (s == "beta") return SurrogateKind::Beta;
  if (s == "truncnorm" || s == "truncated_normal" || s == "tn") return SurrogateKind::TruncatedNormal;
  throw InputError("unknown surrogate '" + std::string(s) + "' (expected beta or truncnorm)");
}

/// Penalty contributed by one moment-infeasible transition.
inline constexpr double kInfeasiblePenalty = -1e6;

// ---------------------------------------------------------------------------
// Scaled beta on [-1 + eps, 1 - eps]
// ---------------------------------------------------------------------------

struct BetaShapes {
  double xi1 = 1.0;
  double xi2 = 1.0;
  double epsilon = 0.0;

  double lower() const { return -1.0 + epsilon; }
  double upper() const { return 1.0 - epsilon; }
  double width() const { return 2.0 * (1.0 - epsilon); }
  double to_unit(double v) const { return (v - lower()) / width(); }
  double mean() const { return lower() + width() * xi1 / (xi1 + xi2); }
  double variance() const {
    const double s = xi1 + xi2;
    return width() * width() * xi1 * xi2 / (s * s * (s + 1.0));
  }
};

inline bool beta_feasible(double mu, double sigma2, double epsilon) {
  const double c = 1.0 - epsilon;
  return sigma2 > 0.0 && sigma2 < c * c - mu * mu && mu > -c && mu < c;
}

/**
 * Shape parameters whose scaled beta has mean mu and variance sigma2:
 *   xi1 = -(mu + 1 - eps)(mu^2 + sigma2 - (1 - eps)^2) / (2 (1 - eps) sigma2)
 *   xi2 =  (mu - 1 + eps)(mu^2 + sigma2 - (1 - eps)^2) / (2 (1 - eps) sigma2)
 */
inline BetaShapes beta_shapes(double mu, double sigma2, double epsilon, std::string_view context = {}) {
  if (!(epsilon >= 0.0 && epsilon < 1.0)) throw ParameterError("beta_shapes: epsilon must lie in [0, 1)");
  if (!beta_feasible(mu, sigma2, epsilon)) {
    std::string msg = "moments (mu=" + std::to_string(mu) + ", sigma2=" + std::to_string(sigma2) +
                      ") not representable by a beta law on [-1+eps, 1-eps]";
    if (!context.empty()) msg = std::string(context) + ": " + msg;
    throw MomentInfeasible(msg);
  }
  const double c = 1.0 - epsilon;
  const double g = mu * mu + sigma2 - c * c;  // < 0 when feasible
  const double denom = 2.0 * c * sigma2;
  return {-(mu + c) * g / denom, (mu - c) * g / denom, epsilon};
}

inline double beta_logpdf(double v, const BetaShapes& s) {
  if (!(v > s.lower() && v < s.upper())) return -std::numeric_limits<double>::infinity();
  const double u = s.to_unit(v);
  return (s.xi1 - 1.0) * std::log(u) + (s.xi2 - 1.0) * std::log1p(-u) - log_beta_function(s.xi1, s.xi2) -
         std::log(s.width());
}

inline double beta_cdf(double v, const BetaShapes& s) {
  if (v <= s.lower()) return 0.0;
  if (v >= s.upper()) return 1.0;
  return boost::math::ibeta(s.xi1, s.xi2, s.to_unit(v));
}

/// Bracketed bisection on the regularized incomplete beta function, mapped back to [-1+eps, 1-eps].
inline double beta_quantile(double q, const BetaShapes& s) {
  if (!(q > 0.0 && q < 1.0)) throw InputError("quantile level must lie in (0, 1)");
  double lo = 0.0, hi = 1.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    if (boost::math::ibeta(s.xi1, s.xi2, mid) < q) lo = mid;
    else hi = mid;
  }
  return s.lower() + s.width() * 0.5 * (lo + hi);
}

// ---------------------------------------------------------------------------
// Truncated normal on [-1 + eps, 1 - eps]
// ---------------------------------------------------------------------------

inline double truncnorm_log_mass(double mu, double sigma, double epsilon) {
  return log_normal_mass((-1.0 + epsilon - mu) / sigma, (1.0 - epsilon - mu) / sigma);
}

inline double truncnorm_logpdf(double v, double mu, double sigma, double epsilon) {
  if (!(sigma > 0.0)) throw InputError("truncnorm_logpdf: sigma must be positive");
  if (!(v >= -1.0 + epsilon && v <= 1.0 - epsilon)) return -std::numeric_limits<double>::infinity();
  const double z = (v - mu) / sigma;
  return -0.5 * z * z - kLogSqrt2Pi - std::log(sigma) - truncnorm_log_mass(mu, sigma, epsilon);
}

inline double truncnorm_cdf(double v, double mu, double sigma, double epsilon) {
  const double lo = -1.0 + epsilon, hi = 1.0 - epsilon;
  if (v <= lo) return 0.0;
  if (v >= hi) return 1.0;
  const double a = (lo - mu) / sigma;
  return std::exp(log_normal_mass(a, (v - mu) / sigma) - log_normal_mass(a, (hi - mu) / sigma));
}

/// mu + sigma Phi^{-1}(Phi(a) + q (Phi(b) - Phi(a))), evaluated on the upper tail when both ends are positive.
inline double truncnorm_quantile(double q, double mu, double sigma, double epsilon) {
  if (!(q > 0.0 && q < 1.0)) throw InputError("quantile level must lie in (0, 1)");
  if (!(sigma > 0.0)) throw InputError("truncnorm_quantile: sigma must be positive");
  const double lo = -1.0 + epsilon, hi = 1.0 - epsilon;
  const double a = (lo - mu) / sigma, b = (hi - mu) / sigma;
  double z, mass;
  if (a > 0.0) {
    const double sa = normal_sf(a), sb = normal_sf(b);
    mass = sa - sb;
    z = normal_sf_quantile(sa - q * mass);
  } else {
    const double pa = normal_cdf(a), pb = normal_cdf(b);
    mass = pb - pa;
    z = normal_quantile(pa + q * mass);
  }
  if (mass > 1e-300 && std::isfinite(z)) return std::clamp(mu + sigma * z, lo, hi);
  // Far tail: Phi underflows, so bisect the log-space CDF.
  double x_lo = lo, x_hi = hi;
  for (int it = 0; it < 200 && x_hi - x_lo > 0.0; ++it) {
    const double mid = 0.5 * (x_lo + x_hi);
    if (mid <= x_lo || mid >= x_hi) break;
    (truncnorm_cdf(mid, mu, sigma, epsilon) < q ? x_lo : x_hi) = mid;
  }
  return 0.5 * (x_lo + x_hi);
}

// ---------------------------------------------------------------------------
// Dispatch on the surrogate family
// ---------------------------------------------------------------------------

inline bool surrogate_feasible(SurrogateKind kind, double mu, double sigma2, double epsilon) {
  if (kind == SurrogateKind::Beta) return beta_feasible(mu, sigma2, epsilon);
  return sigma2 > 0.0 && std::isfinite(mu);
}

inline double surrogate_logpdf(double v, SurrogateKind kind, double mu, double sigma2, double epsilon) {
  if (kind == SurrogateKind::Beta) return beta_logpdf(v, beta_shapes(mu, sigma2, epsilon));
  return truncnorm_logpdf(v, mu, std::sqrt(sigma2), epsilon);
}

inline double surrogate_cdf(double v, SurrogateKind kind, double mu, double sigma2, double epsilon) {
  if (kind == SurrogateKind::Beta) return beta_cdf(v, beta_shapes(mu, sigma2, epsilon));
  return truncnorm_cdf(v, mu, std::sqrt(sigma2), epsilon);
}

inline double surrogate_quantile(double q, SurrogateKind kind, double mu, double sigma2, double epsilon) {
  if (!(q > 0.0 && q < 1.0)) throw InputError("quantile level must lie in (0, 1)");
  if (kind == SurrogateKind::Beta) return beta_quantile(q, beta_shapes(mu, sigma2, epsilon));
  return truncnorm_quantile(q, mu, std::sqrt(sigma2), epsilon);
}

// ---------------------------------------------------------------------------
// Approximate log-likelihood of observed transitions
// ---------------------------------------------------------------------------

enum class TransitionScope { All, Inner, Boundary };

/// Which transitions enter a sum. Membership uses the raw ratio against split_epsilon.
struct TransitionFilter {
  TransitionScope scope = TransitionScope::All;
  double split_epsilon = 0.0;

  bool accepts(double raw_ratio_prev) const {
    if (scope == TransitionScope::All) return true;
    const bool inner = is_inner(raw_ratio_prev, split_epsilon);
    return scope == TransitionScope::Inner ? inner : !inner;
  }
};

struct SurrogateTerm {
  double logpdf = 0.0;
  bool infeasible = false;
};

/// Observations sitting exactly on a support edge are moved just inside it.
inline double nudge_into_support(double v, double epsilon) {
  constexpr double kEdge = 1e-9;
  return std::clamp(v, -1.0 + epsilon + kEdge, 1.0 - epsilon - kEdge);
}

/// Surrogate log-density of v_i given v_{i-1}, with moments propagated across the step.
inline SurrogateTerm surrogate_transition_term(const PreparedDay& d, std::size_t i, SurrogateKind kind) {
  const ModelParams& p = d.params;
  const StepCoefficients c{d.theta_plus(i - 1), d.theta_plus(i), d.r[i - 1], d.r[i], p.alpha_theta0(), d.dt(), 4, true};
  const MomentPair m = v_moment_step(MomentPair::point(d.v[i - 1]), c);
  const double mu = m.mu();
  const double s2 = m.sigma2();
  if (!surrogate_feasible(kind, mu, s2, p.epsilon)) return {kInfeasiblePenalty, true};
  const double lp = surrogate_logpdf(nudge_into_support(d.v[i], p.epsilon), kind, mu, s2, p.epsilon);
  if (!std::isfinite(lp)) return {kInfeasiblePenalty, true};
  return {lp, false};
}

struct SurrogateLoglik {
  double value = 0.0;
  std::vector<double> per_day;
  std::size_t terms = 0;
  std::size_t infeasible = 0;
};

/**
 * Sum of surrogate log-densities over the selected transitions of every day.
 * Per-day sums and the total are exactly rounded, so the result does not
 * depend on day order or on the worker count.
 */
inline SurrogateLoglik surrogate_loglik(const std::vector<PreparedDay>& days, SurrogateKind kind,
                                        const TransitionFilter& filter = {}, unsigned workers = 1) {
  std::vector<ExactAccumulator> acc(days.size());
  std::vector<std::size_t> terms(days.size(), 0), bad(days.size(), 0);
  parallel_for(days.size(), workers, [&](std::size_t j) {
    const PreparedDay& d = days[j];
    for (std::size_t i = 1; i < d.size(); ++i) {
      if (!filter.accepts(d.raw_ratio[i - 1])) continue;
      const SurrogateTerm t = surrogate_transition_term(d, i, kind);
      acc[j].add(t.logpdf);
      ++terms[j];
      if (t.infeasible) ++bad[j];
    }
  });
  SurrogateLoglik out;
  ExactAccumulator total;
  out.per_day.reserve(days.size());
  for (std::size_t j = 0; j < days.size(); ++j) {
    out.per_day.push_back(acc[j].value());
    total.add(acc[j]);
    out.terms += terms[j];
    out.infeasible += bad[j];
  }
  out.value = total.value();
  return out;
}

inline SurrogateLoglik surrogate_loglik(const std::vector<DaySeries>& days, const ModelParams& params,
                                        SurrogateKind kind, const TransitionFilter& filter = {}, unsigned workers = 1) {
  return surrogate_loglik(prepare_days(days, params), kind, filter, workers);
}

}  // namespace boundsde
