#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <string>

#include "boundsde/errors.hpp"
#include "boundsde/forecast_prep.hpp"

namespace boundsde {

inline constexpr double kVarianceFloor = 1e-12;

struct MomentPair {
  double m1 = 0.0;
  double m2 = 0.0;

  double mu() const { return m1; }
  /// Raw variance m2 - m1^2, possibly slightly negative from rounding.
  double sigma2_raw() const { return m2 - m1 * m1; }
  /// Variance raised to the floor before any surrogate-parameter computation.
  double sigma2() const { return std::max(sigma2_raw(), kVarianceFloor); }

  static MomentPair point(double v) { return {v, v * v}; }
};

/**
 * Coefficients of one transition. theta_plus = theta_t + h_dot/h and r vary
 * linearly between their values at the two grid knots.
 */
struct StepCoefficients {
  double theta_plus_start = 0.0;
  double theta_plus_end = 0.0;
  double r_start = 0.5;
  double r_end = 0.5;
  double alpha_theta0 = 0.0;
  double dt = 10.0 / 1440.0;
  int substeps = 4;
  bool adaptive = true;  // add substeps when theta_plus * dt is large

  static StepCoefficients constant(double theta_plus, double r, double alpha_theta0, double dt, int substeps = 4) {
    return {theta_plus, theta_plus, r, r, alpha_theta0, dt, substeps, true};
  }
};

inline StepCoefficients step_coefficients(const TransitionRecord& t, const ModelParams& params, int substeps = 4) {
  return {t.theta_plus_prev, t.theta_plus_next, t.r_prev, t.r_next, params.alpha_theta0(), t.dt, substeps, true};
}

namespace detail {

inline void check_coefficients(const StepCoefficients& c) {
  if (!(c.dt >= 0.0) || !std::isfinite(c.dt)) throw InputError("moment step: dt must be finite and nonnegative");
  if (!std::isfinite(c.theta_plus_start) || !std::isfinite(c.theta_plus_end))
    throw NumericalError("moment step: theta_plus not finite");
  if (!(c.alpha_theta0 >= 0.0)) throw ParameterError("moment step: alpha*theta0 must be nonnegative");
  if (c.substeps < 1) throw InputError("moment step: substeps must be >= 1");
}

inline int effective_substeps(const StepCoefficients& c) {
  if (!c.adaptive) return c.substeps;
  const double rate = 2.0 * (std::max(std::fabs(c.theta_plus_start), std::fabs(c.theta_plus_end)) + c.alpha_theta0);
  const int needed = static_cast<int>(std::ceil(rate * c.dt / 0.05));
  return std::clamp(needed, c.substeps, 4096);
}

/// Classical RK4 for the linear system m' = f(s, m) over [0, dt].
template <class Rhs>
MomentPair rk4(MomentPair start, const StepCoefficients& c, Rhs&& rhs) {
  if (c.dt == 0.0) return start;
  const int n = effective_substeps(c);
  const double hstep = c.dt / n;
  std::array<double, 2> m{start.m1, start.m2};
  for (int k = 0; k < n; ++k) {
    const double s = k * hstep;
    const auto k1 = rhs(s, m);
    const auto k2 = rhs(s + 0.5 * hstep, std::array<double, 2>{m[0] + 0.5 * hstep * k1[0], m[1] + 0.5 * hstep * k1[1]});
    const auto k3 = rhs(s + 0.5 * hstep, std::array<double, 2>{m[0] + 0.5 * hstep * k2[0], m[1] + 0.5 * hstep * k2[1]});
    const auto k4 = rhs(s + hstep, std::array<double, 2>{m[0] + hstep * k3[0], m[1] + hstep * k3[1]});
    for (int j = 0; j < 2; ++j) m[j] += hstep / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
  }
  if (!std::isfinite(m[0]) || !std::isfinite(m[1])) throw NumericalError("moment integration produced a nonfinite value");
  return {m[0], m[1]};
}

inline double lerp_at(double a, double b, double s, double dt) { return dt > 0.0 ? a + (b - a) * (s / dt) : a; }

}  // namespace detail

/**
 * First two conditional moments of V across one transition:
 *   m1' = -theta_plus m1
 *   m2' = -2 (theta_plus + a) m2 + 2 a (1 - 2 r) m1 + 2 a r (1 - r),   a = alpha theta0
 */
inline MomentPair v_moment_step(MomentPair start, const StepCoefficients& c) {
  detail::check_coefficients(c);
  const double a = c.alpha_theta0;
  return detail::rk4(start, c, [&](double s, const std::array<double, 2>& m) {
    const double tp = detail::lerp_at(c.theta_plus_start, c.theta_plus_end, s, c.dt);
    const double r = detail::lerp_at(c.r_start, c.r_end, s, c.dt);
    return std::array<double, 2>{-tp * m[0], -2.0 * (tp + a) * m[1] + 2.0 * a * (1.0 - 2.0 * r) * m[0] + 2.0 * a * r * (1.0 - r)};
  });
}

/// Squared V-diffusion at the conditioning point: 2 alpha theta0 (v + r)(1 - v - r), clamped at 0.
inline double z_sigma2_match(double v_prev, double r, double alpha_theta0, Warnings* warnings = nullptr) {
  const double x = v_prev + r;
  const double s2 = 2.0 * alpha_theta0 * x * (1.0 - x);
  if (s2 < 0.0) {
    warn(warnings, "z_sigma_match: negative radicand clamped to 0");
    return 0.0;
  }
  return s2;
}

inline double z_sigma_match(double v_prev, double r, double alpha_theta0, Warnings* warnings = nullptr) {
  return std::sqrt(z_sigma2_match(v_prev, r, alpha_theta0, warnings));
}

struct GaussianLaw {
  double mu = 0.0;
  double sigma2 = 0.0;

  double sigma() const { return std::sqrt(std::max(sigma2, 0.0)); }
};

/**
 * Moments of the Gaussian auxiliary process: m1' = -theta_plus m1,
 * m2' = -2 theta_plus m2 + sigma^2. Integrated in centered form
 * (var' = -2 theta_plus var + sigma^2) so small variances keep full precision.
 */
inline GaussianLaw z_moment_step(MomentPair start, const StepCoefficients& c, double sigma2) {
  detail::check_coefficients(c);
  if (!(sigma2 >= 0.0)) throw InputError("z_moment_step: sigma^2 must be nonnegative");
  const MomentPair centered{start.m1, std::max(start.sigma2_raw(), 0.0)};
  const MomentPair end = detail::rk4(centered, c, [&](double s, const std::array<double, 2>& m) {
    const double tp = detail::lerp_at(c.theta_plus_start, c.theta_plus_end, s, c.dt);
    return std::array<double, 2>{-tp * m[0], -2.0 * tp * m[1] + sigma2};
  });
  return {end.m1, std::max(end.m2, 0.0)};
}

}  // namespace boundsde
