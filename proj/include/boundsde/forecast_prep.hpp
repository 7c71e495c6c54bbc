#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "boundsde/errors.hpp"
#include "boundsde/ingest.hpp"
#include "boundsde/numerics.hpp"

namespace boundsde {

struct ModelParams {
  double theta0 = 20.0;    // 1/day
  double alpha = 0.15;
  double epsilon = 0.07;

  double alpha_theta0() const { return alpha * theta0; }

  void validate() const {
    if (!(theta0 > 0.0) || !std::isfinite(theta0)) throw ParameterError("theta0 must be positive");
    if (!(alpha > 0.0) || !std::isfinite(alpha)) throw ParameterError("alpha must be positive");
    if (!(epsilon > 0.0 && epsilon < 0.5)) throw ParameterError("epsilon must lie in (0, 0.5)");
  }
};

inline void check_epsilon(double epsilon) {
  if (!(epsilon > 0.0 && epsilon < 0.5)) throw ParameterError("epsilon must lie in (0, 0.5)");
}

/// (p/h)_eps: the ratio clamped into [eps, 1 - eps].
inline double threshold_forecast(double ratio, double epsilon) {
  check_epsilon(epsilon);
  if (ratio <= epsilon) return epsilon;
  if (ratio >= 1.0 - epsilon) return 1.0 - epsilon;
  return ratio;
}

inline std::vector<double> threshold_forecast(std::span<const double> ratio, double epsilon) {
  std::vector<double> out(ratio.size());
  for (std::size_t i = 0; i < ratio.size(); ++i) out[i] = threshold_forecast(ratio[i], epsilon);
  return out;
}

/// theta_t = max(theta0, (alpha theta0 + |r_dot|) / min(r, 1 - r) - h_dot / h).
inline double theta_t(const ModelParams& params, double r, double r_dot, double hdot_over_h) {
  const double eps = params.epsilon;
  // Allow a few ulps of slack: r arrives from threshold_forecast on the same eps.
  const double slack = 8.0 * std::numeric_limits<double>::epsilon();
  if (!(r >= eps - slack && r <= 1.0 - eps + slack))
    throw ContractError("theta_t: r = " + std::to_string(r) + " outside [eps, 1 - eps]");
  const double bound = (params.alpha_theta0() + std::fabs(r_dot)) / std::min(r, 1.0 - r) - hdot_over_h;
  return std::max(params.theta0, bound);
}

inline std::vector<double> theta_t(const ModelParams& params, std::span<const double> r, std::span<const double> r_dot,
                                   std::span<const double> hdot_over_h) {
  if (r.size() != r_dot.size() || r.size() != hdot_over_h.size()) throw InputError("theta_t: length mismatch");
  std::vector<double> out(r.size());
  for (std::size_t i = 0; i < r.size(); ++i) out[i] = theta_t(params, r[i], r_dot[i], hdot_over_h[i]);
  return out;
}

/// A day with its forecast-error observations under one parameter triple.
struct PreparedDay {
  const DaySeries* day = nullptr;
  ModelParams params;
  std::vector<double> raw_ratio;    // p / h before thresholding
  std::vector<double> r;            // (p/h)_eps
  std::vector<double> r_dot;
  std::vector<double> hdot_over_h;
  std::vector<double> theta;
  std::vector<double> v;            // y/h - r

  std::size_t size() const { return r.size(); }
  double dt() const { return day->dt; }
  double theta_plus(std::size_t i) const { return theta[i] + hdot_over_h[i]; }
};

/// Builds r, r_dot, theta_t and v for one day. The DaySeries must outlive the result.
inline PreparedDay forecast_error_series(const DaySeries& day, const ModelParams& params) {
  params.validate();
  PreparedDay out;
  out.day = &day;
  out.params = params;
  const std::size_t n = day.size();
  out.raw_ratio.resize(n);
  out.hdot_over_h.resize(n);
  out.v.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (!(day.h[i] > 0.0)) throw ContractError(day.day_id + ": h = 0 inside the support at index " + std::to_string(i));
    out.raw_ratio[i] = day.p[i] / day.h[i];
    out.hdot_over_h[i] = day.h_dot[i] / day.h[i];
  }
  out.r = threshold_forecast(out.raw_ratio, params.epsilon);
  out.r_dot = finite_difference(out.r, day.dt);
  out.theta = theta_t(params, out.r, out.r_dot, out.hdot_over_h);
  for (std::size_t i = 0; i < n; ++i) out.v[i] = day.y[i] / day.h[i] - out.r[i];
  return out;
}

inline std::vector<PreparedDay> prepare_days(const std::vector<DaySeries>& days, const ModelParams& params) {
  std::vector<PreparedDay> out;
  out.reserve(days.size());
  for (const auto& d : days) out.push_back(forecast_error_series(d, params));
  return out;
}

// PreparedDay keeps a pointer to its DaySeries; the source must outlive the result.
PreparedDay forecast_error_series(DaySeries&&, const ModelParams&) = delete;
std::vector<PreparedDay> prepare_days(std::vector<DaySeries>&&, const ModelParams&) = delete;

/// One step [t_{i-1}, t_i] of one day. Index i refers to the right endpoint.
struct TransitionRecord {
  std::size_t day_index = 0;
  std::size_t i = 1;
  double v_prev = 0.0;
  double v_next = 0.0;
  double r_prev = 0.5;
  double r_next = 0.5;
  double r_dot = 0.0;          // at the left endpoint
  double raw_ratio_prev = 0.5;
  double hdot_over_h = 0.0;    // at the left endpoint
  double theta = 0.0;          // at the left endpoint
  double theta_plus_prev = 0.0;
  double theta_plus_next = 0.0;
  double dt = 10.0 / 1440.0;
};

inline TransitionRecord transition_at(const PreparedDay& d, std::size_t day_index, std::size_t i) {
  TransitionRecord t;
  t.day_index = day_index;
  t.i = i;
  t.v_prev = d.v[i - 1];
  t.v_next = d.v[i];
  t.r_prev = d.r[i - 1];
  t.r_next = d.r[i];
  t.r_dot = d.r_dot[i - 1];
  t.raw_ratio_prev = d.raw_ratio[i - 1];
  t.hdot_over_h = d.hdot_over_h[i - 1];
  t.theta = d.theta[i - 1];
  t.theta_plus_prev = d.theta_plus(i - 1);
  t.theta_plus_next = d.theta_plus(i);
  t.dt = d.dt();
  return t;
}

inline std::vector<TransitionRecord> transitions(const std::vector<PreparedDay>& days) {
  std::vector<TransitionRecord> out;
  for (std::size_t j = 0; j < days.size(); ++j)
    for (std::size_t i = 1; i < days[j].size(); ++i) out.push_back(transition_at(days[j], j, i));
  return out;
}

/// Inner iff eps < p/h < 1 - eps at the left endpoint, using the un-thresholded ratio.
inline bool is_inner(double raw_ratio_prev, double epsilon) {
  return raw_ratio_prev > epsilon && raw_ratio_prev < 1.0 - epsilon;
}

struct TransitionPartition {
  std::vector<TransitionRecord> inner;
  std::vector<TransitionRecord> boundary;

  double inner_percent() const {
    const double n = static_cast<double>(inner.size() + boundary.size());
    return n > 0 ? 100.0 * static_cast<double>(inner.size()) / n : 0.0;
  }
  double boundary_percent() const {
    const double n = static_cast<double>(inner.size() + boundary.size());
    return n > 0 ? 100.0 * static_cast<double>(boundary.size()) / n : 0.0;
  }
};

inline TransitionPartition partition_inner_boundary(const std::vector<PreparedDay>& days, double epsilon) {
  TransitionPartition out;
  for (auto& t : transitions(days)) (is_inner(t.raw_ratio_prev, epsilon) ? out.inner : out.boundary).push_back(t);
  return out;
}

struct ConditionBReport {
  bool ok = true;
  std::vector<std::size_t> violations;
};

/**
 * theta + h_dot/h >= max((alpha theta0 + r_dot)/(1 - r), (alpha theta0 - r_dot)/r)
 * at every grid point, up to a relative tolerance.
 */
inline ConditionBReport check_condition_B(const ModelParams& params, std::span<const double> theta,
                                          std::span<const double> r, std::span<const double> r_dot,
                                          std::span<const double> hdot_over_h, double rel_tol = 1e-9) {
  ConditionBReport rep;
  const double at = params.alpha_theta0();
  for (std::size_t i = 0; i < theta.size(); ++i) {
    const double lhs = theta[i] + hdot_over_h[i];
    const double rhs = std::max((at + r_dot[i]) / (1.0 - r[i]), (at - r_dot[i]) / r[i]);
    if (lhs < rhs - rel_tol * std::max(1.0, std::fabs(rhs))) rep.violations.push_back(i);
  }
  rep.ok = rep.violations.empty();
  return rep;
}

inline ConditionBReport check_condition_B(const ModelParams& params, const PreparedDay& day, double rel_tol = 1e-9) {
  return check_condition_B(params, day.theta, day.r, day.r_dot, day.hdot_over_h, rel_tol);
}

}  // namespace boundsde
