#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include "boundsde/errors.hpp"
#include "boundsde/forecast_prep.hpp"
#include "boundsde/moments.hpp"
#include "boundsde/numerics.hpp"

/**
 * @file kde_transition.hpp
 * @brief Control-variate kernel density estimate of the one-step transition density of V.
 *
 * For each pair n, V and an auxiliary Gaussian process Z start at v_prev and
 * share the same Brownian increment. With a standard normal kernel,
 *
 *   rho_hat(v) = (1/m) sum [k_h(V_n - v) - k_h(Z_n - v)] + N(v; mu_Z, sigma_Z^2 + h^2),
 *
 * the last term being the exact kernel-smoothed density of Z.
 */
namespace boundsde {

struct CoupledSample {
  std::vector<double> v;
  std::vector<double> z;
  std::uint64_t key = 0;

  std::size_t size() const { return v.size(); }
};

inline StepCoefficients transition_coefficients(const TransitionRecord& t, const ModelParams& params) {
  return {t.theta_plus_prev, t.theta_plus_next, t.r_prev, t.r_next, params.alpha_theta0(), t.dt, 4, true};
}

/// Gaussian law of Z at the end of the step, with sigma matched to the V-diffusion at v_prev.
inline GaussianLaw gaussian_step_params(const TransitionRecord& t, const ModelParams& params) {
  if (!(t.dt > 0.0)) throw InputError("gaussian_step_params: the step must have positive length");
  const double s2 = z_sigma2_match(t.v_prev, t.r_prev, params.alpha_theta0());
  return z_moment_step(MomentPair::point(t.v_prev), transition_coefficients(t, params), s2);
}

/**
 * Appends pairs to `sample` until it holds m of them. V takes `v_substeps`
 * Euler steps of dV = -theta_plus V dt + sqrt(2 a (V + r)(1 - V - r)) dW and is
 * projected into [-r_next, 1 - r_next]; Z is drawn from its exact Gaussian law
 * using the same total increment.
 */
template <class NormalSource>
void extend_coupled(CoupledSample& sample, const TransitionRecord& t, const ModelParams& params, const GaussianLaw& z_law,
                    std::size_t m, NormalSource& normal, int v_substeps = 1) {
  if (v_substeps < 1) throw InputError("v_substeps must be >= 1");
  const double a = params.alpha_theta0();
  const double h = t.dt / v_substeps;
  const double sqrt_h = std::sqrt(h);
  const double sqrt_dt = std::sqrt(t.dt);
  const double z_sd = z_law.sigma();
  sample.v.reserve(m);
  sample.z.reserve(m);
  while (sample.v.size() < m) {
    double v = t.v_prev;
    double w = 0.0;
    for (int k = 0; k < v_substeps; ++k) {
      const double frac = static_cast<double>(k) / v_substeps;
      const double tp = t.theta_plus_prev + frac * (t.theta_plus_next - t.theta_plus_prev);
      const double r = t.r_prev + frac * (t.r_next - t.r_prev);
      const double x = v + r;
      const double diffusion = std::sqrt(std::max(2.0 * a * x * (1.0 - x), 0.0));
      const double dw = sqrt_h * normal();
      v += -tp * v * h + diffusion * dw;
      w += dw;
      if (k + 1 < v_substeps) {
        const double r_after = t.r_prev + (frac + 1.0 / v_substeps) * (t.r_next - t.r_prev);
        v = std::clamp(v, -r_after, 1.0 - r_after);
      }
    }
    sample.v.push_back(std::clamp(v, -t.r_next, 1.0 - t.r_next));
    sample.z.push_back(z_law.mu + z_sd * (w / sqrt_dt));
  }
}

inline CoupledSample simulate_coupled(const TransitionRecord& t, const ModelParams& params, std::size_t m,
                                      std::uint64_t key, int v_substeps = 1) {
  if (m < 2) throw InputError("simulate_coupled: m must be at least 2");
  CoupledSample s;
  s.key = key;
  NormalStream normal(key);
  extend_coupled(s, t, params, gaussian_step_params(t, params), m, normal, v_substeps);
  return s;
}

// ---------------------------------------------------------------------------
// Kernel estimators
// ---------------------------------------------------------------------------

inline double gaussian_kernel(double u, double h) { return normal_pdf(u / h) / h; }

/// E[k_h(Z - v)] for Z ~ N(mu, sigma^2): the N(mu, sigma^2 + h^2) density at v.
inline double gaussian_convolution(double v, const GaussianLaw& law, double h) {
  return normal_pdf(v, law.mu, std::sqrt(std::max(law.sigma2, 0.0) + h * h));
}

struct KdePoint {
  double value = 0.0;
  double standard_error = 0.0;  // of the Monte Carlo average
};

inline KdePoint cv_kde_evaluate(const CoupledSample& s, double v, const GaussianLaw& law, double h) {
  if (!(h > 0.0)) throw InputError("bandwidth must be positive");
  const std::size_t m = s.size();
  if (m == 0) throw InputError("empty sample");
  ExactAccumulator sum, sum_sq;
  for (std::size_t n = 0; n < m; ++n) {
    const double d = gaussian_kernel(s.v[n] - v, h) - gaussian_kernel(s.z[n] - v, h);
    sum.add(d);
    sum_sq.add(d * d);
  }
  const double md = static_cast<double>(m);
  const double mean = sum.value() / md;
  const double var = m > 1 ? std::max(sum_sq.value() / md - mean * mean, 0.0) * md / (md - 1.0) : 0.0;
  return {mean + gaussian_convolution(v, law, h), std::sqrt(var / md)};
}

inline double cv_kde_point(const CoupledSample& s, double v, const GaussianLaw& law, double h) {
  return cv_kde_evaluate(s, v, law, h).value;
}

/// Plain kernel estimate (1/m) sum k_h(V_n - v).
inline KdePoint crude_kde_evaluate(const std::vector<double>& values, double v, double h) {
  if (!(h > 0.0)) throw InputError("bandwidth must be positive");
  if (values.empty()) throw InputError("empty sample");
  ExactAccumulator sum, sum_sq;
  for (double x : values) {
    const double k = gaussian_kernel(x - v, h);
    sum.add(k);
    sum_sq.add(k * k);
  }
  const double md = static_cast<double>(values.size());
  const double mean = sum.value() / md;
  const double var = values.size() > 1 ? std::max(sum_sq.value() / md - mean * mean, 0.0) * md / (md - 1.0) : 0.0;
  return {mean, std::sqrt(var / md)};
}

// ---------------------------------------------------------------------------
// Error constants and bandwidth
// ---------------------------------------------------------------------------

struct MseConstants {
  double c1 = 0.0;
  double c2 = 0.0;
  double rho_z = 0.0;
  double rho_z_dd = 0.0;  // second derivative of the Z density at v
  double fourth_moment = 0.0;
};

/// Second derivative of the N(mu, sigma^2) density: rho (z^2 - 1) / sigma^2.
inline double gaussian_density_dd(double v, double mu, double sigma) {
  const double z = (v - mu) / sigma;
  return normal_pdf(v, mu, sigma) * (z * z - 1.0) / (sigma * sigma);
}

/**
 * C1 = rho_Z''(v)^2 / 4 (unit kernel variance) and
 * C2 = sqrt(3 rho_Z(v) / (32 (2 pi)^{3/2})) sqrt(E[(V - Z)^4]), the latter by the sample mean.
 */
inline MseConstants mse_constants(double v, const GaussianLaw& law, const CoupledSample& s) {
  const double sd = law.sigma();
  if (!(sd > 0.0)) throw InputError("mse_constants: sigma_Z must be positive");
  MseConstants c;
  c.rho_z = normal_pdf(v, law.mu, sd);
  c.rho_z_dd = gaussian_density_dd(v, law.mu, sd);
  c.c1 = 0.25 * c.rho_z_dd * c.rho_z_dd;
  ExactAccumulator q;
  for (std::size_t n = 0; n < s.size(); ++n) {
    const double d = s.v[n] - s.z[n];
    q.add(d * d * d * d);
  }
  c.fourth_moment = s.size() > 0 ? q.value() / static_cast<double>(s.size()) : 0.0;
  const double two_pi_32 = std::pow(2.0 * std::numbers::pi, 1.5);
  c.c2 = std::sqrt(c.rho_z * 3.0 / (32.0 * two_pi_32)) * std::sqrt(c.fourth_moment);
  return c;
}

enum class BandwidthRule { Optimal, SilvermanFallback, PerfectControlFloor };

struct Bandwidth {
  double h = 0.0;
  BandwidthRule rule = BandwidthRule::Optimal;
};

/// Minimizer of g(h) = C1 h^4 + C2 / (m h^{7/2}): h* = (7 C2 / (8 m C1))^{2/15}.
inline double optimal_bandwidth(double m, double c1, double c2) {
  if (!(m > 0.0)) throw InputError("optimal_bandwidth: m must be positive");
  if (!(c1 > 0.0) || !(c2 > 0.0)) throw InputError("optimal_bandwidth: C1 and C2 must be positive");
  return std::pow(7.0 * c2 / (8.0 * m * c1), 2.0 / 15.0);
}

/**
 * As optimal_bandwidth, with two fallbacks: C1 = 0 (inflection point) uses
 * 1.06 sigma_Z m^{-1/5}; C2 = 0 (V identical to Z) uses 1e-6 sigma_Z.
 */
inline Bandwidth select_bandwidth(double m, double c1, double c2, double sigma_z, Warnings* warnings = nullptr) {
  if (c1 > 0.0 && c2 > 0.0) {
    const double h = optimal_bandwidth(m, c1, c2);
    if (std::isfinite(h) && h > 0.0) return {h, BandwidthRule::Optimal};
  }
  if (!(c2 > 0.0)) return {1e-6 * sigma_z, BandwidthRule::PerfectControlFloor};
  warn(warnings, "C1 = 0, Silverman bandwidth used");
  return {1.06 * sigma_z * std::pow(m, -0.2), BandwidthRule::SilvermanFallback};
}

inline double mse_bound(double h, double m, double c1, double c2) {
  return c1 * h * h * h * h + c2 / (m * std::pow(h, 3.5));
}

inline double relative_mse(double bound, double rho_z) { return bound / (1.0 + rho_z * rho_z); }

// ---------------------------------------------------------------------------
// Adaptive estimate
// ---------------------------------------------------------------------------

struct DensityEstimate {
  double rho_hat = 0.0;
  double h_star = 0.0;
  std::size_t m_used = 0;
  double c1 = 0.0;
  double c2 = 0.0;
  double mse_bound = 0.0;
  double relative_mse = 0.0;
  double rho_z = 0.0;
  double standard_error = 0.0;
  BandwidthRule bandwidth_rule = BandwidthRule::Optimal;
  int rounds = 0;
  bool converged = false;
  bool degenerate = false;  // sigma_Z vanished; variance floor used
};

struct AdaptiveOptions {
  double tol = 0.1;
  std::size_t m0 = 50;
  std::size_t max_m = std::size_t{1} << 20;
  int v_substeps = 1;
};

/**
 * Doubles m, extending one sample stream, until the relative MSE certificate
 * is at most tol and the estimate is nonnegative, or max_m is reached.
 */
inline DensityEstimate adaptive_density(const TransitionRecord& t, const ModelParams& params, std::uint64_t key,
                                        const AdaptiveOptions& opt = {}) {
  if (!(opt.tol > 0.0)) throw InputError("adaptive_density: tol must be positive");
  if (opt.m0 < 2) throw InputError("adaptive_density: m0 must be at least 2");
  GaussianLaw law = gaussian_step_params(t, params);
  DensityEstimate est;
  if (!(law.sigma2 > kVarianceFloor)) {
    law.sigma2 = kVarianceFloor;
    est.degenerate = true;
  }
  CoupledSample sample;
  sample.key = key;
  NormalStream normal(key);
  std::size_t m = opt.m0;
  while (true) {
    extend_coupled(sample, t, params, law, m, normal, opt.v_substeps);
    const MseConstants c = mse_constants(t.v_next, law, sample);
    const Bandwidth bw = select_bandwidth(static_cast<double>(m), c.c1, c.c2, law.sigma());
    const KdePoint k = cv_kde_evaluate(sample, t.v_next, law, bw.h);
    est.rho_hat = k.value;
    est.standard_error = k.standard_error;
    est.h_star = bw.h;
    est.bandwidth_rule = bw.rule;
    est.m_used = m;
    est.c1 = c.c1;
    est.c2 = c.c2;
    est.rho_z = c.rho_z;
    est.mse_bound = mse_bound(bw.h, static_cast<double>(m), c.c1, c.c2);
    est.relative_mse = relative_mse(est.mse_bound, c.rho_z);
    ++est.rounds;
    if (est.relative_mse <= opt.tol && est.rho_hat >= 0.0) {
      est.converged = true;
      break;
    }
    if (2 * m > opt.max_m) break;
    m *= 2;
  }
  return est;
}

/**
 * Crude-KDE counterpart used as a baseline: same doubling rule, certificate
 * C1 h^4 + rho_Z R(k) / (m h) with R(k) = 1/(2 sqrt(pi)) and its minimizing h.
 */
inline DensityEstimate crude_adaptive_density(const TransitionRecord& t, const ModelParams& params, std::uint64_t key,
                                              const AdaptiveOptions& opt = {}) {
  GaussianLaw law = gaussian_step_params(t, params);
  DensityEstimate est;
  if (!(law.sigma2 > kVarianceFloor)) {
    law.sigma2 = kVarianceFloor;
    est.degenerate = true;
  }
  const double roughness = 1.0 / (2.0 * std::sqrt(std::numbers::pi));
  CoupledSample sample;
  NormalStream normal(key);
  std::size_t m = opt.m0;
  while (true) {
    extend_coupled(sample, t, params, law, m, normal, opt.v_substeps);
    const double sd = law.sigma();
    const double rho = normal_pdf(t.v_next, law.mu, sd);
    const double dd = gaussian_density_dd(t.v_next, law.mu, sd);
    const double c1 = 0.25 * dd * dd;
    const double md = static_cast<double>(m);
    const double h = c1 > 0.0 ? std::pow(roughness * rho / (4.0 * md * c1), 0.2) : 1.06 * sd * std::pow(md, -0.2);
    const KdePoint k = crude_kde_evaluate(sample.v, t.v_next, h);
    est.rho_hat = k.value;
    est.standard_error = k.standard_error;
    est.h_star = h;
    est.m_used = m;
    est.c1 = c1;
    est.rho_z = rho;
    est.mse_bound = c1 * h * h * h * h + rho * roughness / (md * h);
    est.relative_mse = relative_mse(est.mse_bound, rho);
    ++est.rounds;
    if (est.relative_mse <= opt.tol && est.rho_hat >= 0.0) {
      est.converged = true;
      break;
    }
    if (2 * m > opt.max_m) break;
    m *= 2;
  }
  return est;
}

// ---------------------------------------------------------------------------
// Exact-model log-likelihood
// ---------------------------------------------------------------------------

inline constexpr double kDensityFloor = 1e-12;

struct LoglikResult {
  double loglik = 0.0;
  double ci_lower = 0.0;
  double ci_upper = 0.0;
  std::vector<double> per_day;
  std::size_t transitions = 0;
  std::size_t floored_count = 0;
  std::size_t nonconverged_count = 0;
  std::size_t samples_used = 0;
};

/// Stream key of one transition; depends only on the seed, the day id and the step index.
inline std::uint64_t transition_key(std::uint64_t seed, const std::string& day_id, std::size_t i) {
  return stream_key(seed, fnv1a64(day_id), static_cast<std::uint64_t>(i));
}

/**
 * Sum of log rho_hat over every transition of every day (estimates floored at
 * 1e-12), with a 95% interval total +/- 1.96 sqrt(M s_d^2) from the sample
 * variance s_d^2 of the M per-day sums.
 */
inline LoglikResult model_loglik(const std::vector<PreparedDay>& days, std::uint64_t seed,
                                 const AdaptiveOptions& opt = {}, unsigned workers = 1) {
  struct DayTally {
    ExactAccumulator sum;
    std::size_t n = 0, floored = 0, nonconverged = 0, samples = 0;
  };
  std::vector<DayTally> tally(days.size());
  std::vector<std::pair<std::size_t, std::size_t>> jobs;
  for (std::size_t j = 0; j < days.size(); ++j)
    for (std::size_t i = 1; i < days[j].size(); ++i) jobs.emplace_back(j, i);
  std::vector<double> logs(jobs.size());
  std::vector<std::uint8_t> floored(jobs.size()), nonconv(jobs.size());
  std::vector<std::size_t> used(jobs.size());
  parallel_for(jobs.size(), workers, [&](std::size_t k) {
    const auto [j, i] = jobs[k];
    const PreparedDay& d = days[j];
    const TransitionRecord t = transition_at(d, j, i);
    const DensityEstimate e = adaptive_density(t, d.params, transition_key(seed, d.day->day_id, i), opt);
    const bool fl = !(e.rho_hat > kDensityFloor);
    logs[k] = std::log(fl ? kDensityFloor : e.rho_hat);
    floored[k] = fl;
    nonconv[k] = !e.converged;
    used[k] = e.m_used;
  });
  for (std::size_t k = 0; k < jobs.size(); ++k) {
    DayTally& d = tally[jobs[k].first];
    d.sum.add(logs[k]);
    ++d.n;
    d.floored += floored[k];
    d.nonconverged += nonconv[k];
    d.samples += used[k];
  }

  LoglikResult res;
  ExactAccumulator total;
  for (const auto& d : tally) {
    res.per_day.push_back(d.sum.value());
    total.add(d.sum);
    res.transitions += d.n;
    res.floored_count += d.floored;
    res.nonconverged_count += d.nonconverged;
    res.samples_used += d.samples;
  }
  res.loglik = total.value();
  const double M = static_cast<double>(res.per_day.size());
  double half = 0.0;
  if (res.per_day.size() >= 2) {
    const double mean = res.loglik / M;
    ExactAccumulator ss;
    for (double x : res.per_day) ss.add((x - mean) * (x - mean));
    const double s2 = ss.value() / (M - 1.0);
    half = 1.96 * std::sqrt(M * s2);
  }
  res.ci_lower = res.loglik - half;
  res.ci_upper = res.loglik + half;
  return res;
}

}  // namespace boundsde
