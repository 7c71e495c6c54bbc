// Acceptance checks: one PASS/FAIL/SKIPPED line per criterion, exit status 1 on any FAIL.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "boundsde/boundsde.hpp"
#include "../test_support.hpp"

using namespace boundsde;
namespace ts = testsupport;

namespace {

enum class Status { Pass, Fail, Skipped };

struct Outcome {
  Status status = Status::Pass;
  std::string detail;
};

class Check {
 public:
  void require(bool ok, const std::string& what) {
    if (!ok) {
      failed_ = true;
      if (!failures_.empty()) failures_ += "; ";
      failures_ += what;
    }
  }
  void note(const std::string& s) {
    if (!notes_.empty()) notes_ += ", ";
    notes_ += s;
  }
  Outcome outcome() const { return {failed_ ? Status::Fail : Status::Pass, failed_ ? failures_ + " | " + notes_ : notes_}; }

 private:
  bool failed_ = false;
  std::string failures_, notes_;
};

std::string num(double x) {
  std::ostringstream s;
  s.precision(6);
  s << x;
  return s.str();
}

unsigned workers() { return std::max(1u, std::thread::hardware_concurrency()); }

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

const ModelParams kTruth{20.0, 0.15, 0.07};

std::vector<DaySeries> synthetic_100() { return ts::synthetic_days(100, kTruth, 7); }

// ---------------------------------------------------------------------------

Outcome criterion1() {
  Check c;
  const double irr = solar::irradiance(1.0);
  const double dec = solar::declination(81);
  const double eot = solar::equation_of_time(81);
  const double am = solar::air_mass(90.0);
  c.require(std::fabs(irr - 0.9471) <= 1e-4, "irradiance(1) = " + num(irr));
  c.require(std::fabs(dec) <= 1e-9, "declination(81) = " + num(dec));
  c.require(eot == -7.53, "EoT(81) = " + num(eot));
  c.require(am >= 0.999 && am <= 1.0, "air_mass(90) = " + num(am));
  c.note("irradiance " + num(irr) + ", EoT " + num(eot) + ", air mass " + num(am));
  return c.outcome();
}

Outcome criterion2() {
  Check c;
  double worst = 0.0;
  int points = 0;
  for (double theta : {2.0, 10.0, 20.0, 40.0, 80.0})
    for (double a : {0.5, 2.0, 5.0, 10.0})
      for (double r : {0.1, 0.3, 0.5, 0.7, 0.9}) {
        const double v0 = 0.05, dt = 10.0 / 1440.0;
        const MomentPair got = v_moment_step({v0, v0 * v0}, StepCoefficients::constant(theta, r, a, dt));
        const MomentPair want = ts::v_moments_exact(v0, v0 * v0, theta, a, r, dt);
        worst = std::max({worst, std::fabs(got.m1 - want.m1) / std::fabs(want.m1),
                          std::fabs(got.m2 - want.m2) / std::fabs(want.m2)});
        ++points;
      }
  c.require(points == 100 && worst < 1e-6, "worst relative error " + num(worst));

  auto error_with = [](int substeps) {
    StepCoefficients k = StepCoefficients::constant(30.0, 0.4, 4.0, 0.05, substeps);
    k.adaptive = false;
    const MomentPair got = v_moment_step({0.1, 0.02}, k);
    const MomentPair want = ts::v_moments_exact(0.1, 0.02, 30.0, 4.0, 0.4, 0.05);
    return std::fabs(got.m2 - want.m2);
  };
  const double ratio = error_with(16) / error_with(32);
  c.require(std::fabs(ratio - 16.0) <= 3.0, "convergence ratio " + num(ratio));
  c.note("worst rel err " + num(worst) + ", ratio " + num(ratio));
  return c.outcome();
}

Outcome criterion3() {
  Check c;
  double worst_mass = 0.0, worst_roundtrip = 0.0;
  int grid = 0;
  for (double eps : {0.02, 0.1})
    for (double mu : {-0.4, -0.2, 0.0, 0.2, 0.4})
      for (double s2 : {0.005, 0.01, 0.02, 0.04, 0.08}) {
        ++grid;
        const double lo = -1.0 + eps, hi = 1.0 - eps;
        for (SurrogateKind kind : {SurrogateKind::Beta, SurrogateKind::TruncatedNormal}) {
          if (!surrogate_feasible(kind, mu, s2, eps)) {
            c.require(false, "infeasible grid point mu=" + num(mu) + " s2=" + num(s2));
            continue;
          }
          const double mass =
              ts::integrate([&](double v) { return std::exp(surrogate_logpdf(v, kind, mu, s2, eps)); }, lo, hi);
          worst_mass = std::max(worst_mass, std::fabs(mass - 1.0));
          for (double q : {0.001, 0.05, 0.3, 0.5, 0.7, 0.95, 0.999}) {
            const double x = surrogate_quantile(q, kind, mu, s2, eps);
            worst_roundtrip = std::max(worst_roundtrip, std::fabs(surrogate_cdf(x, kind, mu, s2, eps) - q));
          }
        }
      }
  c.require(grid == 50 && worst_mass <= 1e-6, "worst mass error " + num(worst_mass));
  c.require(worst_roundtrip < 1e-8, "worst round-trip " + num(worst_roundtrip));
  c.note("mass err " + num(worst_mass) + ", round-trip " + num(worst_roundtrip));
  return c.outcome();
}

std::optional<CalibrationReport> g_calibrated;

Outcome criterion4() {
  Check c;
  const auto t0 = std::chrono::steady_clock::now();
  const auto days = synthetic_100();
  CalibrationOptions opt;
  opt.workers = workers();
  for (double eps_init : {0.02, 0.07}) {
    const CalibrationReport rep = calibrate(days, eps_init, SurrogateKind::Beta, opt);
    const std::string tag = "eps_init " + num(eps_init) + ": ";
    c.require(rep.converged && !rep.trace.empty() && rep.trace.back().abs_delta <= 1e-3, tag + "not converged");
    c.require(std::fabs(rep.theta0_hat / kTruth.theta0 - 1.0) <= 0.15, tag + "theta0 " + num(rep.theta0_hat));
    c.require(std::fabs(rep.alpha_hat / kTruth.alpha - 1.0) <= 0.15, tag + "alpha " + num(rep.alpha_hat));
    c.require(std::fabs(rep.epsilon_hat - kTruth.epsilon) <= 0.02, tag + "eps " + num(rep.epsilon_hat));
    c.note(tag + "(" + num(rep.theta0_hat) + ", " + num(rep.alpha_hat) + ", " + num(rep.epsilon_hat) + ") in " +
           std::to_string(rep.trace.size()) + " iterations");
    if (eps_init == 0.07) g_calibrated = rep;
  }
  const double secs = seconds_since(t0);
  c.require(secs < 300.0, "runtime " + num(secs) + " s");
  c.note(num(secs) + " s");
  return c.outcome();
}

const char* env(const char* name) {
  const char* v = std::getenv(name);
  return v && *v ? v : nullptr;
}

Outcome criterion5() {
  const char* dir = env("BOUNDSDE_UTE_DIR");
  if (!dir) return {Status::Skipped, "set BOUNDSDE_UTE_DIR to a directory with production.csv, forecast.csv, exclusions.txt"};
  Check c;
  const std::filesystem::path base(dir);
  solar::SolarSite site;
  site.latitude_deg = env("BOUNDSDE_UTE_LATITUDE") ? std::stod(env("BOUNDSDE_UTE_LATITUDE")) : -32.5;
  site.longitude_deg = env("BOUNDSDE_UTE_LONGITUDE") ? std::stod(env("BOUNDSDE_UTE_LONGITUDE")) : -56.0;
  site.gmt_offset_hours = -3.0;
  const double capacity = 228.8, grid = 10.0;
  std::vector<int> year(365);
  for (int d = 1; d <= 365; ++d) year[d - 1] = d;
  site.panel_area_m2 = solar::calibrate_k(capacity, site, year, grid);
  const RawSeries prod = load_production((base / "production.csv").string());
  const RawSeries fcst = load_forecast((base / "forecast.csv").string());
  auto bounds = [&](int dn) { return solar::upper_bound_series(site, dn, grid); };
  auto days = normalize_and_align(prod, fcst, capacity, bounds);
  days = exclude_days(days, load_exclusion_list((base / "exclusions.txt").string()));
  c.require(days.size() == 206, "kept " + std::to_string(days.size()) + " days");
  const auto set1 = split_alternating(days).set1;
  CalibrationOptions opt;
  opt.workers = workers();
  struct Target {
    SurrogateKind kind;
    double eps, theta0, alpha;
  };
  for (const Target& t : {Target{SurrogateKind::Beta, 0.074, 22.50, 0.16},
                          Target{SurrogateKind::TruncatedNormal, 0.066, 21.75, 0.16}}) {
    const CalibrationReport rep = calibrate(set1, 0.07, t.kind, opt);
    const std::string tag = to_string(t.kind) + ": ";
    c.require(std::fabs(rep.epsilon_hat - t.eps) <= 0.01, tag + "eps " + num(rep.epsilon_hat));
    c.require(std::fabs(rep.theta0_hat / t.theta0 - 1.0) <= 0.10, tag + "theta0 " + num(rep.theta0_hat));
    c.require(std::fabs(rep.alpha_hat / t.alpha - 1.0) <= 0.10, tag + "alpha " + num(rep.alpha_hat));
    c.note(tag + "(" + num(rep.theta0_hat) + ", " + num(rep.alpha_hat) + ", " + num(rep.epsilon_hat) + ")");
  }
  return c.outcome();
}

double variance(const std::vector<double>& x) { return ts::sample_variance(x); }

Outcome criterion6() {
  Check c;
  const auto t0 = std::chrono::steady_clock::now();

  // From v_prev = 0 one Euler step gives V ~ N(0, 2 a r (1 - r) dt) exactly.
  {
    const ModelParams p{20.0, 0.05, 0.07};
    TransitionRecord t;
    t.r_prev = t.r_next = 0.5;
    t.theta_plus_prev = t.theta_plus_next = 20.0;
    t.dt = 10.0 / 1440.0;
    const double sd_v = std::sqrt(2.0 * p.alpha_theta0() * 0.25 * t.dt);
    const std::size_t m = 100000;
    const CoupledSample s = simulate_coupled(t, p, m, stream_key(61));
    const GaussianLaw law = gaussian_step_params(t, p);
    // at the inflection point of the V density the smoothing bias is O(h^4)
    t.v_next = sd_v;
    const MseConstants k = mse_constants(t.v_next, law, s);
    const double h = select_bandwidth(static_cast<double>(m), k.c1, k.c2, law.sigma()).h;
    const KdePoint est = cv_kde_evaluate(s, t.v_next, law, h);
    const double truth = normal_pdf(t.v_next, 0.0, sd_v);
    const double bias = std::fabs(normal_pdf(t.v_next, 0.0, std::hypot(sd_v, h)) - truth);
    c.require(std::fabs(est.value - truth) <= 3.0 * est.standard_error,
              "6a: estimate " + num(est.value) + " vs " + num(truth) + " (se " + num(est.standard_error) + ")");
    c.note("6a |err|/se " + num(std::fabs(est.value - truth) / est.standard_error) + " (smoothing bias " +
           num(bias / est.standard_error) + " se)");
  }

  // Variance of CV vs crude KDE at m = 200 over 100 calibrated-parameter transitions.
  {
    const ModelParams p = kTruth;
    const auto source1 = ts::synthetic_days(20, p, 11);
    const auto prepared = prepare_days(source1, p);
    const auto all = transitions(prepared);
    const std::size_t stride = all.size() / 100;
    std::vector<int> wins(100, 0);
    parallel_for(100, workers(), [&](std::size_t n) {
      const TransitionRecord& t = all[n * stride];
      GaussianLaw law = gaussian_step_params(t, p);
      law.sigma2 = std::max(law.sigma2, kVarianceFloor);
      const auto pilot = simulate_coupled(t, p, 200, stream_key(62, n));
      const MseConstants k = mse_constants(t.v_next, law, pilot);
      const double h = select_bandwidth(200.0, k.c1, k.c2, law.sigma()).h;
      std::vector<double> cv, crude;
      for (std::uint64_t rep = 0; rep < 200; ++rep) {
        const auto s = simulate_coupled(t, p, 200, stream_key(63, n, rep));
        cv.push_back(cv_kde_point(s, t.v_next, law, h));
        crude.push_back(crude_kde_evaluate(s.v, t.v_next, h).value);
      }
      wins[n] = variance(cv) < variance(crude);
    });
    int total = 0;
    for (int w : wins) total += w;
    c.require(total >= 95, "6b: CV variance lower on " + std::to_string(total) + "/100");
    c.note("6b " + std::to_string(total) + "/100");
  }

  // Matched transition: both estimators certify relative MSE <= 0.1; CV needs fewer samples.
  {
    const ModelParams p{20.0, 0.01, 0.07};
    TransitionRecord t;
    t.r_prev = t.r_next = 0.5;
    t.theta_plus_prev = t.theta_plus_next = 20.0;
    t.dt = 10.0 / 1440.0;
    const GaussianLaw law = gaussian_step_params(t, p);
    t.v_next = law.mu + 2.0 * law.sigma();
    const DensityEstimate cv = adaptive_density(t, p, 77);
    const DensityEstimate crude = crude_adaptive_density(t, p, 77);
    c.require(cv.converged && crude.converged && cv.m_used < crude.m_used,
              "6c: CV m " + std::to_string(cv.m_used) + " vs crude m " + std::to_string(crude.m_used));
    c.note("6c m " + std::to_string(cv.m_used) + " vs " + std::to_string(crude.m_used));
  }

  const double secs = seconds_since(t0);
  c.require(secs < 120.0, "runtime " + num(secs) + " s");
  c.note(num(secs) + " s");
  return c.outcome();
}

Outcome criterion7() {
  Check c;
  int checked = 0;
  for (double c1 : {1e-3, 1.0, 250.0})
    for (double c2 : {1e-4, 0.3, 40.0})
      for (double m : {50.0, 1000.0, 1e5}) {
        const double h = optimal_bandwidth(m, c1, c2);
        const double g = mse_bound(h, m, c1, c2);
        c.require(g <= mse_bound(h * 1.01, m, c1, c2) && g <= mse_bound(h * 0.99, m, c1, c2),
                  "minimizer fails at m=" + num(m));
        const double ratio = optimal_bandwidth(2.0 * m, c1, c2) / h;
        c.require(std::fabs(ratio - std::pow(2.0, -2.0 / 15.0)) <= 1e-12, "scaling ratio " + num(ratio));
        ++checked;
      }
  c.note(std::to_string(checked) + " (C1, C2, m) points");
  return c.outcome();
}

Outcome criterion8() {
  Check c;
  const auto days = ts::synthetic_days(3, kTruth, 21);
  double worst_z = 0.0, worst_free_z = 0.0, slowest = 0.0;
  std::size_t beyond = 0, beyond_free = 0, points = 0;
  for (const auto& d : days) {
    const auto t0 = std::chrono::steady_clock::now();
    const PreparedDay pd = forecast_error_series(d, kTruth);
    const PathBundle b = simulate_x_paths(pd, 10000, 8, workers());
    slowest = std::max(slowest, seconds_since(t0));
    bool inside = true;
    // first index at which each path sits on a boundary, i.e. was projected
    std::vector<std::size_t> first_projected(b.x.size(), d.size());
    for (std::size_t n = 0; n < b.x.size(); ++n)
      for (std::size_t i = 0; i < d.size(); ++i) {
        const double x = b.x[n][i];
        inside = inside && x >= 0.0 && x <= d.h[i];
        if (i > 0 && (x == 0.0 || x == d.h[i]) && first_projected[n] == d.size()) first_projected[n] = i;
      }
    c.require(inside, d.day_id + ": path left [0, h]");
    const std::size_t earliest = *std::min_element(first_projected.begin(), first_projected.end());
    for (std::size_t i = 1; i < d.size(); ++i) {
      std::vector<double> col(b.x.size());
      for (std::size_t n = 0; n < b.x.size(); ++n) col[n] = b.x[n][i];
      const double se = std::sqrt(variance(col) / static_cast<double>(col.size()));
      const double gap = std::fabs(ts::sample_mean(col) - d.p[i]);
      const double z = se > 0.0 ? gap / se : (gap == 0.0 ? 0.0 : HUGE_VAL);
      const bool free = i < earliest;
      ++points;
      worst_z = std::max(worst_z, z);
      beyond += z >= 4.0;
      if (free) {
        worst_free_z = std::max(worst_free_z, z);
        beyond_free += z >= 4.0;
      }
    }
  }
  c.require(worst_z < 4.0, std::to_string(beyond) + "/" + std::to_string(points) + " points with |mean - p| >= 4 SE (worst " +
                               num(worst_z) + " SE)");
  c.require(slowest < 60.0, "slowest day " + num(slowest) + " s");
  c.note("points before any projection: " + std::to_string(beyond_free) + " beyond 4 SE, worst " + num(worst_free_z) +
         " SE; slowest day " + num(slowest) + " s");
  return c.outcome();
}

double band_coverage(const BandLevel& band, const std::vector<std::vector<double>>& paths) {
  double sum = 0.0;
  for (std::size_t i = 1; i < band.x_lower.size(); ++i) {
    std::size_t in = 0;
    for (const auto& x : paths) in += x[i] >= band.x_lower[i] && x[i] <= band.x_upper[i];
    sum += static_cast<double>(in) / static_cast<double>(paths.size());
  }
  return sum / static_cast<double>(band.x_lower.size() - 1);
}

Outcome criterion9() {
  Check c;
  const ModelParams p = g_calibrated ? g_calibrated->params() : kTruth;
  c.note("params (" + num(p.theta0) + ", " + num(p.alpha) + ", " + num(p.epsilon) + ")");
  const auto templates = synthetic_templates(6, ts::montevideo(), 228.8, 17);
  int projected_days = 0;
  for (const auto& d : templates) {
    const PreparedDay pd = forecast_error_series(d, p);
    const BandSeries bands = confidence_bands(pd, SurrogateKind::Beta, {0.5, 0.9, 0.99});
    const BandLevel& b90 = bands.levels[1];

    std::vector<std::vector<double>> model_paths(10000);
    parallel_for(model_paths.size(), workers(),
                 [&](std::size_t s) { model_paths[s] = simulate_v_days({d}, p, stream_key(9, s))[0].y; });
    const double model_cov = band_coverage(b90, model_paths);
    c.require(model_cov >= 0.85 && model_cov <= 0.95, d.day_id + ": model-path coverage " + num(model_cov));
    std::string line = d.day_id + " " + num(model_cov);

    const bool inside = std::all_of(pd.raw_ratio.begin(), pd.raw_ratio.end(),
                                    [&](double q) { return is_inner(q, p.epsilon); });
    if (inside) {
      const double euler_cov = band_coverage(b90, simulate_x_paths(pd, 10000, 9, workers()).x);
      c.require(euler_cov >= 0.85 && euler_cov <= 0.95, d.day_id + ": projected-Euler coverage " + num(euler_cov));
      line += "/" + num(euler_cov);
      ++projected_days;
    }
    c.note(line);

    bool nested = true;
    for (std::size_t i = 0; i < pd.size(); ++i)
      for (std::size_t k = 1; k < bands.levels.size(); ++k)
        nested = nested && bands.levels[k].x_lower[i] <= bands.levels[k - 1].x_lower[i] &&
                 bands.levels[k].x_upper[i] >= bands.levels[k - 1].x_upper[i] &&
                 bands.levels[k - 1].x_lower[i] <= bands.levels[k - 1].x_upper[i];
    c.require(nested, d.day_id + ": bands not nested");
  }
  c.require(projected_days >= 2, "fewer than two days with the forecast inside the thresholds");
  return c.outcome();
}

Outcome criterion10() {
  Check c;
  const auto days = ts::synthetic_days(6, kTruth, 31);
  const auto prepared = prepare_days(days, kTruth);
  const LoglikResult base = model_loglik(prepared, 5, {}, workers());

  std::vector<DaySeries> doubled = days;
  doubled.insert(doubled.end(), days.begin(), days.end());
  const LoglikResult twice = model_loglik(prepare_days(doubled, kTruth), 5, {}, workers());
  c.require(twice.loglik == 2.0 * base.loglik, "duplication gives " + num(twice.loglik) + " vs 2 x " + num(base.loglik));

  c.require(base.ci_lower < base.loglik && base.loglik < base.ci_upper, "CI does not strictly contain the estimate");

  std::vector<DaySeries> reversed(days.rbegin(), days.rend());
  const LoglikResult rev = model_loglik(prepare_days(reversed, kTruth), 5, {}, workers());
  std::vector<double> a = base.per_day, b = rev.per_day;
  std::reverse(b.begin(), b.end());
  c.require(a == b && rev.loglik == base.loglik, "per-day contributions change under permutation");
  c.note("loglik " + num(base.loglik) + " CI [" + num(base.ci_lower) + ", " + num(base.ci_upper) + "]");
  return c.outcome();
}

}  // namespace

int main() {
  const std::vector<std::function<Outcome()>> criteria{criterion1, criterion2, criterion3, criterion4, criterion5,
                                                       criterion6, criterion7, criterion8, criterion9, criterion10};
  bool any_fail = false;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    Outcome o;
    try {
      o = criteria[k]();
    } catch (const std::exception& e) {
      o = {Status::Fail, std::string("exception: ") + e.what()};
    }
    const char* label = o.status == Status::Pass ? "PASS" : o.status == Status::Fail ? "FAIL" : "SKIPPED";
    any_fail = any_fail || o.status == Status::Fail;
    std::cout << "criterion " << k + 1 << ": " << label << " - " << o.detail << std::endl;
  }
  return any_fail ? 1 : 0;
}
