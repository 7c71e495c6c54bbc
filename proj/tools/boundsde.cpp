// boundsde command-line tool: every pipeline stage reads and writes files so
// that each subcommand can be run on its own.

#include "boundsde/boundsde.hpp"

#include <CLI11.hpp>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace boundsde;

namespace {

enum Exit : int { kOk = 0, kUsage = 1, kConfig = 2, kData = 3, kNonconvergence = 4 };

struct NotConverged : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Run {
  Config cfg;
  std::string hash;
  std::uint64_t seed = 1;
  unsigned workers = 1;
  fs::path out_dir;
};

using Overrides = std::vector<std::pair<std::string, std::string>>;

/// Command-line flags take precedence over the file; the hash covers the effective configuration.
Run load_run(const std::string& config_path, const Overrides& overrides) {
  Run r;
  r.cfg = Config::load(config_path);
  for (const auto& [key, value] : overrides)
    if (!value.empty()) r.cfg.set(key, value);
  r.cfg.resolve();
  const fs::path base = fs::path(config_path).parent_path();
  for (const char* key : {"data.production", "data.forecast", "data.exclusions", "data.aligned", "run.output_dir"}) {
    if (!r.cfg.has(key) || r.cfg.get(key).empty()) continue;
    const fs::path p(r.cfg.get(key));
    if (p.is_relative()) r.cfg.set(key, (base / p).lexically_normal().string());
  }
  r.hash = r.cfg.hash();
  r.seed = r.cfg.get_u64("run.seed");
  const long long w = r.cfg.get_int("run.workers");
  if (w < 1) throw ConfigError("config field 'run.workers' must be at least 1");
  r.workers = static_cast<unsigned>(w);
  r.out_dir = r.cfg.get("run.output_dir");
  if (r.out_dir.empty()) r.out_dir = ".";
  fs::create_directories(r.out_dir);
  return r;
}

fs::path output_path(const Run& r, const std::string& override_path, const std::string& name) {
  fs::path p = override_path.empty() ? r.out_dir / name : fs::path(override_path);
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  return p;
}

void write_file(const fs::path& path, const Run& r, const std::string& body) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << provenance_line(r.hash, r.seed) << '\n' << body;
  if (!out) throw DataError("write failed: " + path.string());
  std::cerr << "wrote " << path.string() << '\n';
}

void write_json(const fs::path& path, const Run& r, json j) {
  j["config_hash"] = r.hash;
  j["seed"] = r.seed;
  write_file(path, r, j.dump(2) + "\n");
}

/// JSON written by this tool, skipping the provenance comment.
json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  std::string line, body;
  while (std::getline(in, line))
    if (line.rfind('#', 0) != 0) body += line + '\n';
  try {
    return json::parse(body);
  } catch (const json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
}

std::string fmt(double x) { return format_double(x); }

json warnings_json(const Warnings& w) { return json(w.messages); }

double require_positive(const Config& c, const std::string& key) {
  const double v = c.get_double(key);
  if (!(v > 0.0)) throw ConfigError("config field '" + key + "' must be positive");
  return v;
}

solar::SolarSite site_from(const Config& c) {
  solar::SolarSite s;
  s.latitude_deg = c.get_double("site.latitude");
  s.longitude_deg = c.get_double("site.longitude");
  s.gmt_offset_hours = c.get_double("site.gmt_offset");
  s.solar_constant_w_per_m2 = require_positive(c, "site.solar_constant");
  if (c.get("site.k") == "auto") {
    std::vector<int> year(365);
    for (int d = 1; d <= 365; ++d) year[d - 1] = d;
    s.panel_area_m2 =
        solar::calibrate_k(require_positive(c, "data.capacity_mw"), s, year, c.get_double("data.grid_minutes"));
  } else {
    s.panel_area_m2 = require_positive(c, "site.k");
  }
  s.validate();
  return s;
}

SurrogateKind surrogate_from(const Config& c) {
  try {
    return parse_surrogate_kind(c.get("model.surrogate"));
  } catch (const InputError& e) {
    throw ConfigError(e.what());
  }
}

CalibrationOptions options_from(const Run& r) {
  const Config& c = r.cfg;
  CalibrationOptions o;
  o.eps_tol = require_positive(c, "model.eps_tol");
  o.max_iterations = static_cast<int>(c.get_int("model.max_iterations"));
  if (o.max_iterations < 1) throw ConfigError("config field 'model.max_iterations' must be at least 1");
  o.eps_lower = require_positive(c, "model.eps_lower");
  o.eps_upper = require_positive(c, "model.eps_upper");
  if (!(o.eps_lower < o.eps_upper) || o.eps_upper > 0.25)
    throw ConfigError("need 0 < model.eps_lower < model.eps_upper <= 0.25");
  o.eps_search_tol = require_positive(c, "model.eps_search_tol");
  o.simplex.diameter_tol = require_positive(c, "model.simplex_tol");
  o.simplex.max_evaluations = static_cast<int>(c.get_int("model.max_evaluations"));
  if (o.simplex.max_evaluations < 3) throw ConfigError("config field 'model.max_evaluations' must be at least 3");
  o.workers = r.workers;
  return o;
}

AdaptiveOptions kde_options_from(const Config& c) {
  AdaptiveOptions o;
  o.tol = require_positive(c, "model.kde_tol");
  const long long m0 = c.get_int("model.kde_m0");
  if (m0 < 2) throw ConfigError("config field 'model.kde_m0' must be at least 2");
  o.m0 = static_cast<std::size_t>(m0);
  return o;
}

fs::path aligned_path(const Run& r) {
  const std::string& p = r.cfg.get("data.aligned");
  return p.empty() ? r.out_dir / "aligned.csv" : fs::path(p);
}

std::vector<DaySeries> load_days(const Run& r) {
  const fs::path path = aligned_path(r);
  std::ifstream in(path);
  if (!in) throw DataError("cannot open aligned data " + path.string() + " (run `ingest` first)");
  std::vector<DaySeries> days = read_aligned_csv(in, path.string());
  const std::string& which = r.cfg.get("data.dataset");
  if (which == "all") return days;
  const DataSplit split = split_alternating(days);
  if (which == "1") return split.set1;
  if (which == "2") return split.set2;
  throw ConfigError("config field 'data.dataset' must be all, 1 or 2");
}

struct ParamArgs {
  std::string file;
  double theta0 = 0.0, alpha = 0.0, epsilon = 0.0;
};

void add_param_options(CLI::App* sub, ParamArgs& a) {
  sub->add_option("--params", a.file, "calibration JSON providing theta0, alpha, epsilon");
  sub->add_option("--theta0", a.theta0, "override theta0");
  sub->add_option("--alpha", a.alpha, "override alpha");
  sub->add_option("--epsilon", a.epsilon, "override epsilon");
}

ModelParams resolve_params(const ParamArgs& a) {
  ModelParams p{0.0, 0.0, 0.0};
  if (!a.file.empty()) {
    const json j = read_json(a.file);
    try {
      p = {j.at("theta0").get<double>(), j.at("alpha").get<double>(), j.at("epsilon").get<double>()};
    } catch (const json::exception& e) {
      throw ParseError(a.file + ": " + e.what());
    }
  }
  if (a.theta0 > 0.0) p.theta0 = a.theta0;
  if (a.alpha > 0.0) p.alpha = a.alpha;
  if (a.epsilon > 0.0) p.epsilon = a.epsilon;
  if (!(p.theta0 > 0.0 && p.alpha > 0.0 && p.epsilon > 0.0))
    throw ConfigError("model parameters required: pass --params or all of --theta0, --alpha, --epsilon");
  p.validate();
  return p;
}

json params_json(const ModelParams& p) { return {{"theta0", p.theta0}, {"alpha", p.alpha}, {"epsilon", p.epsilon}}; }

std::vector<double> parse_list(const std::string& s, const std::string& what) {
  std::vector<double> out;
  for (auto f : detail::split(s, ',')) {
    double v = 0.0;
    if (!detail::parse_double(f, v)) throw ConfigError("malformed " + what + " list '" + s + "'");
    out.push_back(v);
  }
  return out;
}

/// "lo:hi:n" as n evenly spaced values.
std::vector<double> parse_range(const std::string& s, const std::string& what) {
  const auto f = detail::split(s, ':');
  double lo = 0.0, hi = 0.0, n = 0.0;
  if (f.size() != 3 || !detail::parse_double(f[0], lo) || !detail::parse_double(f[1], hi) ||
      !detail::parse_double(f[2], n) || n < 1 || n != std::floor(n) || hi < lo)
    throw ConfigError("malformed " + what + " range '" + s + "' (expected lo:hi:n)");
  std::vector<double> out;
  const auto count = static_cast<std::size_t>(n);
  for (std::size_t i = 0; i < count; ++i)
    out.push_back(count == 1 ? lo : lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(count - 1));
  return out;
}

json report_json(const CalibrationReport& rep) {
  json trace = json::array();
  for (const auto& it : rep.trace) {
    trace.push_back({{"eps_old", it.eps_old},
                     {"eps_new", it.eps_new},
                     {"abs_delta", it.abs_delta},
                     {"theta0", it.theta0},
                     {"alpha", it.alpha},
                     {"init_theta0", it.init_theta0},
                     {"init_theta0alpha", it.init_theta0alpha},
                     {"neg_loglik_inner", it.neg_loglik_inner},
                     {"neg_loglik_boundary", it.neg_loglik_boundary},
                     {"inner_percent", it.inner_percent},
                     {"boundary_percent", it.boundary_percent}});
  }
  return {{"surrogate", to_string(rep.kind)},
          {"theta0", rep.theta0_hat},
          {"alpha", rep.alpha_hat},
          {"epsilon", rep.epsilon_hat},
          {"epsilon_init", rep.epsilon_init},
          {"neg_loglik", rep.neg_loglik},
          {"init_theta0", rep.init_theta0},
          {"init_alpha", rep.init_alpha},
          {"init_neg_loglik", rep.init_neg_loglik},
          {"inner_percent", rep.inner_percent},
          {"boundary_percent", rep.boundary_percent},
          {"iterations", rep.trace.size()},
          {"evaluations", rep.evaluations},
          {"converged", rep.converged},
          {"optimizer_converged", rep.optimizer_converged},
          {"infeasible_terms", rep.infeasible_terms},
          {"trace", trace},
          {"warnings", warnings_json(rep.warnings)}};
}

// ---------------------------------------------------------------------------
// Subcommands
// ---------------------------------------------------------------------------

void cmd_compute_bound(const Run& r, int from, int to, const std::string& out) {
  if (from < 1 || to > 366 || from > to) throw ConfigError("day range must satisfy 1 <= from <= to <= 366");
  const solar::SolarSite site = site_from(r.cfg);
  const double grid = r.cfg.get_double("data.grid_minutes");
  std::ostringstream csv;
  csv << "# k=" << fmt(site.panel_area_m2) << "\nday,time_local,h,h_dot\n";
  for (int d = from; d <= to; ++d) {
    const solar::BoundSeries b = solar::upper_bound_series(site, d, grid);
    for (std::size_t i = 0; i < b.times.size(); ++i)
      csv << d << ',' << fmt(b.times[i]) << ',' << fmt(b.h[i]) << ',' << fmt(b.h_dot[i]) << '\n';
  }
  write_file(output_path(r, out, "bound.csv"), r, csv.str());
}

void cmd_ingest(const Run& r) {
  const Config& c = r.cfg;
  const solar::SolarSite site = site_from(c);
  const double capacity = require_positive(c, "data.capacity_mw");
  const double grid = require_positive(c, "data.grid_minutes");
  const RawSeries prod = load_production(c.get("data.production"));
  const RawSeries fcst = load_forecast(c.get("data.forecast"));
  AlignReport rep;
  auto bounds = [&](int dn) { return solar::upper_bound_series(site, dn, grid); };
  std::vector<DaySeries> days = normalize_and_align(prod, fcst, capacity, bounds, &rep);
  const std::size_t aligned = days.size();
  if (!c.get("data.exclusions").empty())
    days = exclude_days(days, load_exclusion_list(c.get("data.exclusions")), &rep.warnings);
  if (days.empty()) throw DataError("no usable days after alignment and exclusion");

  std::ostringstream csv;
  write_aligned_csv(csv, days);
  write_file(aligned_path(r), r, csv.str());
  write_json(r.out_dir / "ingest.json", r,
             {{"k", site.panel_area_m2},
              {"production_frequency_minutes", prod.frequency_minutes},
              {"forecast_frequency_minutes", fcst.frequency_minutes},
              {"production_gaps", prod.gaps},
              {"days_aligned", aligned},
              {"days_skipped", rep.days_skipped},
              {"days_kept", days.size()},
              {"clipped_y", rep.clipped_y},
              {"clipped_p", rep.clipped_p},
              {"extrapolated_points", rep.extrapolated_points},
              {"warnings", warnings_json(rep.warnings)}});
}

void cmd_prepare(const Run& r, const ParamArgs& pa, const std::string& out) {
  const ModelParams p = resolve_params(pa);
  const auto days = load_days(r);
  const auto prepared = prepare_days(days, p);
  std::ostringstream csv;
  csv << "day_id,t,v,r,r_dot,theta,raw_ratio,inner\n";
  std::size_t violations = 0;
  for (const auto& d : prepared) {
    for (std::size_t i = 0; i < d.size(); ++i)
      csv << d.day->day_id << ',' << fmt(d.day->t[i]) << ',' << fmt(d.v[i]) << ',' << fmt(d.r[i]) << ','
          << fmt(d.r_dot[i]) << ',' << fmt(d.theta[i]) << ',' << fmt(d.raw_ratio[i]) << ','
          << (is_inner(d.raw_ratio[i], p.epsilon) ? 1 : 0) << '\n';
    violations += check_condition_B(p, d).violations.size();
  }
  const TransitionPartition part = partition_inner_boundary(prepared, p.epsilon);
  write_file(output_path(r, out, "prepared.csv"), r, csv.str());
  write_json(r.out_dir / "prepare.json", r,
             {{"params", params_json(p)},
              {"days", prepared.size()},
              {"transitions", part.inner.size() + part.boundary.size()},
              {"inner_percent", part.inner_percent()},
              {"boundary_percent", part.boundary_percent()},
              {"condition_b_violations", violations}});
}

void cmd_calibrate(const Run& r, const std::string& out) {
  const auto days = load_days(r);
  const CalibrationReport rep =
      calibrate(days, r.cfg.get_double("model.eps_init"), surrogate_from(r.cfg), options_from(r));
  write_json(output_path(r, out, "calibration.json"), r, report_json(rep));
  if (!rep.converged) throw NotConverged("two-stage iteration did not meet the epsilon tolerance");
}

void cmd_loglik(const Run& r, const ParamArgs& pa, const std::string& out) {
  const ModelParams p = resolve_params(pa);
  const auto days = load_days(r);
  const auto prepared = prepare_days(days, p);
  const LoglikResult res = model_loglik(prepared, r.seed, kde_options_from(r.cfg), r.workers);
  std::ostringstream csv;
  csv << "day_id,loglik\n";
  for (std::size_t j = 0; j < prepared.size(); ++j)
    csv << prepared[j].day->day_id << ',' << fmt(res.per_day[j]) << '\n';
  write_file(output_path(r, "", "loglik_days.csv"), r, csv.str());
  write_json(output_path(r, out, "loglik.json"), r,
             {{"params", params_json(p)},
              {"loglik", res.loglik},
              {"ci_lower", res.ci_lower},
              {"ci_upper", res.ci_upper},
              {"transitions", res.transitions},
              {"floored", res.floored_count},
              {"nonconverged", res.nonconverged_count},
              {"samples_used", res.samples_used},
              {"tol", kde_options_from(r.cfg).tol}});
}

void cmd_simulate(const Run& r, const ParamArgs& pa, std::size_t n_paths, const std::string& day_id,
                  const std::string& out) {
  if (n_paths < 1) throw ConfigError("--paths must be at least 1");
  const ModelParams p = resolve_params(pa);
  const auto days = load_days(r);
  const auto prepared = prepare_days(days, p);
  std::ostringstream csv;
  csv << "day_id,t,p,h";
  for (std::size_t k = 1; k <= n_paths; ++k) csv << ",path_" << k;
  csv << '\n';
  bool found = false;
  for (const auto& d : prepared) {
    if (!day_id.empty() && d.day->day_id != day_id) continue;
    found = true;
    const PathBundle b = simulate_x_paths(d, n_paths, r.seed, r.workers);
    for (std::size_t i = 0; i < b.t.size(); ++i) {
      csv << b.day_id << ',' << fmt(b.t[i]) << ',' << fmt(d.day->p[i]) << ',' << fmt(d.day->h[i]);
      for (std::size_t k = 0; k < b.n_paths; ++k) csv << ',' << fmt(b.x[k][i]);
      csv << '\n';
    }
  }
  if (!found) throw DataError("day " + day_id + " not found in aligned data");
  write_file(output_path(r, out, "paths.csv"), r, csv.str());
}

void cmd_bands(const Run& r, const ParamArgs& pa, const std::string& levels_arg, const std::string& mode_arg,
               const std::string& out) {
  const ModelParams p = resolve_params(pa);
  std::vector<double> levels = parse_list(levels_arg, "level");
  for (double& l : levels)
    if (l > 1.0) l /= 100.0;  // 50,90,99 as percentages
  BandMode mode;
  if (mode_arg == "marginal")
    mode = BandMode::Marginal;
  else if (mode_arg == "conditional")
    mode = BandMode::Conditional;
  else
    throw ConfigError("--mode must be marginal or conditional");
  const SurrogateKind kind = surrogate_from(r.cfg);
  const auto days = load_days(r);
  const auto prepared = prepare_days(days, p);
  std::ostringstream csv;
  csv << "day_id,t,mu,sigma2,level,v_lower,v_upper,x_lower,x_upper\n";
  std::size_t infeasible = 0, clipped = 0;
  for (const auto& d : prepared) {
    const BandSeries b = confidence_bands(d, kind, levels, mode);
    infeasible += b.infeasible_points;
    clipped += b.clipped_points;
    for (std::size_t i = 0; i < b.t.size(); ++i)
      for (const auto& l : b.levels)
        csv << b.day_id << ',' << fmt(b.t[i]) << ',' << fmt(b.mu[i]) << ',' << fmt(b.sigma2[i]) << ',' << fmt(l.level)
            << ',' << fmt(l.v_lower[i]) << ',' << fmt(l.v_upper[i]) << ',' << fmt(l.x_lower[i]) << ','
            << fmt(l.x_upper[i]) << '\n';
  }
  write_file(output_path(r, out, "bands.csv"), r, csv.str());
  if (infeasible > 0) std::cerr << "warning: " << infeasible << " grid points with infeasible surrogate moments\n";
  if (clipped > 0) std::cerr << "note: " << clipped << " grid points with the X band clipped into [0, h]\n";
}

void cmd_summarize(const Run& r, const ParamArgs& pa, const std::string& what, const std::string& band_arg) {
  if (what != "all" && what != "mae10" && what != "maedaily" && what != "kde")
    throw ConfigError("--what must be all, mae10, maedaily or kde");
  const std::vector<PowerBand> selected =
      band_arg == "every" ? std::vector<PowerBand>{PowerBand::All, PowerBand::Low, PowerBand::Mid, PowerBand::High}
                          : std::vector<PowerBand>{parse_power_band(band_arg)};
  const ModelParams p = resolve_params(pa);
  const auto days = load_days(r);
  const auto prepared = prepare_days(days, p);
  const bool all = what == "all";

  if (all || what == "mae10") {
    const MaeCurve curve = mae_10min(prepared);
    std::ostringstream mae;
    mae << "t,mae,count\n";
    for (std::size_t i = 0; i < curve.t.size(); ++i)
      mae << fmt(curve.t[i]) << ',' << fmt(curve.mae[i]) << ',' << curve.count[i] << '\n';
    write_file(output_path(r, "", "mae_10min.csv"), r, mae.str());
  }

  if (all || what == "maedaily") {
    const auto daily = mae_daily(prepared);
    std::ostringstream md;
    md << "day_id,mae\n";
    for (std::size_t j = 0; j < prepared.size(); ++j) md << prepared[j].day->day_id << ',' << fmt(daily[j]) << '\n';
    write_file(output_path(r, "", "mae_daily.csv"), r, md.str());
  }

  json bands = json::object();
  for (PowerBand band : selected) {
    if (!all && what != "kde") break;
    const auto values = error_transitions(prepared, band);
    if (values.size() < 2) {
      bands[to_string(band)] = {{"n", values.size()}, {"bandwidth", nullptr}};
      continue;
    }
    const KdeCurve k = gaussian_kde(values);
    std::ostringstream csv;
    csv << "x,density\n";
    for (std::size_t g = 0; g < k.x.size(); ++g) csv << fmt(k.x[g]) << ',' << fmt(k.density[g]) << '\n';
    write_file(output_path(r, "", "kde_" + to_string(band) + ".csv"), r, csv.str());
    bands[to_string(band)] = {{"n", k.n}, {"bandwidth", k.bandwidth}};
  }
  const TransitionPartition part = partition_inner_boundary(prepared, p.epsilon);
  write_json(r.out_dir / "summary.json", r,
             {{"params", params_json(p)},
              {"days", prepared.size()},
              {"inner_percent", part.inner_percent()},
              {"boundary_percent", part.boundary_percent()},
              {"transition_kde", bands}});
}

void cmd_profile(const Run& r, const ParamArgs& pa, const std::string& grid_arg, const std::string& out) {
  const ModelParams p = resolve_params(pa);
  const auto grid = parse_range(grid_arg, "epsilon");
  const auto days = load_days(r);
  const auto prof = profile_epsilon(days, p.theta0, p.alpha, surrogate_from(r.cfg), grid, p.epsilon, r.workers);
  std::ostringstream csv;
  csv << "# split_epsilon=" << fmt(p.epsilon) << "\nepsilon,neg_loglik\n";
  for (const auto& pt : prof) csv << fmt(pt.epsilon) << ',' << fmt(pt.neg_loglik) << '\n';
  write_file(output_path(r, out, "profile.csv"), r, csv.str());
}

void cmd_levelsets(const Run& r, const ParamArgs& pa, const std::string& th_arg, const std::string& al_arg,
                   const std::string& out) {
  const ModelParams p = resolve_params(pa);
  const auto th = parse_range(th_arg, "theta0");
  const auto al = parse_range(al_arg, "alpha");
  const auto days = load_days(r);
  const LevelSetGrid g = level_sets(days, p.epsilon, surrogate_from(r.cfg), th, al, r.workers);
  std::ostringstream csv;
  csv << "# epsilon=" << fmt(p.epsilon) << " argmin_theta0=" << fmt(g.theta0[g.argmin_theta0])
      << " argmin_alpha=" << fmt(g.alpha[g.argmin_alpha]) << "\ntheta0,alpha,neg_loglik\n";
  for (std::size_t i = 0; i < g.theta0.size(); ++i)
    for (std::size_t j = 0; j < g.alpha.size(); ++j)
      csv << fmt(g.theta0[i]) << ',' << fmt(g.alpha[j]) << ',' << fmt(g.values[i][j]) << '\n';
  write_file(output_path(r, out, "levelsets.csv"), r, csv.str());
}

struct SynthArgs {
  std::string out_dir = "synthetic";
  std::size_t days = 100;
  double theta0 = 20.0, alpha = 0.15, epsilon = 0.07;
  double latitude = -34.9, longitude = -56.2, gmt_offset = -3.0;
  double capacity = 228.8;
  std::uint64_t seed = 1;
};

/// Raw production/forecast files plus a config, generated from the model with known parameters.
int cmd_synthesize(const SynthArgs& a) {
  const ModelParams p{a.theta0, a.alpha, a.epsilon};
  p.validate();
  if (a.days < 1) throw ConfigError("--days must be at least 1");
  const solar::SolarSite site{a.latitude, a.longitude, a.gmt_offset};
  const auto templates = synthetic_templates(a.days, site, a.capacity, a.seed);
  const auto days = simulate_v_days(templates, p, a.seed);
  std::vector<int> numbers;
  for (const auto& d : templates) numbers.push_back(d.day_number);
  const double k = solar::calibrate_k(a.capacity, site, numbers);

  const fs::path dir(a.out_dir);
  fs::create_directories(dir);
  std::ostringstream prod, fcst;
  prod << "timestamp,production_mw\n";
  fcst << "timestamp,forecast_mw\n";
  for (const auto& d : days) {
    std::int64_t day0 = 0;
    parse_date(d.day_id, day0);
    for (std::size_t i = 0; i < d.size(); ++i) {
      const std::string ts = format_timestamp(day0 * 1440 + std::llround(d.t[i] * 1440.0));
      prod << ts << ',' << fmt(d.y[i] * a.capacity) << '\n';
      fcst << ts << ',' << fmt(d.p[i] * a.capacity) << '\n';
    }
  }
  std::ostringstream cfg;
  cfg << "[site]\nlatitude = " << a.latitude << "\nlongitude = " << a.longitude << "\ngmt_offset = " << a.gmt_offset
      << "\nk = " << fmt(k)
      << "\n\n[data]\nproduction = production.csv\nforecast = forecast.csv\ncapacity_mw = " << a.capacity
      << "\n\n[run]\nseed = " << a.seed << "\noutput_dir = out\n";
  const std::string prov = "# synthetic theta0=" + fmt(a.theta0) + " alpha=" + fmt(a.alpha) +
                           " epsilon=" + fmt(a.epsilon) + " seed=" + std::to_string(a.seed) + "\n";
  std::ofstream(dir / "production.csv") << prov << prod.str();
  std::ofstream(dir / "forecast.csv") << prov << fcst.str();
  std::ofstream(dir / "config.ini") << cfg.str();
  std::cerr << "wrote " << days.size() << " days to " << dir.string() << '\n';
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Forecast-error uncertainty model for bounded production (clear-sky bounded SDE)"};
  app.require_subcommand(1);
  std::string config_path;

  auto with_config = [&](CLI::App* sub) {
    sub->add_option("-c,--config", config_path, "configuration file")->required()->check(CLI::ExistingFile);
    return sub;
  };

  std::string out;
  int from = 1, to = 365;
  auto* bound = with_config(app.add_subcommand("compute-bound", "clear-sky upper bound h(t) per day"));
  bound->add_option("--from", from, "first day number");
  bound->add_option("--to", to, "last day number");
  bound->add_option("-o,--out", out, "output CSV");

  auto* ingest =
      with_config(app.add_subcommand("ingest", "normalize and align production and forecast onto the bound grid"));

  ParamArgs pa;
  auto* prepare = with_config(app.add_subcommand("prepare", "forecast-error series, theta_t and inner/boundary split"));
  add_param_options(prepare, pa);
  prepare->add_option("-o,--out", out, "output CSV");

  std::string surrogate, eps_init, dataset, tol, seed;
  auto* calib = with_config(app.add_subcommand("calibrate", "two-stage surrogate maximum likelihood"));
  calib->add_option("--surrogate", surrogate, "beta or truncnorm");
  calib->add_option("--eps-init", eps_init, "starting epsilon");
  calib->add_option("--dataset", dataset, "all, 1 or 2");
  calib->add_option("-o,--out", out, "output JSON");

  auto* loglik = with_config(app.add_subcommand("loglik", "exact-model log-likelihood by control-variate KDE"));
  add_param_options(loglik, pa);
  loglik->add_option("--tol", tol, "relative MSE tolerance");
  loglik->add_option("--seed", seed, "random seed");
  loglik->add_option("--dataset", dataset, "all, 1 or 2");
  loglik->add_option("-o,--out", out, "output JSON");

  std::size_t n_paths = 1000;
  std::string day_id;
  auto* sim = with_config(app.add_subcommand("simulate", "projected Euler production paths"));
  add_param_options(sim, pa);
  sim->add_option("--seed", seed, "random seed");
  sim->add_option("--paths", n_paths, "paths per day");
  sim->add_option("--day", day_id, "restrict to one day (YYYY-MM-DD)");
  sim->add_option("-o,--out", out, "output CSV");

  std::string levels = "0.5,0.9,0.99", mode = "marginal";
  auto* bands = with_config(app.add_subcommand("bands", "surrogate confidence bands"));
  add_param_options(bands, pa);
  bands->add_option("--levels", levels, "comma-separated central coverages, as fractions or percentages");
  bands->add_option("--mode", mode, "marginal or conditional");
  bands->add_option("-o,--out", out, "output CSV");

  auto* summarize = with_config(app.add_subcommand("summarize", "mean absolute errors and transition densities"));
  add_param_options(summarize, pa);
  std::string what = "all", power_band = "every";
  summarize->add_option("--what", what, "mae10, maedaily, kde or all");
  summarize->add_option("--band", power_band, "all, low, mid, high or every");

  std::string eps_grid = "0.01:0.25:25";
  auto* profile = with_config(app.add_subcommand("profile", "boundary-data objective over a grid of epsilon"));
  add_param_options(profile, pa);
  profile->add_option("--grid", eps_grid, "lo:hi:n");
  profile->add_option("-o,--out", out, "output CSV");

  std::string th_grid = "10:40:16", al_grid = "0.05:0.3:16";
  auto* levelsets = with_config(app.add_subcommand("levelsets", "all-data objective over a (theta0, alpha) grid"));
  add_param_options(levelsets, pa);
  levelsets->add_option("--theta0-grid", th_grid, "lo:hi:n");
  levelsets->add_option("--alpha-grid", al_grid, "lo:hi:n");
  levelsets->add_option("-o,--out", out, "output CSV");

  SynthArgs sa;
  auto* synth = app.add_subcommand("synthesize", "raw data files and config simulated from known parameters");
  synth->add_option("--out-dir", sa.out_dir, "output directory");
  synth->add_option("--days", sa.days, "number of days");
  synth->add_option("--theta0", sa.theta0);
  synth->add_option("--alpha", sa.alpha);
  synth->add_option("--epsilon", sa.epsilon);
  synth->add_option("--latitude", sa.latitude);
  synth->add_option("--longitude", sa.longitude);
  synth->add_option("--gmt-offset", sa.gmt_offset);
  synth->add_option("--capacity", sa.capacity, "installed capacity, MW");
  synth->add_option("--seed", sa.seed);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n\n" << app.help();
    return kUsage;
  }

  try {
    if (*synth) return cmd_synthesize(sa);
    const Run r = load_run(config_path, {{"model.surrogate", surrogate},
                                         {"model.eps_init", eps_init},
                                         {"data.dataset", dataset},
                                         {"model.kde_tol", tol},
                                         {"run.seed", seed}});
    if (*bound)
      cmd_compute_bound(r, from, to, out);
    else if (*ingest)
      cmd_ingest(r);
    else if (*prepare)
      cmd_prepare(r, pa, out);
    else if (*calib)
      cmd_calibrate(r, out);
    else if (*loglik)
      cmd_loglik(r, pa, out);
    else if (*sim)
      cmd_simulate(r, pa, n_paths, day_id, out);
    else if (*bands)
      cmd_bands(r, pa, levels, mode, out);
    else if (*summarize)
      cmd_summarize(r, pa, what, power_band);
    else if (*profile)
      cmd_profile(r, pa, eps_grid, out);
    else if (*levelsets)
      cmd_levelsets(r, pa, th_grid, al_grid, out);
    return kOk;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfig;
  } catch (const InputError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfig;
  } catch (const ParameterError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfig;
  } catch (const ParseError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kData;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kData;
  } catch (const NotConverged& e) {
    std::cerr << "not converged: " << e.what() << '\n';
    return kNonconvergence;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << '\n';
    return kNonconvergence;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  }
}
