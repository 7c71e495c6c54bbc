#pragma once

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "boundsde/errors.hpp"
#include "boundsde/numerics.hpp"
#include "boundsde/solar_clearsky.hpp"

namespace boundsde {

// ---------------------------------------------------------------------------
// Timestamps: local wall-clock minutes since 1970-01-01 00:00
// ---------------------------------------------------------------------------

inline std::int64_t days_from_date(int year, int month, int day) {
  using namespace std::chrono;
  const year_month_day ymd{std::chrono::year{year}, std::chrono::month{static_cast<unsigned>(month)},
                           std::chrono::day{static_cast<unsigned>(day)}};
  if (!ymd.ok()) throw InputError("invalid calendar date");
  return sys_days{ymd}.time_since_epoch().count();
}

struct CivilDate {
  int year = 1970;
  int month = 1;
  int day = 1;
};

inline CivilDate date_from_days(std::int64_t days) {
  using namespace std::chrono;
  const year_month_day ymd{sys_days{std::chrono::days{days}}};
  return {static_cast<int>(ymd.year()), static_cast<int>(static_cast<unsigned>(ymd.month())),
          static_cast<int>(static_cast<unsigned>(ymd.day()))};
}

inline std::string format_date(std::int64_t days) {
  const CivilDate d = date_from_days(days);
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02d-%02d", d.year, d.month, d.day);
  return buf;
}

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r' || s.back() == '\n')) s.remove_suffix(1);
  return s;
}

inline bool parse_int(std::string_view s, int& out) {
  const auto res = std::from_chars(s.data(), s.data() + s.size(), out);
  return res.ec == std::errc{} && res.ptr == s.data() + s.size();
}

inline bool parse_double(std::string_view s, double& out) {
  s = trim(s);
  if (s.empty()) return false;
  // strtod accepts the "nan"/"inf" spellings and every digit count written by format_double.
  std::string tmp(s);
  char* end = nullptr;
  out = std::strtod(tmp.c_str(), &end);
  return end == tmp.c_str() + tmp.size();
}

inline std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(sep, start);
    out.push_back(trim(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

}  // namespace detail

/// Days since epoch from "YYYY-MM-DD"; returns false on malformed input.
inline bool parse_date(std::string_view s, std::int64_t& days) {
  s = detail::trim(s);
  if (s.size() != 10 || s[4] != '-' || s[7] != '-') return false;
  int y = 0, m = 0, d = 0;
  if (!detail::parse_int(s.substr(0, 4), y) || !detail::parse_int(s.substr(5, 2), m) ||
      !detail::parse_int(s.substr(8, 2), d))
    return false;
  const std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{static_cast<unsigned>(m)},
                                        std::chrono::day{static_cast<unsigned>(d)}};
  if (!ymd.ok()) return false;
  days = days_from_date(y, m, d);
  return true;
}

/// Minutes since epoch from "YYYY-MM-DD HH:MM[:SS]" (a 'T' separator is also accepted).
inline bool parse_timestamp(std::string_view s, std::int64_t& minutes) {
  s = detail::trim(s);
  if (s.size() < 16) return false;
  std::int64_t days = 0;
  if (!parse_date(s.substr(0, 10), days)) return false;
  if (s[10] != ' ' && s[10] != 'T') return false;
  if (s[13] != ':') return false;
  int hh = 0, mm = 0, ss = 0;
  if (!detail::parse_int(s.substr(11, 2), hh) || !detail::parse_int(s.substr(14, 2), mm)) return false;
  if (s.size() > 16) {
    if (s.size() != 19 || s[16] != ':' || !detail::parse_int(s.substr(17, 2), ss)) return false;
  }
  if (hh < 0 || hh > 23 || mm < 0 || mm > 59 || ss < 0 || ss > 59) return false;
  if (ss != 0) return false;  // grids are whole minutes
  minutes = days * 1440 + hh * 60 + mm;
  return true;
}

inline std::string format_timestamp(std::int64_t minutes) {
  const std::int64_t days = minutes >= 0 ? minutes / 1440 : -((-minutes + 1439) / 1440);
  const std::int64_t rem = minutes - days * 1440;
  char buf[8];
  std::snprintf(buf, sizeof buf, "%02d:%02d", static_cast<int>(rem / 60), static_cast<int>(rem % 60));
  return format_date(days) + " " + buf;
}

// ---------------------------------------------------------------------------
// Raw series
// ---------------------------------------------------------------------------

struct RawSeries {
  std::string source;
  std::vector<std::int64_t> minutes;  // strictly increasing
  std::vector<double> values;         // MW, >= 0
  double frequency_minutes = 0.0;     // most common spacing
  std::size_t gaps = 0;               // spacings larger than the frequency

  std::size_t size() const { return minutes.size(); }
  bool empty() const { return minutes.empty(); }
};

namespace detail {

inline void finish_series(RawSeries& s) {
  if (s.minutes.size() < 2) return;
  std::map<std::int64_t, std::size_t> counts;
  for (std::size_t i = 1; i < s.minutes.size(); ++i) ++counts[s.minutes[i] - s.minutes[i - 1]];
  const auto mode = std::max_element(counts.begin(), counts.end(),
                                     [](const auto& a, const auto& b) { return a.second < b.second; });
  s.frequency_minutes = static_cast<double>(mode->first);
  for (std::size_t i = 1; i < s.minutes.size(); ++i)
    if (s.minutes[i] - s.minutes[i - 1] > mode->first) ++s.gaps;
}

}  // namespace detail

/**
 * Parses `timestamp,value_mw` rows. Blank lines, `#` comments and a leading
 * header row are skipped. Row numbers in errors are 1-based file lines.
 */
inline RawSeries parse_series(std::istream& in, const std::string& source) {
  RawSeries s;
  s.source = source;
  std::string line;
  std::size_t row = 0;
  bool seen_data = false;
  while (std::getline(in, line)) {
    ++row;
    const std::string_view t = detail::trim(line);
    if (t.empty() || t.front() == '#') continue;
    const auto fields = detail::split(t, ',');
    if (fields.size() != 2) throw ParseError(source, row, "expected 2 fields, found " + std::to_string(fields.size()));
    std::int64_t minute = 0;
    if (!parse_timestamp(fields[0], minute)) {
      if (!seen_data && s.empty()) {  // header
        seen_data = true;
        continue;
      }
      throw ParseError(source, row, "malformed timestamp '" + std::string(fields[0]) + "'");
    }
    seen_data = true;
    double value = 0.0;
    if (!detail::parse_double(fields[1], value) || !std::isfinite(value))
      throw ParseError(source, row, "malformed value '" + std::string(fields[1]) + "'");
    if (value < 0.0) throw ParseError(source, row, "negative value");
    if (!s.minutes.empty()) {
      if (minute == s.minutes.back()) throw ParseError(source, row, "duplicated timestamp " + std::string(fields[0]));
      if (minute < s.minutes.back()) throw ParseError(source, row, "timestamps not increasing");
    }
    s.minutes.push_back(minute);
    s.values.push_back(value);
  }
  if (s.empty()) throw DataError(source + ": empty series");
  detail::finish_series(s);
  return s;
}

inline RawSeries load_series_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  return parse_series(in, path);
}

inline RawSeries load_production(const std::string& path) { return load_series_file(path); }
inline RawSeries load_forecast(const std::string& path) { return load_series_file(path); }

// ---------------------------------------------------------------------------
// Aligned days
// ---------------------------------------------------------------------------

/**
 * One day restricted to the support of the upper bound. Values are normalized
 * by installed capacity; t is in days since local midnight, so the grid
 * spacing dt is 10/1440 for a 10-minute grid.
 */
struct DaySeries {
  std::string day_id;  // YYYY-MM-DD
  int day_number = 1;
  double dt = 10.0 / 1440.0;
  std::vector<double> t;
  std::vector<double> y;
  std::vector<double> p;
  std::vector<double> p_dot;
  std::vector<double> h;
  std::vector<double> h_dot;
  std::vector<std::uint8_t> extrapolated;  // forecast held constant outside its knots

  std::size_t size() const { return t.size(); }
};

struct AlignReport {
  std::size_t days_aligned = 0;
  std::size_t days_skipped = 0;
  std::size_t clipped_y = 0;
  std::size_t clipped_p = 0;
  std::size_t extrapolated_points = 0;
  Warnings warnings;
};

using BoundProvider = std::function<solar::BoundSeries(int day_number)>;

namespace detail {

/// Values of a raw series on [lo, hi] minutes, with the neighbouring knots on either side.
inline void day_window(const RawSeries& s, std::int64_t lo, std::int64_t hi, std::vector<double>& xs,
                       std::vector<double>& ys, std::int64_t origin) {
  xs.clear();
  ys.clear();
  auto first = std::lower_bound(s.minutes.begin(), s.minutes.end(), lo);
  auto last = std::upper_bound(s.minutes.begin(), s.minutes.end(), hi);
  if (first != s.minutes.begin()) --first;
  if (last != s.minutes.end()) ++last;
  for (auto it = first; it != last; ++it) {
    const std::size_t i = static_cast<std::size_t>(it - s.minutes.begin());
    xs.push_back(static_cast<double>(s.minutes[i] - origin));
    ys.push_back(s.values[i]);
  }
}

}  // namespace detail

/**
 * Normalizes by capacity and aligns production and forecast onto the bound's
 * grid, keeping only points with h > 0. Production must bracket every support
 * point with knots no more than `max_production_gap_minutes` apart, otherwise
 * the day is skipped. The forecast is interpolated linearly and held constant
 * beyond its first/last knot of the day; those points are flagged.
 */
inline std::vector<DaySeries> normalize_and_align(const RawSeries& prod, const RawSeries& fcst, double capacity_mw,
                                                  const BoundProvider& bounds, AlignReport* report = nullptr,
                                                  double max_production_gap_minutes = 60.0) {
  if (!(capacity_mw > 0.0)) throw InputError("capacity must be positive");
  AlignReport local;
  AlignReport& rep = report ? *report : local;

  std::set<std::int64_t> day_keys;
  for (std::int64_t m : prod.minutes) day_keys.insert(m >= 0 ? m / 1440 : -((-m + 1439) / 1440));

  std::vector<DaySeries> out;
  std::vector<double> px, py, fx, fy;
  for (std::int64_t day : day_keys) {
    const std::string id = format_date(day);
    const CivilDate cd = date_from_days(day);
    const int dnum = solar::day_number_from_date(cd.year, cd.month, cd.day);
    const solar::BoundSeries b = bounds(dnum);
    if (!b.has_support()) {
      ++rep.days_skipped;
      rep.warnings.add(id + ": bound has no daylight, day skipped");
      continue;
    }
    const std::int64_t origin = day * 1440;
    const auto minute_at = [&](std::size_t i) { return b.times[i] * 60.0; };
    const std::int64_t lo = origin + static_cast<std::int64_t>(std::floor(minute_at(b.support_begin)));
    const std::int64_t hi = origin + static_cast<std::int64_t>(std::ceil(minute_at(b.support_end - 1)));

    detail::day_window(prod, lo, hi, px, py, origin);
    detail::day_window(fcst, origin, origin + 1439, fx, fy, origin);
    // Forecast knots from this calendar day only.
    while (!fx.empty() && fx.front() < 0.0) { fx.erase(fx.begin()); fy.erase(fy.begin()); }
    while (!fx.empty() && fx.back() >= 1440.0) { fx.pop_back(); fy.pop_back(); }
    if (fx.empty()) {
      ++rep.days_skipped;
      rep.warnings.add(id + ": no forecast, day skipped");
      continue;
    }

    DaySeries d;
    d.day_id = id;
    d.day_number = dnum;
    d.dt = b.step_days();
    bool covered = true;
    for (std::size_t i = b.support_begin; i < b.support_end && covered; ++i) {
      const double x = minute_at(i);
      constexpr double kSameMinute = 1e-6;
      const auto it = std::lower_bound(px.begin(), px.end(), x - kSameMinute);
      if (it == px.end()) { covered = false; break; }
      const std::size_t j = static_cast<std::size_t>(it - px.begin());
      double prod_mw = 0.0;
      if (std::fabs(px[j] - x) <= kSameMinute) {
        prod_mw = py[j];
      } else {
        if (j == 0 || px[j] - px[j - 1] > max_production_gap_minutes) { covered = false; break; }
        const double w = (x - px[j - 1]) / (px[j] - px[j - 1]);
        prod_mw = py[j - 1] + w * (py[j] - py[j - 1]);
      }
      const double h_norm = b.h[i] / capacity_mw;
      double y = prod_mw / capacity_mw;
      if (y > h_norm) {
        y = h_norm;
        ++rep.clipped_y;
      }
      const bool extrap = x < fx.front() || x > fx.back();
      double p = interpolate_linear(fx, fy, x) / capacity_mw;
      const double p_cap = std::min(h_norm, 1.0);
      if (p > p_cap) {
        p = p_cap;
        ++rep.clipped_p;
      }
      if (extrap) ++rep.extrapolated_points;
      d.t.push_back(x / 1440.0);
      d.y.push_back(y);
      d.p.push_back(p);
      d.h.push_back(h_norm);
      d.h_dot.push_back(b.h_dot[i] / capacity_mw);
      d.extrapolated.push_back(extrap ? 1 : 0);
    }
    if (!covered) {
      ++rep.days_skipped;
      rep.warnings.add(id + ": production does not cover the daylight window, day skipped");
      continue;
    }
    d.p_dot = finite_difference(d.p, d.dt);
    out.push_back(std::move(d));
    ++rep.days_aligned;
  }
  if (rep.clipped_y > 0) rep.warnings.add(std::to_string(rep.clipped_y) + " production values clipped to the bound");
  return out;
}

// ---------------------------------------------------------------------------
// Exclusion and splitting
// ---------------------------------------------------------------------------

inline std::vector<std::string> load_exclusion_list(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  std::vector<std::string> ids;
  std::string line;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    const std::string_view t = detail::trim(line);
    if (t.empty() || t.front() == '#') continue;
    std::int64_t days = 0;
    if (!parse_date(t, days)) throw ParseError(path, row, "expected YYYY-MM-DD");
    ids.push_back(format_date(days));
  }
  return ids;
}

inline std::vector<DaySeries> exclude_days(const std::vector<DaySeries>& days, const std::vector<std::string>& excluded,
                                           Warnings* warnings = nullptr) {
  const std::set<std::string> drop(excluded.begin(), excluded.end());
  std::set<std::string> present;
  std::vector<DaySeries> out;
  for (const auto& d : days) {
    present.insert(d.day_id);
    if (!drop.count(d.day_id)) out.push_back(d);
  }
  for (const auto& id : drop)
    if (!present.count(id)) warn(warnings, "excluded day " + id + " not present in the data");
  if (out.empty() && !days.empty()) warn(warnings, "every day was excluded");
  return out;
}

struct DataSplit {
  std::vector<DaySeries> set1;
  std::vector<DaySeries> set2;
};

/// Even chronological positions go to set 1, odd ones to set 2.
inline DataSplit split_alternating(const std::vector<DaySeries>& days) {
  DataSplit s;
  for (std::size_t i = 0; i < days.size(); ++i) (i % 2 == 0 ? s.set1 : s.set2).push_back(days[i]);
  return s;
}

// ---------------------------------------------------------------------------
// Canonical aligned CSV
// ---------------------------------------------------------------------------

/// Shortest-safe round-trip representation (17 significant digits).
inline std::string format_double(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

inline void write_aligned_csv(std::ostream& out, const std::vector<DaySeries>& days) {
  out << "day_id,t,y,p,p_dot,h,h_dot\n";
  for (const auto& d : days) {
    out << "# delta_days=" << format_double(d.dt) << " day=" << d.day_id << "\n";
    for (std::size_t i = 0; i < d.size(); ++i) {
      out << d.day_id << ',' << format_double(d.t[i]) << ',' << format_double(d.y[i]) << ','
          << format_double(d.p[i]) << ',' << format_double(d.p_dot[i]) << ',' << format_double(d.h[i]) << ','
          << format_double(d.h_dot[i]) << '\n';
    }
  }
}

/**
 * Reads the canonical aligned CSV. The per-day grid spacing comes from the
 * `# delta_days=` comment when present, otherwise from the first two times.
 */
inline std::vector<DaySeries> read_aligned_csv(std::istream& in, const std::string& source = "aligned.csv") {
  std::vector<DaySeries> days;
  std::map<std::string, double> spacing;
  std::string line;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    const std::string_view t = detail::trim(line);
    if (t.empty()) continue;
    if (t.front() == '#') {
      const auto dpos = t.find("delta_days=");
      const auto ipos = t.find("day=", dpos == std::string_view::npos ? 0 : dpos + 11);
      if (dpos != std::string_view::npos && ipos != std::string_view::npos) {
        const auto dend = t.find(' ', dpos);
        double dt = 0.0;
        if (detail::parse_double(t.substr(dpos + 11, dend - dpos - 11), dt))
          spacing[std::string(detail::trim(t.substr(ipos + 4)))] = dt;
      }
      continue;
    }
    if (t.rfind("day_id", 0) == 0) continue;
    const auto f = detail::split(t, ',');
    if (f.size() != 7) throw ParseError(source, row, "expected 7 fields");
    std::int64_t dd = 0;
    if (!parse_date(f[0], dd)) throw ParseError(source, row, "malformed day_id");
    double v[6];
    for (int k = 0; k < 6; ++k)
      if (!detail::parse_double(f[k + 1], v[k])) throw ParseError(source, row, "malformed number");
    if (days.empty() || days.back().day_id != f[0]) {
      DaySeries d;
      d.day_id = std::string(f[0]);
      const CivilDate cd = date_from_days(dd);
      d.day_number = solar::day_number_from_date(cd.year, cd.month, cd.day);
      days.push_back(std::move(d));
    }
    DaySeries& d = days.back();
    if (!d.t.empty() && !(v[0] > d.t.back())) throw ParseError(source, row, "times not increasing");
    d.t.push_back(v[0]);
    d.y.push_back(v[1]);
    d.p.push_back(v[2]);
    d.p_dot.push_back(v[3]);
    d.h.push_back(v[4]);
    d.h_dot.push_back(v[5]);
    d.extrapolated.push_back(0);
  }
  for (auto& d : days) {
    const auto it = spacing.find(d.day_id);
    if (it != spacing.end()) d.dt = it->second;
    else if (d.size() >= 2) d.dt = d.t[1] - d.t[0];
  }
  return days;
}

}  // namespace boundsde
