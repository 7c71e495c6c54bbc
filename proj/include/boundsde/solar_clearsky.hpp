#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "boundsde/errors.hpp"
#include "boundsde/numerics.hpp"

/**
 * @file solar_clearsky.hpp
 * @brief "Very clear sky" direct normal irradiance and the PV upper bound h(t) = k I_D(t).
 *
 * Angles are carried in degrees everywhere and converted to radians only
 * inside trigonometric calls. Day numbers run 1..365 with d = 1 on January 1.
 */
namespace boundsde::solar {

inline constexpr double kDefaultSolarConstant = 1353.0;  // W/m^2

inline double sin_deg(double deg) { return std::sin(deg * std::numbers::pi / 180.0); }
inline double cos_deg(double deg) { return std::cos(deg * std::numbers::pi / 180.0); }
inline double asin_deg(double x) { return std::asin(std::clamp(x, -1.0, 1.0)) * 180.0 / std::numbers::pi; }

struct SolarSite {
  double latitude_deg = 0.0;
  double longitude_deg = 0.0;
  double gmt_offset_hours = 0.0;
  double solar_constant_w_per_m2 = kDefaultSolarConstant;
  double panel_area_m2 = 1.0;  // k

  /// Local standard time meridian, 15 degrees per hour of GMT offset.
  double standard_meridian_deg() const { return 15.0 * gmt_offset_hours; }

  void validate() const {
    if (!(latitude_deg >= -90.0 && latitude_deg <= 90.0)) throw InputError("site latitude must lie in [-90, 90]");
    if (!(longitude_deg >= -180.0 && longitude_deg <= 180.0)) throw InputError("site longitude must lie in [-180, 180]");
    if (!(solar_constant_w_per_m2 > 0.0)) throw InputError("solar constant must be positive");
    if (!(panel_area_m2 > 0.0)) throw InputError("panel area k must be positive");
  }
};

struct SolarAngles {
  int day_number = 0;
  double day_angle_deg = 0.0;
  double declination_deg = 0.0;
  double eot_minutes = 0.0;
  double hour_angle_deg = 0.0;
  double elevation_deg = 0.0;
  double air_mass = 0.0;
};

inline void check_day_number(int day_number) {
  if (day_number < 1 || day_number > 365)
    throw InputError("day number " + std::to_string(day_number) + " outside 1..365");
}

/// Day of year for a calendar date, with leap-year day 366 folded to 365.
inline int day_number_from_date(int year, int month, int day) {
  static constexpr int kCumulative[12] = {0, 31, 59, 90, 120, 151, 181, 212, 243, 273, 304, 334};
  if (month < 1 || month > 12 || day < 1 || day > 31) throw InputError("invalid calendar date");
  const bool leap = (year % 4 == 0 && year % 100 != 0) || year % 400 == 0;
  int d = kCumulative[month - 1] + day + ((leap && month > 2) ? 1 : 0);
  return std::min(d, 365);
}

/// Day angle B = 360 (d - 81) / 365, degrees.
inline double day_angle(int day_number) {
  check_day_number(day_number);
  return 360.0 * (day_number - 81) / 365.0;
}

/// Solar declination, degrees: -23.45 cos(360 (10.25 + d) / 365).
inline double declination(int day_number) {
  check_day_number(day_number);
  return -23.45 * cos_deg(360.0 * (10.25 + day_number) / 365.0);
}

/// Equation of time, minutes.
inline double equation_of_time(int day_number) {
  const double b = day_angle(day_number);
  return 9.87 * sin_deg(2.0 * b) - 7.53 * cos_deg(b) - 1.5 * sin_deg(b);
}

/// Hour angle, degrees; zero at corrected local solar noon, +15 per hour after.
inline double hour_angle(double local_time_hours, const SolarSite& site, int day_number) {
  if (!(local_time_hours >= 0.0 && local_time_hours < 24.0)) throw InputError("local time must lie in [0, 24)");
  const double correction_hours =
      (4.0 / 60.0) * (site.standard_meridian_deg() - site.longitude_deg) + equation_of_time(day_number) / 60.0;
  return 15.0 * (local_time_hours + correction_hours - 12.0);
}

inline double elevation(double latitude_deg, double declination_deg, double hour_angle_deg) {
  return asin_deg(sin_deg(latitude_deg) * sin_deg(declination_deg) +
                  cos_deg(latitude_deg) * cos_deg(declination_deg) * cos_deg(hour_angle_deg));
}

/**
 * Kasten relative optical air mass, elevation in degrees. Returns +infinity
 * when the bracket is not positive (sun well below the horizon).
 */
inline double air_mass(double elevation_deg) {
  const double shifted = elevation_deg + 3.885;
  if (!(shifted > 0.0)) return std::numeric_limits<double>::infinity();
  const double bracket = sin_deg(elevation_deg) + 0.15 * std::pow(shifted, -1.253);
  if (!(bracket > 0.0)) return std::numeric_limits<double>::infinity();
  return 1.0 / bracket;
}

/// Direct normal irradiance I_0 * 0.7^(AM^0.678) / 1000; the infinite air-mass sentinel maps to 0.
inline double irradiance(double air_mass_value, double solar_constant = kDefaultSolarConstant) {
  if (std::isinf(air_mass_value)) return 0.0;
  if (air_mass_value < 0.0) throw InputError("air mass must be nonnegative");
  return solar_constant * std::pow(0.7, std::pow(air_mass_value, 0.678)) / 1000.0;
}

inline SolarAngles solar_angles(const SolarSite& site, int day_number, double local_time_hours) {
  SolarAngles a;
  a.day_number = day_number;
  a.day_angle_deg = day_angle(day_number);
  a.declination_deg = declination(day_number);
  a.eot_minutes = equation_of_time(day_number);
  a.hour_angle_deg = hour_angle(local_time_hours, site, day_number);
  a.elevation_deg = elevation(site.latitude_deg, a.declination_deg, a.hour_angle_deg);
  a.air_mass = air_mass(a.elevation_deg);
  return a;
}

/// Irradiance at a site and local time; zero whenever the sun is at or below the horizon.
inline double site_irradiance(const SolarSite& site, int day_number, double local_time_hours) {
  const SolarAngles a = solar_angles(site, day_number, local_time_hours);
  if (a.elevation_deg <= 0.0) return 0.0;
  return irradiance(a.air_mass, site.solar_constant_w_per_m2);
}

struct BoundSeries {
  int day_number = 0;
  double step_minutes = 10.0;
  std::vector<double> times;  // local clock hours
  std::vector<double> h;      // MW
  std::vector<double> h_dot;  // MW per day
  std::size_t support_begin = 0;  // first index with h > 0
  std::size_t support_end = 0;    // one past the last index with h > 0

  bool has_support() const { return support_end > support_begin; }
  double step_days() const { return step_minutes / 1440.0; }

  /// Number of interior points whose second difference is positive (convex); diagnostic only.
  std::size_t convex_points() const {
    std::size_t n = 0;
    for (std::size_t i = support_begin + 1; i + 1 < support_end; ++i)
      if (h[i + 1] - 2.0 * h[i] + h[i - 1] > 0.0) ++n;
    return n;
  }
};

inline std::size_t grid_points_per_day(double grid_step_minutes) {
  if (!(grid_step_minutes > 0.0)) throw InputError("grid step must be positive");
  const double n = 1440.0 / grid_step_minutes;
  const double rounded = std::round(n);
  if (std::fabs(n - rounded) > 1e-9 || rounded < 1.0) throw InputError("grid step must divide 24 h");
  return static_cast<std::size_t>(rounded);
}

/**
 * h(t) = k I_D(t) / 1000 (MW) on a full-day grid, with h_dot by finite
 * differences over the positive-bound support (central inside, one-sided at
 * the support edges, zero outside).
 */
inline BoundSeries upper_bound_series(const SolarSite& site, int day_number, double grid_step_minutes) {
  site.validate();
  check_day_number(day_number);
  const std::size_t n = grid_points_per_day(grid_step_minutes);

  BoundSeries out;
  out.day_number = day_number;
  out.step_minutes = grid_step_minutes;
  out.times.resize(n);
  out.h.assign(n, 0.0);
  out.h_dot.assign(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    out.times[i] = static_cast<double>(i) * grid_step_minutes / 60.0;
    out.h[i] = site.panel_area_m2 * site_irradiance(site, day_number, out.times[i]) / 1000.0;
  }

  const auto first = std::find_if(out.h.begin(), out.h.end(), [](double v) { return v > 0.0; });
  if (first == out.h.end()) return out;
  const auto last = std::find_if(out.h.rbegin(), out.h.rend(), [](double v) { return v > 0.0; });
  out.support_begin = static_cast<std::size_t>(first - out.h.begin());
  out.support_end = n - static_cast<std::size_t>(last - out.h.rbegin());

  const std::span<const double> support(out.h.data() + out.support_begin, out.support_end - out.support_begin);
  const std::vector<double> d = finite_difference(support, out.step_days());
  std::copy(d.begin(), d.end(), out.h_dot.begin() + static_cast<std::ptrdiff_t>(out.support_begin));
  return out;
}

/// Largest clear-sky irradiance on one day's grid.
inline double daily_peak_irradiance(const SolarSite& site, int day_number, double grid_step_minutes) {
  const std::size_t n = grid_points_per_day(grid_step_minutes);
  double peak = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    peak = std::max(peak, site_irradiance(site, day_number, static_cast<double>(i) * grid_step_minutes / 60.0));
  return peak;
}

/**
 * Panel-area constant k from installed capacity: for each day the ratio of
 * capacity to that day's peak irradiance, maximized over the days. Capacity is
 * converted to kW so that k * I_D lands in kW and h = k I_D / 1000 in MW.
 */
inline double calibrate_k_from_peaks(double max_capacity_mw, std::span<const double> daily_peaks) {
  if (!(max_capacity_mw > 0.0)) throw InputError("capacity must be positive");
  if (daily_peaks.empty()) throw InputError("calibrate_k needs at least one day");
  double k = 0.0;
  bool any = false;
  for (double peak : daily_peaks) {
    if (peak > 0.0) {
      k = std::max(k, 1000.0 * max_capacity_mw / peak);
      any = true;
    }
  }
  if (!any) throw DataError("calibrate_k: no positive irradiance on the requested days");
  return k;
}

inline double calibrate_k(double max_capacity_mw, const SolarSite& site, std::span<const int> days,
                          double grid_step_minutes = 10.0) {
  if (days.empty()) throw InputError("calibrate_k needs at least one day");
  std::vector<double> peaks;
  peaks.reserve(days.size());
  for (int d : days) {
    check_day_number(d);
    peaks.push_back(daily_peak_irradiance(site, d, grid_step_minutes));
  }
  return calibrate_k_from_peaks(max_capacity_mw, peaks);
}

}  // namespace boundsde::solar
