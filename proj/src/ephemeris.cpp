#include "helio/ephemeris.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "helio/error.hpp"

namespace helio::ephemeris {

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

double wrap360(double deg) {
  double r = std::fmod(deg, 360.0);
  if (r < 0.0) r += 360.0;
  // fmod of a tiny negative can round back up to exactly 360.
  if (r >= 360.0) r -= 360.0;
  return r;
}

}  // namespace

void GeoLocation::validate() const {
  if (!(latitude >= -90.0 && latitude <= 90.0)) throw RangeError("latitude outside [-90, 90]");
  if (!(longitude >= -180.0 && longitude <= 180.0)) throw RangeError("longitude outside [-180, 180]");
  if (!(camera_azimuth >= 0.0 && camera_azimuth < 360.0)) {
    throw RangeError("camera azimuth outside [0, 360)");
  }
}

void ProjectionParams::validate() const {
  if (!(max_radius > 0.0)) throw RangeError("projection max_radius must be positive");
  if (!(gamma > 0.0)) throw RangeError("projection gamma must be positive");
  if (!(center > 0.0)) throw RangeError("projection center must be positive");
}

SolarAngles solar_angles(const GeoLocation& location, const Timestamp& when) {
  location.validate();
  const int year = when.utc_year();
  if (year < kFirstValidYear || year > kLastValidYear) {
    throw RangeError("timestamp " + when.to_string() + " outside the 1950-2050 ephemeris window");
  }

  const double unix_s = static_cast<double>(when.unix_seconds());
  const double jd = unix_s / 86400.0 + 2440587.5;
  const double t = (jd - 2451545.0) / 36525.0;  // Julian centuries since J2000

  const double mean_long = wrap360(280.46646 + t * (36000.76983 + t * 0.0003032));
  const double mean_anom = 357.52911 + t * (35999.05029 - 0.0001537 * t);
  const double ecc = 0.016708634 - t * (0.000042037 + 0.0000001267 * t);
  const double m_rad = mean_anom * kDeg;
  const double center_eq = std::sin(m_rad) * (1.914602 - t * (0.004817 + 0.000014 * t)) +
                           std::sin(2.0 * m_rad) * (0.019993 - 0.000101 * t) +
                           std::sin(3.0 * m_rad) * 0.000289;
  const double true_long = mean_long + center_eq;
  const double omega = 125.04 - 1934.136 * t;
  const double app_long = true_long - 0.00569 - 0.00478 * std::sin(omega * kDeg);

  const double mean_obliq =
      23.0 + (26.0 + (21.448 - t * (46.815 + t * (0.00059 - t * 0.001813))) / 60.0) / 60.0;
  const double obliq = mean_obliq + 0.00256 * std::cos(omega * kDeg);
  const double decl = std::asin(std::sin(obliq * kDeg) * std::sin(app_long * kDeg));

  const double y = std::pow(std::tan(obliq * kDeg / 2.0), 2);
  const double l0 = mean_long * kDeg;
  const double eot_min =
      4.0 / kDeg *
      (y * std::sin(2.0 * l0) - 2.0 * ecc * std::sin(m_rad) + 4.0 * ecc * y * std::sin(m_rad) * std::cos(2.0 * l0) -
       0.5 * y * y * std::sin(4.0 * l0) - 1.25 * ecc * ecc * std::sin(2.0 * m_rad));

  const double utc_minutes = std::fmod(unix_s, 86400.0) / 60.0;
  const double solar_time = std::fmod(utc_minutes + eot_min + 4.0 * location.longitude + 2880.0, 1440.0);
  const double hour_angle = (solar_time / 4.0 - 180.0) * kDeg;

  const double lat = location.latitude * kDeg;
  const double cos_zen = std::clamp(
      std::sin(lat) * std::sin(decl) + std::cos(lat) * std::cos(decl) * std::cos(hour_angle), -1.0, 1.0);
  const double elevation = 90.0 - std::acos(cos_zen) / kDeg;
  const double azimuth =
      std::atan2(std::sin(hour_angle), std::cos(hour_angle) * std::sin(lat) - std::tan(decl) * std::cos(lat)) /
          kDeg +
      180.0;
  return {wrap360(azimuth), elevation};
}

double relative_azimuth(double sun_azimuth, double camera_azimuth) {
  return wrap360(sun_azimuth - camera_azimuth);
}

ImageCoords project_sun(const SolarAngles& relative, const ProjectionParams& params) {
  params.validate();
  if (relative.elevation < 0.0) throw RangeError("sun below the horizon");
  ImageCoords c;
  c.relative_azimuth = relative.azimuth;
  c.theta = relative.azimuth * kDeg;
  c.theta_norm = (90.0 - relative.elevation) / 90.0;
  c.radius = params.max_radius * std::pow(c.theta_norm, params.gamma);
  c.delta_y = params.y_offset_base + params.y_offset_slope * (relative.elevation - 45.0);
  c.x = params.center + c.radius * std::sin(c.theta);
  c.y = params.center + c.radius * std::cos(c.theta) + c.delta_y;
  return c;
}

std::pair<double, double> sun_feature(const GeoLocation& location, const Timestamp& when,
                                      const ProjectionParams& params, double image_side) {
  if (!(image_side > 0.0)) throw RangeError("image side must be positive");
  const SolarAngles sun = solar_angles(location, when);
  if (sun.elevation < 0.0) return kBelowHorizon;
  const ImageCoords c =
      project_sun({relative_azimuth(sun.azimuth, location.camera_azimuth), sun.elevation}, params);
  return {c.x / image_side, c.y / image_side};
}

}  // namespace helio::ephemeris
