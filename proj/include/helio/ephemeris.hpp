// Solar position and its projection onto the fisheye sky image.
#pragma once

#include <utility>

#include "helio/time.hpp"

namespace helio::ephemeris {

/// Camera site. Angles in degrees.
struct GeoLocation {
  double latitude = 0.0;        ///< north positive, [-90, 90]
  double longitude = 0.0;       ///< east positive, [-180, 180]
  double camera_azimuth = 0.0;  ///< optical axis from true north, [0, 360)

  /// Throws RangeError when a field is out of its domain.
  void validate() const;

  /// The Stanford sky camera (37.427 N, -122.174 E, axis at 194 deg).
  static GeoLocation stanford() { return {37.427, -122.174, 194.0}; }
};

/// Apparent solar direction in degrees. Azimuth is clockwise from north.
struct SolarAngles {
  double azimuth = 0.0;    ///< [0, 360)
  double elevation = 0.0;  ///< [-90, 90]
};

/// Empirical fisheye model constants.
struct ProjectionParams {
  double max_radius = 32.0;      ///< R, pixels at the horizon
  double gamma = 1.2;            ///< radial non-linearity exponent
  double y_offset_base = -3.0;   ///< y0, pixels
  double y_offset_slope = 0.03;  ///< m, pixels per degree of elevation
  double center = 32.0;          ///< C, pixels

  void validate() const;

  /// Constants for a square image of the given side (R = C = side / 2).
  static ProjectionParams for_image_side(double side) {
    ProjectionParams p;
    p.max_radius = side / 2.0;
    p.center = side / 2.0;
    return p;
  }
};

/// Projected sun position (origin upper-left, y down) with the intermediate
/// quantities of the projection.
struct ImageCoords {
  double x = 0.0;
  double y = 0.0;
  double relative_azimuth = 0.0;  ///< degrees
  double theta = 0.0;             ///< relative azimuth in radians
  double theta_norm = 0.0;        ///< normalized zenith angle
  double radius = 0.0;            ///< pixels from center
  double delta_y = 0.0;           ///< vertical tilt correction, pixels
};

/// Earliest and latest supported civil years.
inline constexpr int kFirstValidYear = 1950;
inline constexpr int kLastValidYear = 2050;

/// Sun position by the NOAA low-precision algorithm (no refraction).
/// Throws RangeError outside 1950-2050.
SolarAngles solar_angles(const GeoLocation& location, const Timestamp& when);

/// (sun - camera) mod 360, in [0, 360).
double relative_azimuth(double sun_azimuth, double camera_azimuth);

/// Projects a sun direction whose azimuth is already camera-relative.
/// Throws RangeError when the sun is below the horizon.
ImageCoords project_sun(const SolarAngles& relative, const ProjectionParams& params);

/// Feature value emitted when the sun is below the horizon.
inline constexpr std::pair<double, double> kBelowHorizon{-1.0, -1.0};

/// Normalized (x, y) / image_side of the sun, or kBelowHorizon at night.
std::pair<double, double> sun_feature(const GeoLocation& location, const Timestamp& when,
                                      const ProjectionParams& params, double image_side);

}  // namespace helio::ephemeris
