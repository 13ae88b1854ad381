#pragma once

#include <cmath>
#include <numbers>

namespace pfmlab::geo {

inline constexpr double earth_radius_km = 6371.0;

struct lat_lon {
  double lat = 0.0;  // degrees
  double lon = 0.0;  // degrees

  friend bool operator==(const lat_lon&, const lat_lon&) = default;
};

constexpr double to_radians(double deg) noexcept { return deg * std::numbers::pi / 180.0; }
constexpr double to_degrees(double rad) noexcept { return rad * 180.0 / std::numbers::pi; }

/// Great-circle distance in km.
inline double haversine_km(lat_lon a, lat_lon b) noexcept {
  const double dlat = to_radians(b.lat - a.lat);
  const double dlon = to_radians(b.lon - a.lon);
  const double s = std::sin(dlat / 2.0);
  const double t = std::sin(dlon / 2.0);
  const double h = s * s + std::cos(to_radians(a.lat)) * std::cos(to_radians(b.lat)) * t * t;
  return 2.0 * earth_radius_km * std::asin(std::sqrt(std::fmin(1.0, h)));
}

/// Point at the given bearing/distance; used by synthetic data generators.
inline lat_lon destination(lat_lon origin, double bearing_deg, double distance_km) noexcept {
  const double d = distance_km / earth_radius_km;
  const double br = to_radians(bearing_deg);
  const double la = to_radians(origin.lat);
  const double lo = to_radians(origin.lon);
  const double la2 = std::asin(std::sin(la) * std::cos(d) + std::cos(la) * std::sin(d) * std::cos(br));
  const double lo2 = lo + std::atan2(std::sin(br) * std::sin(d) * std::cos(la), std::cos(d) - std::sin(la) * std::sin(la2));
  double lon = to_degrees(lo2);
  lon = std::fmod(lon + 540.0, 360.0) - 180.0;
  return {to_degrees(la2), lon};
}

}  // namespace pfmlab::geo
