// Geodesic primitives shared by every stage: great-circle distance,
// initial bearing, and a local tangent-plane approximation used for
// point-to-segment projection and curve fitting.
#pragma once

#include <cmath>
#include <stdexcept>

namespace tvp {

constexpr double kEarthRadiusM = 6371000.0;
constexpr double kPi = 3.14159265358979323846;
constexpr double kDegToRad = kPi / 180.0;
constexpr double kMetersPerDegLat = kEarthRadiusM * kDegToRad;

struct GeoPoint {
  double lat = 0.0;  // degrees, WGS84
  double lng = 0.0;  // degrees, WGS84
};

inline bool valid_coords(const GeoPoint& p) {
  return p.lat >= -90.0 && p.lat <= 90.0 && p.lng >= -180.0 && p.lng <= 180.0;
}

// Great-circle distance (haversine) with the fixed mean earth radius.
inline double direct_distance(const GeoPoint& a, const GeoPoint& b) {
  const double phi1 = a.lat * kDegToRad;
  const double phi2 = b.lat * kDegToRad;
  const double dphi = (b.lat - a.lat) * kDegToRad;
  const double dlmb = (b.lng - a.lng) * kDegToRad;
  const double sp = std::sin(dphi * 0.5);
  const double sl = std::sin(dlmb * 0.5);
  const double h = sp * sp + std::cos(phi1) * std::cos(phi2) * sl * sl;
  return 2.0 * kEarthRadiusM * std::asin(std::min(1.0, std::sqrt(h)));
}

// Initial great-circle bearing from a to b, clockwise from north in [0, 360).
inline double bearing_deg(const GeoPoint& a, const GeoPoint& b) {
  if (a.lat == b.lat && a.lng == b.lng)
    throw std::invalid_argument("bearing undefined for coincident points");
  const double phi1 = a.lat * kDegToRad;
  const double phi2 = b.lat * kDegToRad;
  const double dlmb = (b.lng - a.lng) * kDegToRad;
  const double y = std::sin(dlmb) * std::cos(phi2);
  const double x = std::cos(phi1) * std::sin(phi2) -
                   std::sin(phi1) * std::cos(phi2) * std::cos(dlmb);
  double deg = std::atan2(y, x) / kDegToRad;
  deg = std::fmod(deg + 360.0, 360.0);
  return deg == 360.0 ? 0.0 : deg;
}

inline double normalize_deg(double d) {
  d = std::fmod(d, 360.0);
  if (d < 0) d += 360.0;
  return d == 360.0 ? 0.0 : d;
}

// Equirectangular east/north offsets (meters) of p relative to origin.
// Adequate at the sub-kilometer scales of segment projection.
struct EastNorth {
  double east = 0.0;
  double north = 0.0;
};

inline EastNorth to_east_north(const GeoPoint& origin, const GeoPoint& p) {
  const double coslat = std::cos(origin.lat * kDegToRad);
  return {(p.lng - origin.lng) * kMetersPerDegLat * coslat,
          (p.lat - origin.lat) * kMetersPerDegLat};
}

inline GeoPoint from_east_north(const GeoPoint& origin, const EastNorth& en) {
  const double coslat = std::cos(origin.lat * kDegToRad);
  return {origin.lat + en.north / kMetersPerDegLat,
          origin.lng + en.east / (kMetersPerDegLat * coslat)};
}

}  // namespace tvp
