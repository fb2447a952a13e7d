#include "fieldspace/projection.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "fieldspace/errors.hpp"

namespace fieldspace {

namespace {

constexpr double kMinCosLat = 1e-6;

double axis_gap(double a_lo, double a_hi, double b_lo, double b_hi) {
  return std::max({a_lo - b_hi, b_lo - a_hi, 0.0});
}

}  // namespace

double meters_per_degree_lat() { return kEarthRadiusMeters * std::numbers::pi / 180.0; }

double meters_per_degree_lon(double lat_deg) {
  const double c = std::cos(lat_deg * std::numbers::pi / 180.0);
  return meters_per_degree_lat() * std::max(c, kMinCosLat);
}

LocalProjection::LocalProjection(LonLat anchor)
    : anchor_(anchor),
      per_deg_lon_(fieldspace::meters_per_degree_lon(anchor.y)),
      per_deg_lat_(fieldspace::meters_per_degree_lat()) {}

Vec2 LocalProjection::to_local(LonLat p) const {
  return {(p.x - anchor_.x) * per_deg_lon_, (p.y - anchor_.y) * per_deg_lat_};
}

LonLat LocalProjection::to_geo(Vec2 local) const {
  return {anchor_.x + local.x / per_deg_lon_, anchor_.y + local.y / per_deg_lat_};
}

BBox LocalProjection::to_local(const BBox& geo) const {
  return {to_local(geo.lo), to_local(geo.hi)};
}

BBox LocalProjection::to_geo(const BBox& local) const {
  return {to_geo(local.lo), to_geo(local.hi)};
}

void check_geo_range(LonLat p) {
  if (p.x < -180.0 || p.x > 180.0 || p.y < -90.0 || p.y > 90.0) {
    throw RangeError("position out of range (lon " + std::to_string(p.x) + ", lat " +
                     std::to_string(p.y) + ")");
  }
}

double projected_gap(const BBox& a, const BBox& b, const LocalProjection& projection) {
  const double gx = axis_gap(a.lo.x, a.hi.x, b.lo.x, b.hi.x) * projection.meters_per_degree_lon();
  const double gy = axis_gap(a.lo.y, a.hi.y, b.lo.y, b.hi.y) * projection.meters_per_degree_lat();
  return std::hypot(gx, gy);
}

}  // namespace fieldspace
