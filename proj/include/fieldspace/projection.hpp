#ifndef FIELDSPACE_PROJECTION_HPP_
#define FIELDSPACE_PROJECTION_HPP_

#include "fieldspace/field.hpp"

namespace fieldspace {

inline constexpr double kEarthRadiusMeters = 6'371'000.0;

/// Geographic position: x = longitude, y = latitude, both in degrees.
using LonLat = Vec2;

/// Local equirectangular projection in meters anchored at a reference
/// position: x = R cos(lat0) Δlon, y = R Δlat (angles in radians).
class LocalProjection {
 public:
  explicit LocalProjection(LonLat anchor);

  LonLat anchor() const { return anchor_; }
  Vec2 to_local(LonLat p) const;
  LonLat to_geo(Vec2 local) const;

  double meters_per_degree_lon() const { return per_deg_lon_; }
  double meters_per_degree_lat() const { return per_deg_lat_; }

  /// Geographic box to projected box.
  BBox to_local(const BBox& geo) const;
  BBox to_geo(const BBox& local) const;

 private:
  LonLat anchor_;
  double per_deg_lon_;
  double per_deg_lat_;
};

/// Meters spanned by one degree of latitude.
double meters_per_degree_lat();
/// Meters spanned by one degree of longitude at the given latitude, floored
/// to a small positive value near the poles.
double meters_per_degree_lon(double lat_deg);

/// Throws RangeError unless lon in [-180, 180] and lat in [-90, 90].
void check_geo_range(LonLat p);

/// Shortest distance in meters between two geographic boxes, measured in
/// the given projection. Zero when they overlap.
double projected_gap(const BBox& a, const BBox& b, const LocalProjection& projection);

}  // namespace fieldspace

#endif  // FIELDSPACE_PROJECTION_HPP_
