#ifndef FIELDSPACE_CONVERSION_HPP_
#define FIELDSPACE_CONVERSION_HPP_

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fieldspace/field.hpp"
#include "fieldspace/rgeojson.hpp"

namespace fieldspace {

struct PolygonApproxOptions {
  // Raster cells along the longer side of the polygon's bounding box.
  std::size_t resolution = 128;
  std::string collection;
  // Output ids are "<id_prefix>-<n>"; left empty when the prefix is empty.
  std::string id_prefix;
};

/// Covers a simple closed ring (first position == last) with at most
/// `budget` disjoint axis-aligned Rectangle documents. The ring is
/// rasterized at the configured resolution; every cell overlapping the
/// polygon is covered, and consecutive raster rows are grouped into bands
/// so that the total band area is minimal for the budget.
///
/// Throws GeometryError for open, degenerate or self-intersecting rings.
std::vector<RestrictionDocument> approximate_polygon(std::span<const Vec2> ring,
                                                     std::size_t budget,
                                                     const RepulsionMatrix& repulsion,
                                                     const PolygonApproxOptions& options = {});

/// Area of polygon ∩ box, polygon given as a ring without the closing vertex.
double clipped_area(std::span<const Vec2> polygon, const BBox& box);

/// Signed shoelace area of a ring (closing vertex optional).
double ring_area(std::span<const Vec2> ring);

struct PointRecord {
  double lon = 0.0;
  double lat = 0.0;
  std::string name;
  // 1-based source line, 0 when not read from text.
  std::size_t line = 0;
};

/// Reads delimiter-separated "lon<d>lat<d>name" records. Blank lines, lines
/// starting with '#', and a leading "lon,lat,name" header are skipped. The
/// name is everything after the second delimiter. Throws SchemaError naming
/// the offending line.
std::vector<PointRecord> parse_point_records(std::string_view text, char delimiter = ',');

/// One Point document per record with the given repulsion. Ids are derived
/// from the record content so re-ingesting the same data yields the same ids.
/// Throws RangeError for coordinates outside lon [-180, 180], lat [-90, 90]
/// and MatrixError for an invalid repulsion matrix.
std::vector<RestrictionDocument> ingest_point_dataset(std::span<const PointRecord> records,
                                                      const std::string& collection,
                                                      const Matrix2& default_repulsion);

}  // namespace fieldspace

#endif  // FIELDSPACE_CONVERSION_HPP_
