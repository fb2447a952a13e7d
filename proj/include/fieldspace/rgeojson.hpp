#ifndef FIELDSPACE_RGEOJSON_HPP_
#define FIELDSPACE_RGEOJSON_HPP_

#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "fieldspace/field.hpp"
#include "fieldspace/time.hpp"

namespace fieldspace {

enum class GeometryKind {
  Point,
  LineString,
  Rectangle,
  Ellipse,
  MultiPoint,
  MultiLineString,
  MultiRectangle,
  MultiEllipse,
  GeometryCollection,
};

std::string_view to_string(GeometryKind kind);
std::optional<GeometryKind> geometry_kind_from_string(std::string_view name);

/// One RGeoJSON geometry object. Positions are [longitude, latitude] pairs
/// stored as Vec2{lon, lat}.
struct RestrictionGeometry {
  GeometryKind kind = GeometryKind::Point;
  // One entry per primitive: a single position for points and ellipse
  // centers, a corner pair for rectangles, a vertex list for line strings.
  // Single-object kinds have exactly one part.
  std::vector<std::vector<Vec2>> parts;
  // Absent only for GeometryCollection; members carry their own.
  std::optional<RepulsionMatrix> repulsion;
  // One per part for Ellipse/MultiEllipse, empty otherwise.
  std::vector<ShapeMatrix> shapes;
  std::vector<RestrictionGeometry> geometries;

  friend bool operator==(const RestrictionGeometry&, const RestrictionGeometry&) = default;
};

/// Interval during which a restriction contributes to the field. Absolute
/// bounds are UTC; the daily window is evaluated in local time given by
/// utc_offset_minutes and may wrap across midnight (from > to).
struct ActivationWindow {
  std::optional<Timestamp> start;  // inclusive
  std::optional<Timestamp> end;    // exclusive
  std::optional<int> daily_from;   // seconds of day, inclusive
  std::optional<int> daily_to;     // seconds of day, exclusive
  int utc_offset_minutes = 0;

  bool contains(Timestamp t) const;

  friend bool operator==(const ActivationWindow&, const ActivationWindow&) = default;
};

struct RestrictionDocument {
  RestrictionGeometry geometry;
  std::string id;
  std::string collection;
  // Always a JSON object.
  nlohmann::json properties = nlohmann::json::object();
  std::vector<ActivationWindow> active_windows;

  /// No windows means always active.
  bool is_active(Timestamp t) const;

  friend bool operator==(const RestrictionDocument&, const RestrictionDocument&) = default;
};

/// Parses and validates one document. The geometry keys follow the
/// RGeoJSON object layout; the optional extension keys are "id",
/// "collection", "properties" and "active_windows". Any other top-level key
/// is preserved inside properties.
///
/// Throws SyntaxError for malformed JSON, SchemaError for structural
/// problems (including Polygon/MultiPolygon), MatrixError for invalid
/// repulsion or shape matrices.
RestrictionDocument parse_document(std::string_view text);
RestrictionDocument document_from_json(const nlohmann::json& value);
RestrictionGeometry geometry_from_json(const nlohmann::json& value);

nlohmann::ordered_json geometry_to_json(const RestrictionGeometry& geometry);
nlohmann::ordered_json document_to_json(const RestrictionDocument& doc);
/// Compact JSON unless indent >= 0.
std::string serialize_document(const RestrictionDocument& doc, int indent = -1);

nlohmann::ordered_json window_to_json(const ActivationWindow& window);
ActivationWindow window_from_json(const nlohmann::json& value);

using PositionMap = std::function<Vec2(Vec2)>;

/// Expands a document into field units in document order. Positions are
/// passed through `map` (identity when empty); matrices are used as stored.
std::vector<FieldUnit> compile_units(const RestrictionDocument& doc,
                                     const PositionMap& map = {});
std::vector<FieldUnit> compile_units(const RestrictionGeometry& geometry,
                                     const PositionMap& map = {});

}  // namespace fieldspace

#endif  // FIELDSPACE_RGEOJSON_HPP_
