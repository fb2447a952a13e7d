#include "fieldspace/rgeojson.hpp"

#include <array>
#include <chrono>
#include <cmath>
#include <set>

#include "fieldspace/errors.hpp"

namespace fieldspace {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

constexpr std::array<std::string_view, 9> kKindNames = {
    "Point",           "LineString",     "Rectangle",    "Ellipse",
    "MultiPoint",      "MultiLineString", "MultiRectangle", "MultiEllipse",
    "GeometryCollection",
};

const std::set<std::string, std::less<>> kGeometryKeys = {"type", "coordinates", "repulsion",
                                                          "shape", "geometries"};
const std::set<std::string, std::less<>> kDocumentKeys = {"id", "collection", "properties",
                                                          "active_windows"};

bool is_multi(GeometryKind k) {
  return k == GeometryKind::MultiPoint || k == GeometryKind::MultiLineString ||
         k == GeometryKind::MultiRectangle || k == GeometryKind::MultiEllipse;
}

bool is_ellipse(GeometryKind k) {
  return k == GeometryKind::Ellipse || k == GeometryKind::MultiEllipse;
}

double number_from(const json& v, std::string_view where) {
  if (!v.is_number()) {
    throw SchemaError(std::string(where) + ": expected a number");
  }
  const double d = v.get<double>();
  if (!std::isfinite(d)) {
    throw SchemaError(std::string(where) + ": number is not finite");
  }
  return d;
}

Vec2 position_from(const json& v, std::string_view where) {
  if (!v.is_array() || v.size() != 2) {
    throw SchemaError(std::string(where) + ": a position is a [longitude, latitude] pair");
  }
  return {number_from(v[0], where), number_from(v[1], where)};
}

std::vector<Vec2> positions_from(const json& v, std::string_view where) {
  if (!v.is_array()) {
    throw SchemaError(std::string(where) + ": expected a list of positions");
  }
  std::vector<Vec2> out;
  out.reserve(v.size());
  for (const json& p : v) {
    out.push_back(position_from(p, where));
  }
  return out;
}

Matrix2 matrix_from(const json& v, std::string_view where) {
  if (!v.is_array() || v.size() != 2 || !v[0].is_array() || v[0].size() != 2 ||
      !v[1].is_array() || v[1].size() != 2) {
    throw SchemaError(std::string(where) + ": expected a 2x2 matrix");
  }
  return {number_from(v[0][0], where), number_from(v[0][1], where),
          number_from(v[1][0], where), number_from(v[1][1], where)};
}

ordered_json position_to_json(Vec2 p) { return ordered_json::array({p.x, p.y}); }

ordered_json positions_to_json(const std::vector<Vec2>& ps) {
  ordered_json out = ordered_json::array();
  for (const Vec2& p : ps) out.push_back(position_to_json(p));
  return out;
}

ordered_json matrix_to_json(const Matrix2& m) {
  return ordered_json::array({ordered_json::array({m.a11, m.a12}),
                              ordered_json::array({m.a21, m.a22})});
}

void require_key(const json& obj, std::string_view key, GeometryKind kind) {
  if (!obj.contains(key)) {
    throw SchemaError(std::string(to_string(kind)) + " requires \"" + std::string(key) + "\"");
  }
}

void forbid_key(const json& obj, std::string_view key, GeometryKind kind) {
  if (obj.contains(key)) {
    throw SchemaError(std::string(to_string(kind)) + " does not take \"" + std::string(key) +
                      "\"");
  }
}

RestrictionGeometry parse_geometry_object(const json& obj, bool top_level) {
  if (!obj.is_object()) {
    throw SchemaError("geometry must be a JSON object");
  }
  const auto type_it = obj.find("type");
  if (type_it == obj.end() || !type_it->is_string()) {
    throw SchemaError("geometry requires a string \"type\"");
  }
  const std::string type_name = type_it->get<std::string>();
  if (type_name == "Polygon" || type_name == "MultiPolygon") {
    throw SchemaError("RGeoJSON does not support polygon geometry (\"" + type_name + "\")");
  }
  const auto kind_opt = geometry_kind_from_string(type_name);
  if (!kind_opt) {
    throw SchemaError("unknown geometry type \"" + type_name + "\"");
  }
  const GeometryKind kind = *kind_opt;
  const std::string where(type_name);

  if (!top_level) {
    for (const auto& item : obj.items()) {
      if (!kGeometryKeys.contains(item.key())) {
        throw SchemaError("collection member " + where + " has unexpected key \"" +
                          item.key() + "\"");
      }
    }
  }

  RestrictionGeometry g;
  g.kind = kind;

  if (kind == GeometryKind::GeometryCollection) {
    forbid_key(obj, "coordinates", kind);
    forbid_key(obj, "repulsion", kind);
    forbid_key(obj, "shape", kind);
    require_key(obj, "geometries", kind);
    const json& members = obj.at("geometries");
    if (!members.is_array() || members.empty()) {
      throw SchemaError("GeometryCollection requires a non-empty \"geometries\" list");
    }
    for (const json& m : members) {
      g.geometries.push_back(parse_geometry_object(m, false));
    }
    return g;
  }

  forbid_key(obj, "geometries", kind);
  require_key(obj, "coordinates", kind);
  require_key(obj, "repulsion", kind);
  if (is_ellipse(kind)) {
    require_key(obj, "shape", kind);
  } else {
    forbid_key(obj, "shape", kind);
  }

  const json& coords = obj.at("coordinates");
  switch (kind) {
    case GeometryKind::Point:
    case GeometryKind::Ellipse:
      g.parts.push_back({position_from(coords, where)});
      break;
    case GeometryKind::LineString: {
      auto line = positions_from(coords, where);
      if (line.size() < 2) {
        throw SchemaError("LineString requires at least 2 positions");
      }
      g.parts.push_back(std::move(line));
      break;
    }
    case GeometryKind::Rectangle: {
      auto corners = positions_from(coords, where);
      if (corners.size() != 2) {
        throw SchemaError("Rectangle requires exactly 2 corner positions");
      }
      g.parts.push_back(std::move(corners));
      break;
    }
    case GeometryKind::MultiPoint:
    case GeometryKind::MultiEllipse:
      for (const Vec2& p : positions_from(coords, where)) {
        g.parts.push_back({p});
      }
      break;
    case GeometryKind::MultiLineString:
    case GeometryKind::MultiRectangle:
      if (!coords.is_array()) {
        throw SchemaError(where + ": expected a list of position lists");
      }
      for (const json& part : coords) {
        auto ps = positions_from(part, where);
        if (kind == GeometryKind::MultiLineString && ps.size() < 2) {
          throw SchemaError("MultiLineString members require at least 2 positions");
        }
        if (kind == GeometryKind::MultiRectangle && ps.size() != 2) {
          throw SchemaError("MultiRectangle members require exactly 2 corner positions");
        }
        g.parts.push_back(std::move(ps));
      }
      break;
    case GeometryKind::GeometryCollection:
      break;
  }
  if (is_multi(kind) && g.parts.empty()) {
    throw SchemaError(where + " requires at least one member");
  }

  g.repulsion.emplace(matrix_from(obj.at("repulsion"), where + " repulsion"));

  if (kind == GeometryKind::Ellipse) {
    g.shapes.emplace_back(matrix_from(obj.at("shape"), where + " shape"));
  } else if (kind == GeometryKind::MultiEllipse) {
    const json& shapes = obj.at("shape");
    if (!shapes.is_array()) {
      throw SchemaError("MultiEllipse shape must be a list of 2x2 matrices");
    }
    for (const json& s : shapes) {
      g.shapes.emplace_back(matrix_from(s, where + " shape"));
    }
    if (g.shapes.size() != g.parts.size()) {
      throw SchemaError("MultiEllipse needs one shape matrix per center (" +
                        std::to_string(g.parts.size()) + " centers, " +
                        std::to_string(g.shapes.size()) + " shapes)");
    }
  }
  return g;
}

template <class Sink>
void compile_into(const RestrictionGeometry& g, const PositionMap& map, Sink& out) {
  auto at = [&](Vec2 p) { return map ? map(p) : p; };
  if (g.kind == GeometryKind::GeometryCollection) {
    for (const RestrictionGeometry& m : g.geometries) compile_into(m, map, out);
    return;
  }
  const RepulsionMatrix& a = *g.repulsion;
  for (std::size_t i = 0; i < g.parts.size(); ++i) {
    const std::vector<Vec2>& part = g.parts[i];
    switch (g.kind) {
      case GeometryKind::Point:
      case GeometryKind::MultiPoint:
        out.push_back(FieldUnit::point(at(part[0]), a));
        break;
      case GeometryKind::LineString:
      case GeometryKind::MultiLineString:
        for (std::size_t j = 0; j + 1 < part.size(); ++j) {
          out.push_back(FieldUnit::line(at(part[j]), at(part[j + 1]), a));
        }
        break;
      case GeometryKind::Rectangle:
      case GeometryKind::MultiRectangle:
        out.push_back(FieldUnit::rectangle(at(part[0]), at(part[1]), a));
        break;
      case GeometryKind::Ellipse:
      case GeometryKind::MultiEllipse:
        out.push_back(FieldUnit::ellipse(at(part[0]), g.shapes[i], a));
        break;
      case GeometryKind::GeometryCollection:
        break;
    }
  }
}

}  // namespace

std::string_view to_string(GeometryKind kind) { return kKindNames[static_cast<int>(kind)]; }

std::optional<GeometryKind> geometry_kind_from_string(std::string_view name) {
  for (std::size_t i = 0; i < kKindNames.size(); ++i) {
    if (kKindNames[i] == name) return static_cast<GeometryKind>(i);
  }
  return std::nullopt;
}

bool ActivationWindow::contains(Timestamp t) const {
  if (start && t < *start) return false;
  if (end && t >= *end) return false;
  if (daily_from && daily_to) {
    constexpr long long kDay = 86400;
    const long long local = t.time_since_epoch().count() + 60LL * utc_offset_minutes;
    const long long tod = ((local % kDay) + kDay) % kDay;
    if (*daily_from < *daily_to) {
      return tod >= *daily_from && tod < *daily_to;
    }
    return tod >= *daily_from || tod < *daily_to;
  }
  return true;
}

bool RestrictionDocument::is_active(Timestamp t) const {
  if (active_windows.empty()) return true;
  for (const ActivationWindow& w : active_windows) {
    if (w.contains(t)) return true;
  }
  return false;
}

ActivationWindow window_from_json(const json& v) {
  if (!v.is_object()) {
    throw SchemaError("activation window must be an object");
  }
  ActivationWindow w;
  auto text_field = [&](const char* key) -> std::optional<std::string> {
    const auto it = v.find(key);
    if (it == v.end()) return std::nullopt;
    if (it->is_number_integer() && (std::string_view(key) == "start" ||
                                    std::string_view(key) == "end")) {
      return std::to_string(it->get<long long>());
    }
    if (!it->is_string()) {
      throw SchemaError(std::string("activation window \"") + key + "\" must be a string");
    }
    return it->get<std::string>();
  };
  for (const auto& item : v.items()) {
    const std::string& k = item.key();
    if (k != "start" && k != "end" && k != "daily_from" && k != "daily_to" &&
        k != "utc_offset_minutes") {
      throw SchemaError("activation window has unexpected key \"" + k + "\"");
    }
  }
  try {
    if (auto s = text_field("start")) w.start = parse_timestamp(*s);
    if (auto s = text_field("end")) w.end = parse_timestamp(*s);
    if (auto s = text_field("daily_from")) w.daily_from = parse_time_of_day(*s);
    if (auto s = text_field("daily_to")) w.daily_to = parse_time_of_day(*s);
  } catch (const std::invalid_argument& e) {
    throw SchemaError(std::string("activation window: ") + e.what());
  }
  if (const auto it = v.find("utc_offset_minutes"); it != v.end()) {
    if (!it->is_number_integer() || std::abs(it->get<long long>()) > 24 * 60) {
      throw SchemaError("activation window utc_offset_minutes must be an integer in [-1440, 1440]");
    }
    w.utc_offset_minutes = it->get<int>();
  }
  if (w.daily_from.has_value() != w.daily_to.has_value()) {
    throw SchemaError("activation window needs both daily_from and daily_to");
  }
  if (w.daily_from && *w.daily_from == *w.daily_to) {
    throw SchemaError("activation window daily_from and daily_to must differ");
  }
  if (!w.start && !w.end && !w.daily_from) {
    throw SchemaError("activation window needs at least one bound");
  }
  if (w.start && w.end && !(*w.start < *w.end)) {
    throw SchemaError("activation window start must precede end");
  }
  return w;
}

ordered_json window_to_json(const ActivationWindow& w) {
  ordered_json out = ordered_json::object();
  if (w.start) out["start"] = format_timestamp(*w.start);
  if (w.end) out["end"] = format_timestamp(*w.end);
  if (w.daily_from) out["daily_from"] = format_time_of_day(*w.daily_from);
  if (w.daily_to) out["daily_to"] = format_time_of_day(*w.daily_to);
  if (w.utc_offset_minutes != 0) out["utc_offset_minutes"] = w.utc_offset_minutes;
  return out;
}

RestrictionGeometry geometry_from_json(const json& value) {
  return parse_geometry_object(value, false);
}

RestrictionDocument document_from_json(const json& value) {
  if (!value.is_object()) {
    throw SchemaError("document must be a JSON object");
  }
  RestrictionDocument doc;
  doc.geometry = parse_geometry_object(value, true);

  if (const auto it = value.find("id"); it != value.end()) {
    if (!it->is_string()) throw SchemaError("\"id\" must be a string");
    doc.id = it->get<std::string>();
  }
  if (const auto it = value.find("collection"); it != value.end()) {
    if (!it->is_string()) throw SchemaError("\"collection\" must be a string");
    doc.collection = it->get<std::string>();
  }
  if (const auto it = value.find("properties"); it != value.end()) {
    if (!it->is_object()) throw SchemaError("\"properties\" must be an object");
    doc.properties = *it;
  }
  if (const auto it = value.find("active_windows"); it != value.end()) {
    if (!it->is_array()) throw SchemaError("\"active_windows\" must be a list");
    for (const json& w : *it) doc.active_windows.push_back(window_from_json(w));
  }
  for (const auto& item : value.items()) {
    if (kGeometryKeys.contains(item.key()) || kDocumentKeys.contains(item.key())) continue;
    if (doc.properties.contains(item.key())) {
      throw SchemaError("key \"" + item.key() + "\" appears both at top level and in properties");
    }
    doc.properties[item.key()] = item.value();
  }
  return doc;
}

RestrictionDocument parse_document(std::string_view text) {
  json value;
  try {
    value = json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    throw SyntaxError(e.what());
  }
  return document_from_json(value);
}

ordered_json geometry_to_json(const RestrictionGeometry& g) {
  ordered_json out = ordered_json::object();
  out["type"] = std::string(to_string(g.kind));
  switch (g.kind) {
    case GeometryKind::Point:
    case GeometryKind::Ellipse:
      out["coordinates"] = position_to_json(g.parts.at(0).at(0));
      break;
    case GeometryKind::LineString:
    case GeometryKind::Rectangle:
      out["coordinates"] = positions_to_json(g.parts.at(0));
      break;
    case GeometryKind::MultiPoint:
    case GeometryKind::MultiEllipse: {
      ordered_json cs = ordered_json::array();
      for (const auto& part : g.parts) cs.push_back(position_to_json(part.at(0)));
      out["coordinates"] = std::move(cs);
      break;
    }
    case GeometryKind::MultiLineString:
    case GeometryKind::MultiRectangle: {
      ordered_json cs = ordered_json::array();
      for (const auto& part : g.parts) cs.push_back(positions_to_json(part));
      out["coordinates"] = std::move(cs);
      break;
    }
    case GeometryKind::GeometryCollection: {
      ordered_json ms = ordered_json::array();
      for (const auto& m : g.geometries) ms.push_back(geometry_to_json(m));
      out["geometries"] = std::move(ms);
      return out;
    }
  }
  out["repulsion"] = matrix_to_json(g.repulsion->entries());
  if (g.kind == GeometryKind::Ellipse) {
    out["shape"] = matrix_to_json(g.shapes.at(0).entries());
  } else if (g.kind == GeometryKind::MultiEllipse) {
    ordered_json ss = ordered_json::array();
    for (const auto& s : g.shapes) ss.push_back(matrix_to_json(s.entries()));
    out["shape"] = std::move(ss);
  }
  return out;
}

ordered_json document_to_json(const RestrictionDocument& doc) {
  ordered_json out = geometry_to_json(doc.geometry);
  if (!doc.id.empty()) out["id"] = doc.id;
  if (!doc.collection.empty()) out["collection"] = doc.collection;
  if (!doc.properties.empty()) out["properties"] = ordered_json::parse(doc.properties.dump());
  if (!doc.active_windows.empty()) {
    ordered_json ws = ordered_json::array();
    for (const auto& w : doc.active_windows) ws.push_back(window_to_json(w));
    out["active_windows"] = std::move(ws);
  }
  return out;
}

std::string serialize_document(const RestrictionDocument& doc, int indent) {
  return document_to_json(doc).dump(indent);
}

std::vector<FieldUnit> compile_units(const RestrictionGeometry& geometry, const PositionMap& map) {
  std::vector<FieldUnit> out;
  compile_into(geometry, map, out);
  return out;
}

std::vector<FieldUnit> compile_units(const RestrictionDocument& doc, const PositionMap& map) {
  return compile_units(doc.geometry, map);
}

}  // namespace fieldspace
