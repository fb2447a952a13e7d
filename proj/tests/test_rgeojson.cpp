#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "doctest.h"

#include "fieldspace/errors.hpp"
#include "fieldspace/rgeojson.hpp"

using namespace fieldspace;
using nlohmann::json;

namespace {

std::string read_example(const std::string& name) {
  std::ifstream in(std::filesystem::path(FIELDSPACE_TEST_DATA) / "appendix" / (name + ".rgeojson"));
  REQUIRE(in.good());
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

const std::pair<const char*, std::size_t> kAppendix[] = {
    {"point", 1},          {"linestring", 1},      {"rectangle", 1},
    {"ellipse", 1},        {"multipoint", 2},      {"multilinestring", 2},
    {"multirectangle", 2}, {"multiellipse", 2},    {"geometrycollection", 2},
};

json matrix(double a, double b, double c, double d) { return json::array({{a, b}, {c, d}}); }

}  // namespace

TEST_CASE("appendix examples parse, compile and round-trip") {
  for (const auto& [name, units] : kAppendix) {
    CAPTURE(name);
    const RestrictionDocument doc = parse_document(read_example(name));
    CHECK(compile_units(doc).size() == units);
    const std::string text = serialize_document(doc);
    CHECK(parse_document(text) == doc);
    CHECK(parse_document(serialize_document(doc, 2)) == doc);
    CHECK(serialize_document(parse_document(text)) == text);
  }
}

TEST_CASE("appendix point") {
  const auto doc = parse_document(read_example("point"));
  CHECK(doc.geometry.kind == GeometryKind::Point);
  CHECK(doc.geometry.parts.at(0).at(0) == Vec2{100.0, 0.0});
  CHECK(doc.geometry.repulsion->entries() == Matrix2::diag(25, 25));
  const auto units = compile_units(doc);
  CHECK(std::get<PointShape>(units.at(0).geometry()).center == Vec2{100.0, 0.0});
}

TEST_CASE("appendix ellipse") {
  const auto doc = parse_document(read_example("ellipse"));
  CHECK(doc.geometry.kind == GeometryKind::Ellipse);
  CHECK(doc.geometry.shapes.at(0).entries() == Matrix2::diag(50, 50));
  CHECK(doc.geometry.repulsion->entries() == Matrix2::diag(25, 25));
}

TEST_CASE("appendix linestring compiles to one segment") {
  const auto units = compile_units(parse_document(read_example("linestring")));
  REQUIRE(units.size() == 1);
  const auto& l = std::get<LineShape>(units[0].geometry());
  CHECK(l.p1 == Vec2{100, 0});
  CHECK(l.p2 == Vec2{101, 1});
}

TEST_CASE("appendix multiellipse keeps shape order") {
  const auto doc = parse_document(read_example("multiellipse"));
  REQUIRE(doc.geometry.shapes.size() == 2);
  CHECK(doc.geometry.shapes[0].entries() == Matrix2::diag(50, 50));
  CHECK(doc.geometry.shapes[1].entries() == Matrix2{50, 50, 0, 50});
  const auto again = parse_document(serialize_document(doc));
  CHECK(again.geometry.shapes == doc.geometry.shapes);
  const auto units = compile_units(doc);
  CHECK(std::get<EllipseShape>(units[1].geometry()).shape.entries() == Matrix2{50, 50, 0, 50});
}

TEST_CASE("appendix geometry collection") {
  const auto units = compile_units(parse_document(read_example("geometrycollection")));
  REQUIRE(units.size() == 2);
  CHECK(std::holds_alternative<PointShape>(units[0].geometry()));
  CHECK(units[0].repulsion().entries() == Matrix2::diag(25, 25));
  CHECK(std::holds_alternative<LineShape>(units[1].geometry()));
  CHECK(units[1].repulsion().entries() == Matrix2::diag(10, 10));
}

TEST_CASE("polygons are rejected") {
  CHECK_THROWS_AS(parse_document(R"({"type":"Polygon","coordinates":[[[0,0],[1,0],[1,1],[0,0]]],"repulsion":[[1,0],[0,1]]})"),
                  SchemaError);
  CHECK_THROWS_AS(parse_document(R"({"type":"MultiPolygon","coordinates":[],"repulsion":[[1,0],[0,1]]})"),
                  SchemaError);
  CHECK_THROWS_AS(parse_document(R"({"type":"GeometryCollection","geometries":[{"type":"Polygon","coordinates":[],"repulsion":[[1,0],[0,1]]}]})"),
                  SchemaError);
}

TEST_CASE("syntax and schema errors") {
  CHECK_THROWS_AS(parse_document("{\"type\": \"Point\", "), SyntaxError);
  CHECK_THROWS_AS(parse_document("[]"), SchemaError);
  CHECK_THROWS_AS(parse_document(R"({"type":"Circle","coordinates":[0,0],"repulsion":[[1,0],[0,1]]})"), SchemaError);
  CHECK_THROWS_AS(parse_document(R"({"type":"Point","coordinates":[0,0]})"), SchemaError);
  CHECK_THROWS_AS(parse_document(R"({"type":"Point","coordinates":[0],"repulsion":[[1,0],[0,1]]})"), SchemaError);
  CHECK_THROWS_AS(parse_document(R"({"type":"Point","coordinates":[0,0,5],"repulsion":[[1,0],[0,1]]})"), SchemaError);
  CHECK_THROWS_AS(parse_document(R"({"type":"Point","coordinates":[0,0],"repulsion":[[1,0],[0,1]],"shape":[[1,0],[0,1]]})"), SchemaError);
  CHECK_THROWS_AS(parse_document(R"({"type":"Ellipse","coordinates":[0,0],"repulsion":[[1,0],[0,1]]})"), SchemaError);
  CHECK_THROWS_AS(parse_document(R"({"type":"LineString","coordinates":[[0,0]],"repulsion":[[1,0],[0,1]]})"), SchemaError);
  CHECK_THROWS_AS(parse_document(R"({"type":"Rectangle","coordinates":[[0,0],[1,1],[2,2]],"repulsion":[[1,0],[0,1]]})"), SchemaError);
  CHECK_THROWS_AS(parse_document(R"({"type":"MultiEllipse","coordinates":[[0,0],[1,1]],"repulsion":[[1,0],[0,1]],"shape":[[[1,0],[0,1]]]})"), SchemaError);
  CHECK_THROWS_AS(parse_document(R"({"type":"GeometryCollection","geometries":[]})"), SchemaError);
  CHECK_THROWS_AS(parse_document(R"({"type":"GeometryCollection","geometries":[{"type":"Point","coordinates":[0,0]}]})"), SchemaError);
  CHECK_THROWS_AS(parse_document(R"({"type":"GeometryCollection","repulsion":[[1,0],[0,1]],"geometries":[{"type":"Point","coordinates":[0,0],"repulsion":[[1,0],[0,1]]}]})"), SchemaError);
  CHECK_THROWS_AS(parse_document(R"({"type":"Point","coordinates":["a",0],"repulsion":[[1,0],[0,1]]})"), SchemaError);
}

TEST_CASE("matrix errors") {
  CHECK_THROWS_AS(parse_document(R"({"type":"Point","coordinates":[0,0],"repulsion":[[1,2],[3,4]]})"), MatrixError);
  CHECK_THROWS_AS(parse_document(R"({"type":"Point","coordinates":[0,0],"repulsion":[[-1,0],[0,1]]})"), MatrixError);
  CHECK_THROWS_AS(parse_document(R"({"type":"Ellipse","coordinates":[0,0],"repulsion":[[1,0],[0,1]],"shape":[[1,0],[0,-1]]})"), MatrixError);
}

TEST_CASE("document extension keys and unknown keys") {
  const auto doc = parse_document(R"({
    "type": "Point", "coordinates": [1.5, 2.25], "repulsion": [[4, 0], [0, 4]],
    "id": "s-1", "collection": "schools", "properties": {"name": "North"},
    "altitude_ft": 400,
    "active_windows": [{"daily_from": "09:00", "daily_to": "17:00", "utc_offset_minutes": -300}]
  })");
  CHECK(doc.id == "s-1");
  CHECK(doc.collection == "schools");
  CHECK(doc.properties["name"] == "North");
  CHECK(doc.properties["altitude_ft"] == 400);
  REQUIRE(doc.active_windows.size() == 1);
  CHECK(doc.active_windows[0].daily_from == 9 * 3600);
  CHECK(doc.active_windows[0].utc_offset_minutes == -300);
  CHECK(parse_document(serialize_document(doc)) == doc);

  CHECK_THROWS_AS(parse_document(R"({"type":"Point","coordinates":[0,0],"repulsion":[[1,0],[0,1]],
                                     "name":"x","properties":{"name":"y"}})"),
                  SchemaError);
  CHECK_THROWS_AS(parse_document(R"({"type":"Point","coordinates":[0,0],"repulsion":[[1,0],[0,1]],"id":5})"), SchemaError);
}

TEST_CASE("empty properties are omitted") {
  const auto doc = parse_document(R"({"type":"Point","coordinates":[0,0],"repulsion":[[1,0],[0,1]],"properties":{}})");
  const std::string text = serialize_document(doc);
  CHECK(text.find("properties") == std::string::npos);
  CHECK(parse_document(text) == doc);
}

TEST_CASE("numbers survive serialization exactly") {
  const auto doc = parse_document(R"({"type":"Point","coordinates":[0.1, -33.868820000000007],"repulsion":[[2.5e-3,1e-20],[1e-20,7]]})");
  const auto again = parse_document(serialize_document(doc));
  CHECK(again.geometry.parts[0][0].y == -33.868820000000007);
  CHECK(again.geometry.repulsion->entries().a12 == 1e-20);
}

TEST_CASE("activation windows") {
  using namespace std::chrono;
  const auto day = parse_timestamp("2026-03-02T00:00:00Z");
  ActivationWindow office{std::nullopt, std::nullopt, 9 * 3600, 17 * 3600, 0};
  CHECK_FALSE(office.contains(day + hours(3)));
  CHECK(office.contains(day + hours(12)));
  CHECK(office.contains(day + hours(9)));
  CHECK_FALSE(office.contains(day + hours(17)));

  ActivationWindow night{std::nullopt, std::nullopt, 22 * 3600, 6 * 3600, 0};
  CHECK(night.contains(day + hours(23)));
  CHECK(night.contains(day + hours(2)));
  CHECK_FALSE(night.contains(day + hours(12)));

  ActivationWindow local{std::nullopt, std::nullopt, 9 * 3600, 17 * 3600, -300};
  CHECK_FALSE(local.contains(day + hours(12)));
  CHECK(local.contains(day + hours(15)));

  ActivationWindow span{day, day + hours(1), std::nullopt, std::nullopt, 0};
  CHECK(span.contains(day));
  CHECK_FALSE(span.contains(day + hours(1)));
  CHECK_FALSE(span.contains(day - seconds(1)));

  RestrictionDocument doc;
  CHECK(doc.is_active(day));
  doc.active_windows = {span, office};
  CHECK(doc.is_active(day + minutes(30)));
  CHECK(doc.is_active(day + hours(10)));
  CHECK_FALSE(doc.is_active(day + hours(20)));

  CHECK_THROWS_AS(window_from_json(json::object()), SchemaError);
  CHECK_THROWS_AS(window_from_json({{"daily_from", "09:00"}}), SchemaError);
  CHECK_THROWS_AS(window_from_json({{"daily_from", "09:00"}, {"daily_to", "09:00"}}), SchemaError);
  CHECK_THROWS_AS(window_from_json({{"start", "2026-01-02T00:00:00Z"}, {"end", "2026-01-01T00:00:00Z"}}), SchemaError);
  CHECK_THROWS_AS(window_from_json({{"start", "yesterday"}}), SchemaError);
  CHECK_THROWS_AS(window_from_json({{"start", "2026-01-01T00:00:00Z"}, {"until", 3}}), SchemaError);
  CHECK(window_from_json({{"start", 1767225600}}).start == parse_timestamp("2026-01-01T00:00:00Z"));
  const auto w = window_from_json({{"start", "2026-01-01T02:00:00+02:00"}, {"daily_from", "22:00"}, {"daily_to", "06:30:15"}});
  CHECK(window_from_json(json::parse(window_to_json(w).dump())) == w);
}

TEST_CASE("timestamps") {
  CHECK(parse_timestamp("1970-01-01T00:00:00Z").time_since_epoch().count() == 0);
  CHECK(parse_timestamp("2026-10-14T12:00:00+02:00") == parse_timestamp("2026-10-14T10:00:00Z"));
  CHECK(parse_timestamp("86400").time_since_epoch().count() == 86400);
  CHECK(format_timestamp(parse_timestamp("2024-02-29T23:59:59Z")) == "2024-02-29T23:59:59Z");
  CHECK_THROWS_AS(parse_timestamp("2023-02-29T00:00:00Z"), std::invalid_argument);
  CHECK_THROWS_AS(parse_timestamp("2026-10-14 12:00:00"), std::invalid_argument);
  CHECK(parse_time_of_day("23:59:59") == 86399);
  CHECK_THROWS_AS(parse_time_of_day("24:00"), std::invalid_argument);
  CHECK(format_time_of_day(9 * 3600) == "09:00");
  CHECK(format_time_of_day(9 * 3600 + 5) == "09:00:05");
}

TEST_CASE("unit counts on random documents") {
  std::mt19937_64 rng(23);
  std::uniform_int_distribution<int> small(1, 5);
  std::uniform_real_distribution<double> coord(-50, 50);
  auto pos = [&] { return json::array({coord(rng), coord(rng)}); };
  auto positions = [&](int n) {
    json a = json::array();
    for (int i = 0; i < n; ++i) a.push_back(pos());
    return a;
  };
  std::function<std::pair<json, std::size_t>(int)> make = [&](int depth) -> std::pair<json, std::size_t> {
    const int kind = std::uniform_int_distribution<int>(0, depth > 0 ? 8 : 7)(rng);
    const json rep = matrix(4, 1, 1, 9);
    const json shp = matrix(3, 0.5, 0.5, 2);
    switch (kind) {
      case 0: return {{{"type", "Point"}, {"coordinates", pos()}, {"repulsion", rep}}, 1};
      case 1: {
        const int n = small(rng) + 1;
        return {{{"type", "LineString"}, {"coordinates", positions(n)}, {"repulsion", rep}}, n - 1};
      }
      case 2: return {{{"type", "Rectangle"}, {"coordinates", positions(2)}, {"repulsion", rep}}, 1};
      case 3: return {{{"type", "Ellipse"}, {"coordinates", pos()}, {"repulsion", rep}, {"shape", shp}}, 1};
      case 4: {
        const int k = small(rng);
        return {{{"type", "MultiPoint"}, {"coordinates", positions(k)}, {"repulsion", rep}}, k};
      }
      case 5: {
        const int k = small(rng);
        json cs = json::array();
        std::size_t total = 0;
        for (int i = 0; i < k; ++i) {
          const int n = small(rng) + 1;
          cs.push_back(positions(n));
          total += n - 1;
        }
        return {{{"type", "MultiLineString"}, {"coordinates", cs}, {"repulsion", rep}}, total};
      }
      case 6: {
        const int k = small(rng);
        json cs = json::array();
        for (int i = 0; i < k; ++i) cs.push_back(positions(2));
        return {{{"type", "MultiRectangle"}, {"coordinates", cs}, {"repulsion", rep}}, k};
      }
      case 7: {
        const int k = small(rng);
        json shapes = json::array();
        for (int i = 0; i < k; ++i) shapes.push_back(shp);
        return {{{"type", "MultiEllipse"}, {"coordinates", positions(k)}, {"repulsion", rep}, {"shape", shapes}}, k};
      }
      default: {
        const int k = small(rng);
        json members = json::array();
        std::size_t total = 0;
        for (int i = 0; i < k; ++i) {
          auto [m, c] = make(depth - 1);
          members.push_back(m);
          total += c;
        }
        return {{{"type", "GeometryCollection"}, {"geometries", members}}, total};
      }
    }
  };
  for (int i = 0; i < 300; ++i) {
    const auto [value, expected] = make(2);
    const RestrictionDocument doc = document_from_json(value);
    CHECK(compile_units(doc).size() == expected);
    CHECK(parse_document(serialize_document(doc)) == doc);
  }
}

TEST_CASE("position map is applied during compilation") {
  const auto doc = parse_document(read_example("rectangle"));
  const auto units = compile_units(doc, [](Vec2 p) { return Vec2{p.x * 2, p.y - 1}; });
  const auto& r = std::get<RectShape>(units.at(0).geometry());
  CHECK(r.lo == Vec2{200, -1});
  CHECK(r.hi == Vec2{202, 0});
}
