// Shared service fixture: a small store, three keys and a settable clock.
#ifndef FIELDSPACE_TESTS_FIXTURES_HPP_
#define FIELDSPACE_TESTS_FIXTURES_HPP_

#include <memory>
#include <string>

#include "fieldspace/server.hpp"

namespace fixture {

using namespace fieldspace;

inline const Timestamp kNoon = parse_timestamp("2026-06-01T12:00:00Z");
inline const LonLat kCenter{-122.0, 37.0};

inline LonLat offset(LonLat p, double east_m, double north_m) {
  return {p.x + east_m / meters_per_degree_lon(p.y), p.y + north_m / meters_per_degree_lat()};
}

inline RestrictionDocument point_doc(std::string id, std::string collection, LonLat p, double a) {
  RestrictionDocument d;
  d.geometry.kind = GeometryKind::Point;
  d.geometry.parts = {{p}};
  d.geometry.repulsion = RepulsionMatrix(Matrix2::diag(a, a));
  d.id = std::move(id);
  d.collection = std::move(collection);
  return d;
}

inline RestrictionDocument rect_doc(std::string id, std::string collection, LonLat lo, LonLat hi, double a) {
  RestrictionDocument d = point_doc(std::move(id), std::move(collection), lo, a);
  d.geometry.kind = GeometryKind::Rectangle;
  d.geometry.parts = {{lo, hi}};
  return d;
}

// Two schools and a hospital near kCenter, one school far away.
inline void populate(GeoStore& store) {
  store.insert(rect_doc("school-a", "schools", offset(kCenter, -40, -30), offset(kCenter, 40, 30), 400));
  store.insert(point_doc("school-b", "schools", offset(kCenter, 300, 200), 2500));
  store.insert(point_doc("hospital-a", "hospitals", offset(kCenter, -250, 100), 900));
  store.insert(point_doc("school-far", "schools", offset(kCenter, 30000, 0), 2500));
  store.register_collection("airports");
}

inline ApiKeyTable keys() {
  return {{"obs-key", {"watcher", ClearanceTier::Observer}},
          {"op-key", {"drone-1", ClearanceTier::Operator}},
          {"admin-key", {"root", ClearanceTier::Administrator}}};
}

inline AddressTable addresses() {
  AddressTable t;
  t.insert("1 Main Street, Springfield", {kCenter, 1000.0});
  t.insert("Far Away", {offset(kCenter, 80000, 0), 500.0});
  return t;
}

struct ManualClock {
  std::shared_ptr<Timestamp> now = std::make_shared<Timestamp>(kNoon);
  Clock clock() const {
    auto p = now;
    return [p] { return *p; };
  }
  void advance(std::chrono::seconds s) { *now += s; }
};

inline Request get(std::string path, std::string key) {
  Request r;
  r.method = "GET";
  r.path = std::move(path);
  if (!key.empty()) r.api_key = std::move(key);
  return r;
}

inline Request post(std::string path, std::string key, std::string body) {
  Request r = get(std::move(path), std::move(key));
  r.method = "POST";
  r.body = std::move(body);
  return r;
}

}  // namespace fixture

#endif  // FIELDSPACE_TESTS_FIXTURES_HPP_
