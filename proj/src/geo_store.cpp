#include "fieldspace/geo_store.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>

#include <boost/geometry.hpp>
#include <boost/geometry/index/rtree.hpp>
#include <boost/iterator/function_output_iterator.hpp>

#include "fieldspace/errors.hpp"

namespace fieldspace {

namespace bg = boost::geometry;
namespace bgi = boost::geometry::index;

namespace {

using IndexPoint = bg::model::point<double, 2, bg::cs::cartesian>;
using IndexBox = bg::model::box<IndexPoint>;
using IndexValue = std::pair<IndexBox, std::string>;

// Relative slack on index query boxes so rounding never drops a candidate
// the exact predicate would accept.
constexpr double kQuerySlack = 1e-9;

IndexBox to_index_box(const BBox& b) {
  return {IndexPoint{b.lo.x, b.lo.y}, IndexPoint{b.hi.x, b.hi.y}};
}

void extend(BBox& box, bool& empty, Vec2 p) {
  if (empty) {
    box = {p, p};
    empty = false;
    return;
  }
  box.lo = {std::min(box.lo.x, p.x), std::min(box.lo.y, p.y)};
  box.hi = {std::max(box.hi.x, p.x), std::max(box.hi.y, p.y)};
}

void accumulate(const RestrictionGeometry& g, double reach_k, BBox& box, bool& empty,
                double& margin) {
  if (g.kind == GeometryKind::GeometryCollection) {
    for (const auto& m : g.geometries) accumulate(m, reach_k, box, empty, margin);
    return;
  }
  margin = std::max(margin, reach_k * std::sqrt(g.repulsion->max_eigenvalue()));
  const bool ellipses =
      g.kind == GeometryKind::Ellipse || g.kind == GeometryKind::MultiEllipse;
  for (std::size_t i = 0; i < g.parts.size(); ++i) {
    for (const Vec2& p : g.parts[i]) {
      if (ellipses) {
        const Vec2 h = g.shapes[i].half_extent();
        const double dlon = h.x / meters_per_degree_lon(p.y);
        const double dlat = h.y / meters_per_degree_lat();
        extend(box, empty, {p.x - dlon, p.y - dlat});
        extend(box, empty, {p.x + dlon, p.y + dlat});
      } else {
        extend(box, empty, p);
      }
    }
  }
}

void check_positions(const RestrictionGeometry& g) {
  for (const auto& m : g.geometries) check_positions(m);
  for (const auto& part : g.parts) {
    for (const Vec2& p : part) check_geo_range(p);
  }
}

// Box around center spanning `reach` meters in the projection at center.
BBox geo_reach_box(LonLat center, double reach) {
  const double dlon = reach / meters_per_degree_lon(center.y) * (1.0 + kQuerySlack);
  const double dlat = reach / meters_per_degree_lat() * (1.0 + kQuerySlack);
  return {{center.x - dlon, center.y - dlat}, {center.x + dlon, center.y + dlat}};
}

}  // namespace

bool footprint_reaches_disc(const Footprint& fp, LonLat center, double radius_m) {
  const LocalProjection projection(center);
  return projected_gap(fp.core, BBox{center, center}, projection) <= radius_m + fp.margin_m;
}

bool footprint_reaches_region(const Footprint& fp, const BBox& region) {
  const LonLat center{0.5 * (region.lo.x + region.hi.x), 0.5 * (region.lo.y + region.hi.y)};
  const LocalProjection projection(center);
  return projected_gap(fp.core, region, projection) <= fp.margin_m;
}

Footprint document_footprint(const RestrictionDocument& doc, double reach_k) {
  Footprint fp;
  bool empty = true;
  accumulate(doc.geometry, reach_k, fp.core, empty, fp.margin_m);
  return fp;
}

FieldUnit TemporaryUnit::project(const LocalProjection& projection) const {
  return FieldUnit::ellipse(projection.to_local(center), shape, repulsion);
}

RestrictionGeometry TemporaryUnit::geometry() const {
  RestrictionGeometry g;
  g.kind = GeometryKind::Ellipse;
  g.parts.push_back({center});
  g.repulsion = repulsion;
  g.shapes.push_back(shape);
  return g;
}

Footprint TemporaryUnit::footprint(double reach_k) const {
  RestrictionDocument doc;
  doc.geometry = geometry();
  return document_footprint(doc, reach_k);
}

struct GeoStore::Index {
  bgi::rtree<IndexValue, bgi::rstar<16>> tree;
  // Largest margin ever inserted; widening queries by it keeps the index a
  // superset of the exact predicate.
  double max_margin = 0.0;
};

GeoStore::GeoStore(StoreConfig config)
    : config_(config),
      mutex_(std::make_unique<std::shared_mutex>()),
      index_(std::make_unique<Index>()) {}

GeoStore::~GeoStore() = default;
GeoStore::GeoStore(GeoStore&&) noexcept = default;
GeoStore& GeoStore::operator=(GeoStore&&) noexcept = default;

std::string GeoStore::insert(RestrictionDocument doc) {
  if (doc.id.empty()) throw SchemaError("stored documents need a non-empty id");
  if (doc.collection.empty()) throw SchemaError("stored documents need a non-empty collection");
  check_positions(doc.geometry);
  const Footprint fp = document_footprint(doc, config_.reach_k);

  std::unique_lock lock(*mutex_);
  if (docs_.contains(doc.id)) throw DuplicateId("duplicate restriction id \"" + doc.id + "\"");
  std::string id = doc.id;
  collections_.insert(doc.collection);
  index_->tree.insert({to_index_box(fp.core), id});
  index_->max_margin = std::max(index_->max_margin, fp.margin_m);
  footprints_.emplace(id, fp);
  docs_.emplace(id, std::move(doc));
  return id;
}

bool GeoStore::remove(std::string_view id) {
  std::unique_lock lock(*mutex_);
  const auto it = docs_.find(id);
  if (it == docs_.end()) return false;
  const auto fp = footprints_.find(id);
  index_->tree.remove(IndexValue{to_index_box(fp->second.core), it->first});
  footprints_.erase(fp);
  docs_.erase(it);
  return true;
}

void GeoStore::register_collection(const std::string& name) {
  if (name.empty()) throw SchemaError("collection names must be non-empty");
  std::unique_lock lock(*mutex_);
  collections_.insert(name);
}

bool GeoStore::has_collection(std::string_view name) const {
  std::shared_lock lock(*mutex_);
  return collections_.contains(name);
}

std::vector<std::string> GeoStore::collections() const {
  std::shared_lock lock(*mutex_);
  return {collections_.begin(), collections_.end()};
}

std::optional<RestrictionDocument> GeoStore::get(std::string_view id) const {
  std::shared_lock lock(*mutex_);
  const auto it = docs_.find(id);
  if (it == docs_.end()) return std::nullopt;
  return it->second;
}

std::optional<Footprint> GeoStore::footprint(std::string_view id) const {
  std::shared_lock lock(*mutex_);
  const auto it = footprints_.find(id);
  if (it == footprints_.end()) return std::nullopt;
  return it->second;
}

std::size_t GeoStore::size() const {
  std::shared_lock lock(*mutex_);
  return docs_.size();
}

std::vector<RestrictionDocument> GeoStore::documents() const {
  std::shared_lock lock(*mutex_);
  std::vector<RestrictionDocument> out;
  out.reserve(docs_.size());
  for (const auto& [id, doc] : docs_) out.push_back(doc);
  return out;
}

void GeoStore::check_collections(std::span<const std::string> collections) const {
  for (const std::string& c : collections) {
    if (!collections_.contains(c)) throw UnknownCollection("unknown collection \"" + c + "\"");
  }
}

std::vector<RestrictionDocument> GeoStore::query_radius(LonLat center, double radius_m,
                                                        std::span<const std::string> collections,
                                                        Timestamp t) const {
  if (!(radius_m > 0.0)) throw RangeError("query radius must be positive");
  if (collections.empty()) throw UnknownCollection("query names no collections");
  check_geo_range(center);

  std::shared_lock lock(*mutex_);
  check_collections(collections);
  const std::set<std::string, std::less<>> wanted(collections.begin(), collections.end());
  const BBox search = geo_reach_box(center, radius_m + index_->max_margin);

  std::vector<std::string> hits;
  index_->tree.query(bgi::intersects(to_index_box(search)),
                     boost::make_function_output_iterator([&](const IndexValue& v) {
                       hits.push_back(v.second);
                     }));
  std::sort(hits.begin(), hits.end());

  std::vector<RestrictionDocument> out;
  for (const std::string& id : hits) {
    const RestrictionDocument& doc = docs_.find(id)->second;
    if (!wanted.contains(doc.collection) || !doc.is_active(t)) continue;
    if (!footprint_reaches_disc(footprints_.find(id)->second, center, radius_m)) continue;
    out.push_back(doc);
  }
  return out;
}

EffectiveField GeoStore::effective_field(const BBox& region,
                                         std::span<const std::string> collections,
                                         Timestamp t) const {
  if (!(region.hi.x > region.lo.x) || !(region.hi.y > region.lo.y)) {
    throw RangeError("field region is degenerate");
  }
  const LonLat center{0.5 * (region.lo.x + region.hi.x), 0.5 * (region.lo.y + region.hi.y)};
  EffectiveField result{LocalProjection(center), CompositeField{}, {}};
  const LocalProjection& projection = result.projection;
  const PositionMap to_local = [&](Vec2 p) { return projection.to_local(p); };

  std::shared_lock lock(*mutex_);
  if (!collections.empty()) check_collections(collections);
  const std::set<std::string, std::less<>> wanted(collections.begin(), collections.end());

  const double reach = index_->max_margin * (1.0 + kQuerySlack);
  const double dlon = reach / projection.meters_per_degree_lon();
  const double dlat = reach / projection.meters_per_degree_lat();
  const BBox search{{region.lo.x - dlon, region.lo.y - dlat}, {region.hi.x + dlon, region.hi.y + dlat}};

  std::vector<std::string> hits;
  index_->tree.query(bgi::intersects(to_index_box(search)),
                     boost::make_function_output_iterator([&](const IndexValue& v) {
                       hits.push_back(v.second);
                     }));
  std::sort(hits.begin(), hits.end());

  std::vector<FieldUnit> units;
  for (const std::string& id : hits) {
    const RestrictionDocument& doc = docs_.find(id)->second;
    if (!wanted.contains(doc.collection) || !doc.is_active(t)) continue;
    if (!footprint_reaches_region(footprints_.find(id)->second, region)) continue;
    for (FieldUnit& u : compile_units(doc, to_local)) units.push_back(std::move(u));
    result.sources.push_back(id);
  }
  for (const auto& [owner, temp] : temporaries_) {
    if (t >= temp.expires_at) continue;
    if (!footprint_reaches_region(temp.footprint(config_.reach_k), region)) continue;
    units.push_back(temp.project(projection));
    result.sources.push_back("client:" + owner);
  }
  result.field = CompositeField(std::move(units));
  return result;
}

TemporaryUnit GeoStore::upsert_temporary(const std::string& client, LonLat position,
                                         Vec2 heading, double speed, double ttl_seconds,
                                         Timestamp now) {
  if (!(ttl_seconds > 0.0) || ttl_seconds > config_.max_ttl) {
    throw TtlRange("ttl must be in (0, " + std::to_string(config_.max_ttl) + "] seconds");
  }
  if (!(speed >= 0.0) || !std::isfinite(speed)) throw RangeError("speed must be non-negative");
  check_geo_range(position);
  const double hn = norm(heading);
  Vec2 dir{1.0, 0.0};
  if (hn > 0.0) {
    dir = (1.0 / hn) * heading;
  } else if (speed > 0.0) {
    throw RangeError("a moving client needs a non-zero heading");
  }

  const double r_sep = config_.separation_radius;
  const double major = r_sep + speed * ttl_seconds;
  // B = major * d dᵀ + r_sep * n nᵀ with n the left normal of d.
  const Vec2 nrm{-dir.y, dir.x};
  const Matrix2 b{major * dir.x * dir.x + r_sep * nrm.x * nrm.x,
                  major * dir.x * dir.y + r_sep * nrm.x * nrm.y,
                  major * dir.y * dir.x + r_sep * nrm.y * nrm.x,
                  major * dir.y * dir.y + r_sep * nrm.y * nrm.y};
  const auto ttl = std::chrono::seconds(static_cast<long long>(std::ceil(ttl_seconds)));
  TemporaryUnit unit{client, position, ShapeMatrix(b),
                     RepulsionMatrix(Matrix2::diag(r_sep * r_sep, r_sep * r_sep)), now + ttl};

  std::unique_lock lock(*mutex_);
  std::erase_if(temporaries_, [&](const auto& kv) { return now >= kv.second.expires_at; });
  temporaries_.insert_or_assign(client, unit);
  return unit;
}

std::vector<TemporaryUnit> GeoStore::temporaries(Timestamp t) const {
  std::shared_lock lock(*mutex_);
  std::vector<TemporaryUnit> out;
  for (const auto& [owner, temp] : temporaries_) {
    if (t < temp.expires_at) out.push_back(temp);
  }
  return out;
}

std::vector<TemporaryUnit> GeoStore::temporaries_near(LonLat center, double radius_m,
                                                      Timestamp t) const {
  std::vector<TemporaryUnit> out;
  for (TemporaryUnit& temp : temporaries(t)) {
    if (footprint_reaches_disc(temp.footprint(config_.reach_k), center, radius_m)) {
      out.push_back(std::move(temp));
    }
  }
  return out;
}

std::size_t GeoStore::purge_expired(Timestamp t) {
  std::unique_lock lock(*mutex_);
  return std::erase_if(temporaries_, [&](const auto& kv) { return t >= kv.second.expires_at; });
}

EnergyGrid sample_field(const GeoStore& store, const BBox& bbox, std::size_t nx, std::size_t ny,
                        std::span<const std::string> collections, Timestamp t, std::size_t cap) {
  if (nx < 2 || ny < 2) throw std::invalid_argument("grid needs at least 2 samples per axis");
  if (nx > cap / ny) throw std::invalid_argument("grid exceeds the sample cap");
  if (!(bbox.hi.x > bbox.lo.x) || !(bbox.hi.y > bbox.lo.y)) {
    throw std::invalid_argument("grid bounding box is degenerate");
  }
  check_geo_range(bbox.lo);
  check_geo_range(bbox.hi);
  const EffectiveField ef = store.effective_field(bbox, collections, t);
  return sample_grid(ef.field, ef.projection.to_local(bbox), nx, ny, cap);
}

}  // namespace fieldspace
