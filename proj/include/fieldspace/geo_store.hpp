#ifndef FIELDSPACE_GEO_STORE_HPP_
#define FIELDSPACE_GEO_STORE_HPP_

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <shared_mutex>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fieldspace/field.hpp"
#include "fieldspace/projection.hpp"
#include "fieldspace/rgeojson.hpp"
#include "fieldspace/time.hpp"

namespace fieldspace {

struct StoreConfig {
  // Index margin is reach_k * sqrt(largest eigenvalue of A); beyond it a
  // unit's energy is at most exp(-reach_k^2).
  double reach_k = 3.0;
  // Separation radius around reporting clients, meters.
  double separation_radius = 150.0;
  // Upper bound for heartbeat time-to-live, seconds.
  double max_ttl = 60.0;
};

/// Where a document's field can matter: the geographic box around its
/// zero-repulsion set plus a reach margin in meters.
struct Footprint {
  BBox core;
  double margin_m = 0.0;
};

/// Shared predicate for index queries and brute-force scans: true when the
/// footprint comes within radius_m of center, measured in a projection
/// anchored at center.
bool footprint_reaches_disc(const Footprint& fp, LonLat center, double radius_m);

/// True when the footprint comes within its margin of region, measured in a
/// projection anchored at the region center.
bool footprint_reaches_region(const Footprint& fp, const BBox& region);

/// Footprint for a document under the given reach multiplier.
Footprint document_footprint(const RestrictionDocument& doc, double reach_k);

/// Short-lived separation ellipse around a reporting client. The shape and
/// repulsion matrices are in meters in the local east/north frame.
struct TemporaryUnit {
  std::string owner;
  LonLat center;
  ShapeMatrix shape;
  RepulsionMatrix repulsion;
  Timestamp expires_at;

  FieldUnit project(const LocalProjection& projection) const;
  RestrictionGeometry geometry() const;
  Footprint footprint(double reach_k) const;
};

/// Field assembled for a region and instant, together with the projection
/// its coordinates are expressed in.
struct EffectiveField {
  LocalProjection projection;
  CompositeField field;
  // Document ids in unit order, then "client:<id>" for each temporary.
  std::vector<std::string> sources;
};

/// In-memory restriction database with a spatial index and time-dependent
/// activation. Readers may run concurrently; writers are exclusive.
class GeoStore {
 public:
  explicit GeoStore(StoreConfig config = {});
  ~GeoStore();
  GeoStore(GeoStore&&) noexcept;
  GeoStore& operator=(GeoStore&&) noexcept;

  const StoreConfig& config() const { return config_; }

  /// Requires a non-empty id and collection. The collection is registered
  /// on first use. Throws DuplicateId, SchemaError or RangeError.
  std::string insert(RestrictionDocument doc);
  bool remove(std::string_view id);

  void register_collection(const std::string& name);
  bool has_collection(std::string_view name) const;
  std::vector<std::string> collections() const;

  std::optional<RestrictionDocument> get(std::string_view id) const;
  std::optional<Footprint> footprint(std::string_view id) const;
  std::size_t size() const;
  /// All documents, id order.
  std::vector<RestrictionDocument> documents() const;

  /// Documents in any of `collections`, active at t, whose footprint
  /// reaches the disc. Id order. Throws UnknownCollection.
  std::vector<RestrictionDocument> query_radius(LonLat center, double radius_m,
                                                std::span<const std::string> collections,
                                                Timestamp t) const;

  /// Compiles every matching active document and every unexpired temporary
  /// reaching the region into one field projected about the region center.
  /// Documents come first in id order, then temporaries in owner order.
  EffectiveField effective_field(const BBox& region, std::span<const std::string> collections,
                                 Timestamp t) const;

  /// Replaces the client's temporary with a separation ellipse centered at
  /// `position`, semi-axes (r_sep + speed * ttl) along heading and r_sep
  /// across it, repulsion diag(r_sep², r_sep²). Throws TtlRange or RangeError.
  TemporaryUnit upsert_temporary(const std::string& client, LonLat position, Vec2 heading,
                                 double speed, double ttl_seconds, Timestamp now);

  /// Unexpired temporaries at t, owner order.
  std::vector<TemporaryUnit> temporaries(Timestamp t) const;
  std::vector<TemporaryUnit> temporaries_near(LonLat center, double radius_m, Timestamp t) const;
  std::size_t purge_expired(Timestamp t);

 private:
  struct Index;

  void check_collections(std::span<const std::string> collections) const;

  StoreConfig config_;
  std::unique_ptr<std::shared_mutex> mutex_;
  std::map<std::string, RestrictionDocument, std::less<>> docs_;
  std::map<std::string, Footprint, std::less<>> footprints_;
  std::set<std::string, std::less<>> collections_;
  std::map<std::string, TemporaryUnit, std::less<>> temporaries_;
  std::unique_ptr<Index> index_;
};

/// Samples the effective field over a geographic box on an nx x ny lattice
/// (row 0 = southern edge, col 0 = western edge). The lattice is laid out in
/// the projection of effective_field(bbox, ...). Throws std::invalid_argument
/// for a degenerate box, fewer than 2 samples per axis or nx * ny > cap.
EnergyGrid sample_field(const GeoStore& store, const BBox& bbox, std::size_t nx, std::size_t ny,
                        std::span<const std::string> collections, Timestamp t,
                        std::size_t cap = kDefaultSampleCap);

/// Writes one RGeoJSON file per document plus a manifest. Temporaries are
/// not saved. Throws IoError.
void save_snapshot(const GeoStore& store, const std::filesystem::path& dir);

/// Reads a snapshot written by save_snapshot. Any bad file aborts the load
/// with an IoError naming it.
GeoStore load_snapshot(const std::filesystem::path& dir, StoreConfig config = {});

inline constexpr const char* kManifestName = "manifest.jsonl";

}  // namespace fieldspace

#endif  // FIELDSPACE_GEO_STORE_HPP_
