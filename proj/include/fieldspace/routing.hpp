#ifndef FIELDSPACE_ROUTING_HPP_
#define FIELDSPACE_ROUTING_HPP_

#include <cstddef>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "fieldspace/field.hpp"
#include "fieldspace/geo_store.hpp"
#include "fieldspace/projection.hpp"
#include "fieldspace/time.hpp"

namespace fieldspace {

/// Ordered polyline in projected meters.
class Route {
 public:
  /// Throws DegenerateRequest for fewer than 2 waypoints or repeated
  /// consecutive waypoints.
  explicit Route(std::vector<Vec2> waypoints);

  std::span<const Vec2> waypoints() const { return waypoints_; }
  double length() const;

 private:
  std::vector<Vec2> waypoints_;
};

enum class Verdict { Compliant, Violation };

std::string_view to_string(Verdict v);

struct ComplianceReport {
  Verdict verdict = Verdict::Compliant;
  // Line integral of the transformed energy along arc length; +inf on violation.
  double energy_cost = 0.0;
  double peak_energy = 0.0;
  Vec2 peak_location;
  double length = 0.0;
};

struct ComplianceOptions {
  // Maximum spacing between energy samples along each segment, meters.
  double step = 25.0 / 4.0;
  double violation_energy = 0.999;
  double transform_epsilon = kDefaultTransformEpsilon;
};

using EnergyFunction = std::function<double(Vec2)>;

/// Sample count for a segment of the given length: the smallest n with
/// length / n <= step, at least 1.
std::size_t segment_intervals(double length, double step);

/// Position of sample k of n along a -> b.
Vec2 segment_sample(Vec2 a, Vec2 b, std::size_t k, std::size_t n);

/// Composite-trapezoid integral of T(energy) along the route. Any sample at
/// or above violation_energy makes the verdict Violation and the cost +inf.
ComplianceReport route_energy(const EnergyFunction& energy, const Route& route,
                              const ComplianceOptions& options = {});
ComplianceReport route_energy(const CompositeField& field, const Route& route,
                              const ComplianceOptions& options = {});

/// Projects a [lon, lat] route, assembles the store's field over it and
/// scores it. peak_location is reported as [lon, lat].
ComplianceReport validate_route(const GeoStore& store, std::span<const LonLat> route,
                                std::span<const std::string> collections, Timestamp t,
                                const ComplianceOptions& options = {});

struct PlannerConfig {
  double cell_size = 25.0;
  // Weight of the transformed energy in the move cost.
  double lambda = 1.0;
  // Nodes and moves touching energy at or above this are impassable.
  double block_energy = 0.999;
  int connectivity = 8;
  double transform_epsilon = kDefaultTransformEpsilon;
  std::size_t max_nodes = 2'000'000;
  // The exact goal joins the lattice through straight links from every
  // clear node within this many cells of it.
  double goal_link_cells = 4.0;

  /// Validation sampling step matching the planner's move checks.
  double validation_step() const { return cell_size / 4.0; }
  ComplianceOptions compliance() const;
  /// Throws std::invalid_argument on out-of-range parameters.
  void validate() const;
};

/// 8-connected lattice of nodes at origin + (col, row) * cell_size with
/// per-move costs ds * (1 + lambda * T(midpoint energy)).
class PlanningGrid {
 public:
  PlanningGrid(const CompositeField& field, Vec2 origin, std::size_t nx, std::size_t ny,
               const PlannerConfig& config);

  /// Grid over the start/goal box inflated by 25% of its larger side plus
  /// ten cells, aligned so that start falls on a node.
  static PlanningGrid covering(const CompositeField& field, Vec2 start, Vec2 goal,
                               const PlannerConfig& config);

  std::size_t nx() const { return nx_; }
  std::size_t ny() const { return ny_; }
  std::size_t node_count() const { return nx_ * ny_; }
  std::size_t index(std::size_t col, std::size_t row) const { return row * nx_ + col; }
  Vec2 node_position(std::size_t node) const;
  std::optional<std::size_t> nearest_node(Vec2 p) const;
  double node_energy(std::size_t node) const { return energies_[node]; }
  bool blocked(std::size_t node) const;
  const PlannerConfig& config() const { return config_; }

  /// Cost of moving between two adjacent nodes; +inf when impassable.
  /// Symmetric.
  double move_cost(std::size_t from, std::size_t to) const;

  /// Calls f(neighbor, cost) for each passable neighbor in ascending index order.
  template <class F>
  void for_each_neighbor(std::size_t node, F&& f) const {
    const std::size_t col = node % nx_;
    const std::size_t row = node / nx_;
    for (int dr = -1; dr <= 1; ++dr) {
      for (int dc = -1; dc <= 1; ++dc) {
        if (dr == 0 && dc == 0) continue;
        if (config_.connectivity == 4 && dr != 0 && dc != 0) continue;
        const long c = static_cast<long>(col) + dc;
        const long r = static_cast<long>(row) + dr;
        if (c < 0 || r < 0 || c >= static_cast<long>(nx_) || r >= static_cast<long>(ny_)) continue;
        const std::size_t next = index(static_cast<std::size_t>(c), static_cast<std::size_t>(r));
        const double cost = move_cost(node, next);
        if (cost < kImpassable) f(next, cost);
      }
    }
  }

  /// True if the straight move a -> b passes every validation sample.
  bool segment_clear(Vec2 a, Vec2 b) const;

  /// Cost of the straight link from a node to an off-lattice point:
  /// length * (1 + lambda * trapezoid mean of T) over validation samples,
  /// +inf when any sample is blocked.
  double link_cost(std::size_t node, Vec2 p) const;

  /// Passable nodes within goal_link_cells of p with finite link cost,
  /// ascending index order.
  std::vector<std::pair<std::size_t, double>> links_to(Vec2 p) const;

  static constexpr double kImpassable = std::numeric_limits<double>::infinity();

 private:
  double compute_move_cost(std::size_t lo, std::size_t hi) const;

  const CompositeField* field_;
  Vec2 origin_;
  std::size_t nx_;
  std::size_t ny_;
  PlannerConfig config_;
  std::vector<double> energies_;
  // Four forward moves per node (E, NW, N, NE); NaN until computed.
  mutable std::vector<double> move_cache_;
  std::vector<BBox> block_boxes_;  // per unit, where it can reach the block energy
};

struct GridPath {
  std::vector<std::size_t> nodes;
  double cost = 0.0;
};

/// A* with a Euclidean heuristic. Queue ties resolve to the lower node index.
std::optional<GridPath> astar(const PlanningGrid& grid, std::size_t start, std::size_t goal);

/// A* from a node to an off-lattice point reached through links_to(goal).
/// nodes ends at the linking node; cost includes the link.
std::optional<GridPath> astar_to_point(const PlanningGrid& grid, std::size_t start, Vec2 goal);

/// Low-energy route from start to goal over the field. The grid is aligned
/// so start is a node; waypoints are the grid path followed by the exact goal.
/// Throws DegenerateRequest, OutOfBounds or NoRoute.
Route plan_route(const CompositeField& field, Vec2 start, Vec2 goal, const PlannerConfig& config);

struct GeoPlan {
  std::vector<LonLat> route;
  ComplianceReport report;
};

/// Plans over the store's field and re-validates the result.
GeoPlan plan_route_geo(const GeoStore& store, LonLat start, LonLat goal,
                       std::span<const std::string> collections, Timestamp t,
                       const PlannerConfig& config);

}  // namespace fieldspace

#endif  // FIELDSPACE_ROUTING_HPP_
