#include "fieldspace/routing.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>
#include <stdexcept>

#include "fieldspace/errors.hpp"

namespace fieldspace {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr std::size_t kNoNode = std::numeric_limits<std::size_t>::max();

// Keeps the heuristic strictly consistent under floating-point rounding so
// A* settles every node at the same cost Dijkstra would.
constexpr double kHeuristicShrink = 1.0 - 1e-9;

// Energies in [1 - epsilon, 1) transform to +inf, so no threshold may sit
// above that point without breaking the verdict/cost equivalence.
double effective_threshold(double threshold, double epsilon) {
  return std::min(threshold, 1.0 - epsilon);
}

double clamp_energy(double e) { return std::clamp(e, 0.0, 1.0); }

}  // namespace

Route::Route(std::vector<Vec2> waypoints) : waypoints_(std::move(waypoints)) {
  if (waypoints_.size() < 2) {
    throw DegenerateRequest("a route needs at least 2 waypoints");
  }
  for (std::size_t i = 1; i < waypoints_.size(); ++i) {
    if (waypoints_[i] == waypoints_[i - 1]) {
      throw DegenerateRequest("route repeats waypoint " + std::to_string(i));
    }
  }
}

double Route::length() const {
  double total = 0.0;
  for (std::size_t i = 1; i < waypoints_.size(); ++i) {
    total += norm(waypoints_[i] - waypoints_[i - 1]);
  }
  return total;
}

std::string_view to_string(Verdict v) {
  return v == Verdict::Compliant ? "Compliant" : "Violation";
}

std::size_t segment_intervals(double length, double step) {
  if (!(step > 0.0)) throw std::invalid_argument("sampling step must be positive");
  const double n = std::ceil(length / step);
  return n < 1.0 ? 1 : static_cast<std::size_t>(n);
}

Vec2 segment_sample(Vec2 a, Vec2 b, std::size_t k, std::size_t n) {
  if (k == 0) return a;
  if (k == n) return b;
  const double t = static_cast<double>(k) / static_cast<double>(n);
  return {a.x + t * (b.x - a.x), a.y + t * (b.y - a.y)};
}

ComplianceReport route_energy(const EnergyFunction& energy, const Route& route,
                              const ComplianceOptions& options) {
  if (!(options.step > 0.0)) throw std::invalid_argument("sampling step must be positive");
  const double violation = effective_threshold(options.violation_energy, options.transform_epsilon);
  auto transform = [&](double e) {
    return e >= violation ? kInf : transform_energy(e, options.transform_epsilon);
  };

  ComplianceReport report;
  const auto wps = route.waypoints();
  double prev_cost = 0.0;
  report.peak_energy = -1.0;
  for (std::size_t s = 0; s + 1 < wps.size(); ++s) {
    const Vec2 a = wps[s];
    const Vec2 b = wps[s + 1];
    const double len = norm(b - a);
    const std::size_t n = segment_intervals(len, options.step);
    const double h = len / static_cast<double>(n);
    for (std::size_t k = (s == 0 ? 0 : 1); k <= n; ++k) {
      const Vec2 p = segment_sample(a, b, k, n);
      const double e = clamp_energy(energy(p));
      if (e > report.peak_energy) {
        report.peak_energy = e;
        report.peak_location = p;
      }
      const double c = transform(e);
      if (s > 0 || k > 0) report.energy_cost += 0.5 * h * (prev_cost + c);
      prev_cost = c;
    }
    report.length += len;
  }
  if (report.peak_energy >= violation) {
    report.verdict = Verdict::Violation;
    report.energy_cost = kInf;
  }
  return report;
}

ComplianceReport route_energy(const CompositeField& field, const Route& route,
                              const ComplianceOptions& options) {
  return route_energy([&](Vec2 p) { return eval_composite(field, p); }, route, options);
}

ComplianceReport validate_route(const GeoStore& store, std::span<const LonLat> route,
                                std::span<const std::string> collections, Timestamp t,
                                const ComplianceOptions& options) {
  if (route.size() < 2) throw DegenerateRequest("a route needs at least 2 waypoints");
  BBox region{route.front(), route.front()};
  for (const LonLat& p : route) {
    check_geo_range(p);
    region.lo = {std::min(region.lo.x, p.x), std::min(region.lo.y, p.y)};
    region.hi = {std::max(region.hi.x, p.x), std::max(region.hi.y, p.y)};
  }
  constexpr double kPad = 1e-7;
  region.lo = {region.lo.x - kPad, region.lo.y - kPad};
  region.hi = {region.hi.x + kPad, region.hi.y + kPad};

  const EffectiveField ef = store.effective_field(region, collections, t);
  std::vector<Vec2> local;
  local.reserve(route.size());
  for (const LonLat& p : route) local.push_back(ef.projection.to_local(p));
  ComplianceReport report = route_energy(ef.field, Route(std::move(local)), options);
  report.peak_location = ef.projection.to_geo(report.peak_location);
  return report;
}

ComplianceOptions PlannerConfig::compliance() const {
  return {validation_step(), block_energy, transform_epsilon};
}

void PlannerConfig::validate() const {
  if (!(cell_size > 0.0) || !std::isfinite(cell_size)) {
    throw std::invalid_argument("cell_size must be positive");
  }
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
    throw std::invalid_argument("lambda must be non-negative");
  }
  if (!(block_energy > 0.0 && block_energy <= 1.0)) {
    throw std::invalid_argument("block energy must be in (0, 1]");
  }
  if (connectivity != 8 && connectivity != 4) {
    throw std::invalid_argument("connectivity must be 4 or 8");
  }
  if (!(goal_link_cells >= 1.0) || !std::isfinite(goal_link_cells)) {
    throw std::invalid_argument("goal_link_cells must be at least 1");
  }
}

PlanningGrid::PlanningGrid(const CompositeField& field, Vec2 origin, std::size_t nx,
                           std::size_t ny, const PlannerConfig& config)
    : field_(&field), origin_(origin), nx_(nx), ny_(ny), config_(config) {
  config_.validate();
  if (nx < 1 || ny < 1) throw std::invalid_argument("planning grid needs at least one node");
  if (nx > config_.max_nodes / ny) {
    throw RangeError("planning grid of " + std::to_string(nx) + "x" + std::to_string(ny) +
                     " nodes exceeds the limit of " + std::to_string(config_.max_nodes));
  }
  energies_.resize(nx * ny);
  for (std::size_t i = 0; i < energies_.size(); ++i) {
    energies_[i] = eval_composite(field, node_position(i));
  }
  move_cache_.assign(4 * nx * ny, std::numeric_limits<double>::quiet_NaN());
  // Energy >= threshold needs g^T A^-1 g <= -ln(threshold), so |g| is at most
  // sqrt(lambda_max * -ln(threshold)) from the zero set.
  const double reach_form = -std::log(effective_threshold(config_.block_energy, config_.transform_epsilon));
  block_boxes_.reserve(field.size());
  for (const FieldUnit& unit : field.units()) {
    const auto [lo, hi] = unit.core_bounds();
    const double scale = std::max({std::abs(lo.x), std::abs(lo.y), std::abs(hi.x), std::abs(hi.y), 1.0});
    const double pad = std::sqrt(unit.repulsion().max_eigenvalue() * reach_form) * (1.0 + 1e-6) + 1e-9 * scale;
    block_boxes_.push_back({{lo.x - pad, lo.y - pad}, {hi.x + pad, hi.y + pad}});
  }
}

PlanningGrid PlanningGrid::covering(const CompositeField& field, Vec2 start, Vec2 goal,
                                    const PlannerConfig& config) {
  config.validate();
  const double cell = config.cell_size;
  const Vec2 lo{std::min(start.x, goal.x), std::min(start.y, goal.y)};
  const Vec2 hi{std::max(start.x, goal.x), std::max(start.y, goal.y)};
  const double margin = 0.25 * std::max(hi.x - lo.x, hi.y - lo.y) + 10.0 * cell;
  const double left = std::ceil((start.x - (lo.x - margin)) / cell);
  const double down = std::ceil((start.y - (lo.y - margin)) / cell);
  const double right = std::ceil(((hi.x + margin) - start.x) / cell);
  const double up = std::ceil(((hi.y + margin) - start.y) / cell);
  const Vec2 origin{start.x - left * cell, start.y - down * cell};
  return PlanningGrid(field, origin, static_cast<std::size_t>(left + right) + 1,
                      static_cast<std::size_t>(down + up) + 1, config);
}

Vec2 PlanningGrid::node_position(std::size_t node) const {
  const double col = static_cast<double>(node % nx_);
  const double row = static_cast<double>(node / nx_);
  return {origin_.x + col * config_.cell_size, origin_.y + row * config_.cell_size};
}

std::optional<std::size_t> PlanningGrid::nearest_node(Vec2 p) const {
  const double col = std::round((p.x - origin_.x) / config_.cell_size);
  const double row = std::round((p.y - origin_.y) / config_.cell_size);
  if (col < 0.0 || row < 0.0 || col >= static_cast<double>(nx_) ||
      row >= static_cast<double>(ny_)) {
    return std::nullopt;
  }
  return index(static_cast<std::size_t>(col), static_cast<std::size_t>(row));
}

bool PlanningGrid::blocked(std::size_t node) const {
  return energies_[node] >= effective_threshold(config_.block_energy, config_.transform_epsilon);
}

bool PlanningGrid::segment_clear(Vec2 a, Vec2 b) const {
  const double threshold = effective_threshold(config_.block_energy, config_.transform_epsilon);
  // Only units whose blocking box meets the segment's box can reach the threshold.
  const double x0 = std::min(a.x, b.x), x1 = std::max(a.x, b.x);
  const double y0 = std::min(a.y, b.y), y1 = std::max(a.y, b.y);
  std::vector<const FieldUnit*> candidates;
  const auto units = field_->units();
  for (std::size_t i = 0; i < units.size(); ++i) {
    const BBox& box = block_boxes_[i];
    if (box.lo.x <= x1 && box.hi.x >= x0 && box.lo.y <= y1 && box.hi.y >= y0) candidates.push_back(&units[i]);
  }
  if (candidates.empty()) return true;
  const std::size_t n = segment_intervals(norm(b - a), config_.validation_step());
  for (std::size_t k = 0; k <= n; ++k) {
    const Vec2 p = segment_sample(a, b, k, n);
    for (const FieldUnit* unit : candidates) {
      if (unit->evaluate(p) >= threshold) return false;
    }
  }
  return true;
}

double PlanningGrid::move_cost(std::size_t from, std::size_t to) const {
  const std::size_t lo = std::min(from, to);
  const std::size_t hi = std::max(from, to);
  const long dc = static_cast<long>(hi % nx_) - static_cast<long>(lo % nx_);
  const std::size_t dr = hi / nx_ - lo / nx_;
  std::size_t slot = 0;
  if (dr == 0 && dc == 1) {
    slot = 0;
  } else if (dr == 1 && dc >= -1 && dc <= 1) {
    slot = static_cast<std::size_t>(dc + 2);
  } else {
    throw std::invalid_argument("nodes are not adjacent");
  }
  double& cached = move_cache_[4 * lo + slot];
  if (std::isnan(cached)) cached = compute_move_cost(lo, hi);
  return cached;
}

double PlanningGrid::compute_move_cost(std::size_t lo, std::size_t hi) const {
  if (blocked(lo) || blocked(hi)) return kInf;
  const Vec2 a = node_position(lo);
  const Vec2 b = node_position(hi);
  const double mid_energy = eval_composite(*field_, {0.5 * (a.x + b.x), 0.5 * (a.y + b.y)});
  if (mid_energy >= effective_threshold(config_.block_energy, config_.transform_epsilon)) {
    return kInf;
  }
  const double t = transform_energy(clamp_energy(mid_energy), config_.transform_epsilon);
  if (!std::isfinite(t) || !segment_clear(a, b)) return kInf;
  return norm(b - a) * (1.0 + config_.lambda * t);
}

double PlanningGrid::link_cost(std::size_t node, Vec2 p) const {
  if (blocked(node)) return kInf;
  const Vec2 a = node_position(node);
  const double len = norm(p - a);
  if (len == 0.0) return 0.0;
  const double threshold = effective_threshold(config_.block_energy, config_.transform_epsilon);
  const std::size_t n = segment_intervals(len, config_.validation_step());
  double sum = 0.0;
  for (std::size_t k = 0; k <= n; ++k) {
    const double e = eval_composite(*field_, segment_sample(a, p, k, n));
    if (e >= threshold) return kInf;
    const double t = transform_energy(clamp_energy(e), config_.transform_epsilon);
    sum += (k == 0 || k == n) ? 0.5 * t : t;
  }
  return len * (1.0 + config_.lambda * sum / static_cast<double>(n));
}

std::vector<std::pair<std::size_t, double>> PlanningGrid::links_to(Vec2 p) const {
  const double cell = config_.cell_size;
  const double radius = config_.goal_link_cells * cell;
  const double col_lo = std::max(0.0, std::ceil((p.x - radius - origin_.x) / cell));
  const double col_hi = std::min(static_cast<double>(nx_) - 1.0, std::floor((p.x + radius - origin_.x) / cell));
  const double row_lo = std::max(0.0, std::ceil((p.y - radius - origin_.y) / cell));
  const double row_hi = std::min(static_cast<double>(ny_) - 1.0, std::floor((p.y + radius - origin_.y) / cell));
  std::vector<std::pair<std::size_t, double>> out;
  for (double row = row_lo; row <= row_hi; row += 1.0) {
    for (double col = col_lo; col <= col_hi; col += 1.0) {
      const std::size_t node = index(static_cast<std::size_t>(col), static_cast<std::size_t>(row));
      if (norm(node_position(node) - p) > radius) continue;
      const double c = link_cost(node, p);
      if (c < kInf) out.emplace_back(node, c);
    }
  }
  return out;
}

namespace {

// A* towards `target` where the search ends by taking one of `links`
// (node, extra cost). The virtual goal gets index node_count().
std::optional<GridPath> search(const PlanningGrid& grid, std::size_t start, Vec2 target,
                               const std::vector<std::pair<std::size_t, double>>& links) {
  const std::size_t n = grid.node_count();
  if (start >= n) throw std::out_of_range("node outside planning grid");
  const std::size_t goal = n;
  auto heuristic = [&](std::size_t node) {
    return norm(grid.node_position(node) - target) * kHeuristicShrink;
  };
  std::vector<double> link(n, kInf);
  for (const auto& [node, cost] : links) link[node] = cost;

  std::vector<double> g(n + 1, kInf);
  std::vector<std::size_t> parent(n + 1, kNoNode);
  std::vector<char> closed(n + 1, 0);
  using Entry = std::pair<double, std::size_t>;
  std::priority_queue<Entry, std::vector<Entry>, std::greater<>> open;
  g[start] = 0.0;
  open.emplace(heuristic(start), start);
  while (!open.empty()) {
    const auto [f, node] = open.top();
    open.pop();
    if (closed[node]) continue;
    closed[node] = 1;
    if (node == goal) break;
    if (link[node] < kInf && g[node] + link[node] < g[goal]) {
      g[goal] = g[node] + link[node];
      parent[goal] = node;
      open.emplace(g[goal], goal);
    }
    grid.for_each_neighbor(node, [&](std::size_t next, double cost) {
      if (closed[next]) return;
      const double candidate = g[node] + cost;
      if (candidate < g[next]) {
        g[next] = candidate;
        parent[next] = node;
        open.emplace(candidate + heuristic(next), next);
      }
    });
  }
  if (!closed[goal]) return std::nullopt;

  GridPath path;
  path.cost = g[goal];
  for (std::size_t node = parent[goal]; node != kNoNode; node = parent[node]) {
    path.nodes.push_back(node);
  }
  std::reverse(path.nodes.begin(), path.nodes.end());
  return path;
}

}  // namespace

std::optional<GridPath> astar(const PlanningGrid& grid, std::size_t start, std::size_t goal) {
  if (goal >= grid.node_count()) throw std::out_of_range("node outside planning grid");
  if (grid.blocked(goal)) return std::nullopt;
  return search(grid, start, grid.node_position(goal), {{goal, 0.0}});
}

std::optional<GridPath> astar_to_point(const PlanningGrid& grid, std::size_t start, Vec2 goal) {
  return search(grid, start, goal, grid.links_to(goal));
}

Route plan_route(const CompositeField& field, Vec2 start, Vec2 goal, const PlannerConfig& config) {
  config.validate();
  if (start == goal) throw DegenerateRequest("start and goal coincide");
  const double threshold = effective_threshold(config.block_energy, config.transform_epsilon);
  if (eval_composite(field, start) >= threshold) throw OutOfBounds("start lies in a blocked cell");
  if (eval_composite(field, goal) >= threshold) throw OutOfBounds("goal lies in a blocked cell");

  const PlanningGrid grid = PlanningGrid::covering(field, start, goal, config);
  const auto s = grid.nearest_node(start);
  const auto g = grid.nearest_node(goal);
  if (!s || !g) throw std::logic_error("planning grid does not cover start and goal");
  if (*s == *g) throw DegenerateRequest("start and goal fall in the same grid cell");
  if (grid.blocked(*s)) throw OutOfBounds("start lies in a blocked cell");

  const auto path = astar_to_point(grid, *s, goal);
  if (!path) throw NoRoute("goal is unreachable below the blocking energy");

  std::vector<Vec2> waypoints;
  waypoints.reserve(path->nodes.size() + 1);
  waypoints.push_back(start);
  for (std::size_t i = 1; i < path->nodes.size(); ++i) {
    waypoints.push_back(grid.node_position(path->nodes[i]));
  }
  if (!(waypoints.back() == goal)) waypoints.push_back(goal);
  return Route(std::move(waypoints));
}

GeoPlan plan_route_geo(const GeoStore& store, LonLat start, LonLat goal,
                       std::span<const std::string> collections, Timestamp t,
                       const PlannerConfig& config) {
  config.validate();
  check_geo_range(start);
  check_geo_range(goal);
  if (start == goal) throw DegenerateRequest("start and goal coincide");

  // Region covering the planning grid, with one spare cell per side.
  const LocalProjection provisional({0.5 * (start.x + goal.x), 0.5 * (start.y + goal.y)});
  const Vec2 s = provisional.to_local(start);
  const Vec2 g = provisional.to_local(goal);
  const double margin = 0.25 * std::max(std::abs(s.x - g.x), std::abs(s.y - g.y)) +
                        11.0 * config.cell_size;
  const BBox local_region{{std::min(s.x, g.x) - margin, std::min(s.y, g.y) - margin},
                          {std::max(s.x, g.x) + margin, std::max(s.y, g.y) + margin}};
  const EffectiveField ef =
      store.effective_field(provisional.to_geo(local_region), collections, t);

  const Route local = plan_route(ef.field, ef.projection.to_local(start),
                                 ef.projection.to_local(goal), config);
  GeoPlan plan;
  for (const Vec2& p : local.waypoints()) plan.route.push_back(ef.projection.to_geo(p));
  plan.route.front() = start;
  plan.route.back() = goal;
  plan.report = validate_route(store, plan.route, collections, t, config.compliance());
  return plan;
}

}  // namespace fieldspace
