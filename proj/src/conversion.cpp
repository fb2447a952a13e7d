#include "fieldspace/conversion.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <map>

#include "fieldspace/errors.hpp"

namespace fieldspace {

namespace {

double cross(Vec2 o, Vec2 a, Vec2 b) {
  return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
}

bool on_segment(Vec2 p, Vec2 a, Vec2 b) {
  return std::min(a.x, b.x) <= p.x && p.x <= std::max(a.x, b.x) && std::min(a.y, b.y) <= p.y &&
         p.y <= std::max(a.y, b.y);
}

int orientation(Vec2 o, Vec2 a, Vec2 b) {
  const double c = cross(o, a, b);
  return (c > 0.0) - (c < 0.0);
}

bool segments_intersect(Vec2 p1, Vec2 p2, Vec2 q1, Vec2 q2) {
  const int o1 = orientation(p1, p2, q1);
  const int o2 = orientation(p1, p2, q2);
  const int o3 = orientation(q1, q2, p1);
  const int o4 = orientation(q1, q2, p2);
  if (o1 != o2 && o3 != o4) return true;
  if (o1 == 0 && on_segment(q1, p1, p2)) return true;
  if (o2 == 0 && on_segment(q2, p1, p2)) return true;
  if (o3 == 0 && on_segment(p1, q1, q2)) return true;
  if (o4 == 0 && on_segment(p2, q1, q2)) return true;
  return false;
}

// Ring without its closing vertex, after validation.
std::vector<Vec2> validated_polygon(std::span<const Vec2> ring) {
  if (ring.size() < 4) {
    throw GeometryError("polygon ring needs at least 4 positions (3 vertices plus closure)");
  }
  if (!(ring.front() == ring.back())) {
    throw GeometryError("polygon ring is open: first and last positions differ");
  }
  std::vector<Vec2> poly(ring.begin(), ring.end() - 1);
  const std::size_t n = poly.size();
  for (std::size_t i = 0; i < n; ++i) {
    if (poly[i] == poly[(i + 1) % n]) {
      throw GeometryError("polygon ring repeats a vertex");
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2 a1 = poly[i];
    const Vec2 a2 = poly[(i + 1) % n];
    for (std::size_t j = i + 1; j < n; ++j) {
      const bool adjacent = j == i + 1 || (i == 0 && j == n - 1);
      const Vec2 b1 = poly[j];
      const Vec2 b2 = poly[(j + 1) % n];
      if (adjacent) {
        // Adjacent edges share one vertex; folding back onto each other is
        // still a self-intersection.
        const Vec2 shared = (j == i + 1) ? a2 : a1;
        const Vec2 other_a = (j == i + 1) ? a1 : a2;
        const Vec2 other_b = (j == i + 1) ? b2 : b1;
        if (orientation(shared, other_a, other_b) == 0 &&
            dot(other_a - shared, other_b - shared) > 0.0) {
          throw GeometryError("polygon ring folds back on itself");
        }
        continue;
      }
      if (segments_intersect(a1, a2, b1, b2)) {
        throw GeometryError("polygon ring is self-intersecting");
      }
    }
  }
  if (ring_area(poly) == 0.0) {
    throw GeometryError("polygon ring has zero area");
  }
  return poly;
}

// One Sutherland-Hodgman pass against the half-plane inside(p) >= 0.
template <class Inside, class Cut>
std::vector<Vec2> clip_pass(const std::vector<Vec2>& in, Inside inside, Cut cut) {
  std::vector<Vec2> out;
  if (in.empty()) return out;
  out.reserve(in.size() + 4);
  Vec2 prev = in.back();
  bool prev_in = inside(prev);
  for (const Vec2& cur : in) {
    const bool cur_in = inside(cur);
    if (cur_in != prev_in) out.push_back(cut(prev, cur));
    if (cur_in) out.push_back(cur);
    prev = cur;
    prev_in = cur_in;
  }
  return out;
}

Vec2 cut_at_x(Vec2 a, Vec2 b, double x) {
  const double t = (x - a.x) / (b.x - a.x);
  return {x, a.y + t * (b.y - a.y)};
}

Vec2 cut_at_y(Vec2 a, Vec2 b, double y) {
  const double t = (y - a.y) / (b.y - a.y);
  return {a.x + t * (b.x - a.x), y};
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return s;
}

bool parse_double(std::string_view s, double& out) {
  s = trim(s);
  if (s.empty()) return false;
  if (s.front() == '+') s.remove_prefix(1);
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc{} && ptr == s.data() + s.size() && std::isfinite(out);
}

bool iequals(std::string_view a, std::string_view b) {
  return a.size() == b.size() &&
         std::equal(a.begin(), a.end(), b.begin(), [](char x, char y) {
           return std::tolower(static_cast<unsigned char>(x)) ==
                  std::tolower(static_cast<unsigned char>(y));
         });
}

}  // namespace

double ring_area(std::span<const Vec2> ring) {
  double twice = 0.0;
  const std::size_t n = ring.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2 a = ring[i];
    const Vec2 b = ring[(i + 1) % n];
    twice += a.x * b.y - b.x * a.y;
  }
  return 0.5 * twice;
}

double clipped_area(std::span<const Vec2> polygon, const BBox& box) {
  std::vector<Vec2> pts(polygon.begin(), polygon.end());
  pts = clip_pass(pts, [&](Vec2 p) { return p.x >= box.lo.x; },
                  [&](Vec2 a, Vec2 b) { return cut_at_x(a, b, box.lo.x); });
  pts = clip_pass(pts, [&](Vec2 p) { return p.x <= box.hi.x; },
                  [&](Vec2 a, Vec2 b) { return cut_at_x(a, b, box.hi.x); });
  pts = clip_pass(pts, [&](Vec2 p) { return p.y >= box.lo.y; },
                  [&](Vec2 a, Vec2 b) { return cut_at_y(a, b, box.lo.y); });
  pts = clip_pass(pts, [&](Vec2 p) { return p.y <= box.hi.y; },
                  [&](Vec2 a, Vec2 b) { return cut_at_y(a, b, box.hi.y); });
  return std::abs(ring_area(pts));
}

std::vector<RestrictionDocument> approximate_polygon(std::span<const Vec2> ring,
                                                     std::size_t budget,
                                                     const RepulsionMatrix& repulsion,
                                                     const PolygonApproxOptions& options) {
  if (budget < 1) {
    throw GeometryError("polygon approximation budget must be at least 1");
  }
  if (options.resolution < 1) {
    throw GeometryError("polygon approximation resolution must be at least 1");
  }
  const std::vector<Vec2> poly = validated_polygon(ring);

  Vec2 lo = poly.front();
  Vec2 hi = poly.front();
  for (const Vec2& p : poly) {
    lo = {std::min(lo.x, p.x), std::min(lo.y, p.y)};
    hi = {std::max(hi.x, p.x), std::max(hi.y, p.y)};
  }
  const double w = hi.x - lo.x;
  const double h = hi.y - lo.y;
  const double cell = std::max(w, h) / static_cast<double>(options.resolution);
  const auto nx = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(w / cell - 1e-9)));
  const auto ny = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(h / cell - 1e-9)));

  auto col_edge = [&](std::size_t c) { return lattice_coordinate(lo.x, hi.x, c, nx + 1); };
  auto row_edge = [&](std::size_t r) { return lattice_coordinate(lo.y, hi.y, r, ny + 1); };

  // Occupied column span per raster row; first > last marks an empty row.
  constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();
  std::vector<std::pair<std::size_t, std::size_t>> spans(ny, {kNone, 0});
  const double min_overlap = 1e-9 * (w / nx) * (h / ny);
  for (std::size_t r = 0; r < ny; ++r) {
    for (std::size_t c = 0; c < nx; ++c) {
      const BBox cellbox{{col_edge(c), row_edge(r)}, {col_edge(c + 1), row_edge(r + 1)}};
      if (clipped_area(poly, cellbox) > min_overlap) {
        auto& s = spans[r];
        s.first = std::min(s.first, c);
        s.second = std::max(s.second, c);
      }
    }
  }

  auto band_span = [&](std::size_t i, std::size_t j) {
    std::pair<std::size_t, std::size_t> u{kNone, 0};
    for (std::size_t r = i; r <= j; ++r) {
      if (spans[r].first == kNone) continue;
      u.first = std::min(u.first, spans[r].first);
      u.second = std::max(u.second, spans[r].second);
    }
    return u;
  };

  std::vector<std::vector<double>> cost(ny, std::vector<double>(ny, 0.0));
  for (std::size_t i = 0; i < ny; ++i) {
    std::pair<std::size_t, std::size_t> u{kNone, 0};
    for (std::size_t j = i; j < ny; ++j) {
      if (spans[j].first != kNone) {
        u.first = std::min(u.first, spans[j].first);
        u.second = std::max(u.second, spans[j].second);
      }
      if (u.first != kNone) {
        cost[i][j] =
            (row_edge(j + 1) - row_edge(i)) * (col_edge(u.second + 1) - col_edge(u.first));
      }
    }
  }

  const std::size_t max_bands = std::min(budget, ny);
  constexpr double kInf = std::numeric_limits<double>::infinity();
  // best[k][j]: minimal area covering rows 0..j-1 with exactly k bands.
  std::vector<std::vector<double>> best(max_bands + 1, std::vector<double>(ny + 1, kInf));
  std::vector<std::vector<std::size_t>> split(max_bands + 1, std::vector<std::size_t>(ny + 1, 0));
  best[0][0] = 0.0;
  for (std::size_t k = 1; k <= max_bands; ++k) {
    for (std::size_t j = k; j <= ny; ++j) {
      for (std::size_t i = k - 1; i < j; ++i) {
        if (best[k - 1][i] == kInf) continue;
        const double candidate = best[k - 1][i] + cost[i][j - 1];
        if (candidate < best[k][j]) {
          best[k][j] = candidate;
          split[k][j] = i;
        }
      }
    }
  }
  std::size_t bands = 1;
  for (std::size_t k = 2; k <= max_bands; ++k) {
    if (best[k][ny] < best[bands][ny] * (1.0 - 1e-12)) bands = k;
  }

  std::vector<std::pair<std::size_t, std::size_t>> row_ranges;
  for (std::size_t k = bands, j = ny; k > 0; --k) {
    const std::size_t i = split[k][j];
    row_ranges.emplace_back(i, j - 1);
    j = i;
  }
  std::reverse(row_ranges.begin(), row_ranges.end());

  std::vector<RestrictionDocument> out;
  for (const auto& [i, j] : row_ranges) {
    const auto u = band_span(i, j);
    if (u.first == kNone) continue;
    RestrictionDocument doc;
    doc.geometry.kind = GeometryKind::Rectangle;
    doc.geometry.parts.push_back({Vec2{col_edge(u.first), row_edge(i)},
                                  Vec2{col_edge(u.second + 1), row_edge(j + 1)}});
    doc.geometry.repulsion = repulsion;
    doc.collection = options.collection;
    if (!options.id_prefix.empty()) {
      doc.id = options.id_prefix + "-" + std::to_string(out.size());
    }
    out.push_back(std::move(doc));
  }
  return out;
}

std::vector<PointRecord> parse_point_records(std::string_view text, char delimiter) {
  std::vector<PointRecord> records;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  bool first_content = true;
  while (pos <= text.size()) {
    const std::size_t eol = text.find('\n', pos);
    std::string_view line = text.substr(pos, eol == std::string_view::npos ? text.npos : eol - pos);
    pos = (eol == std::string_view::npos) ? text.size() + 1 : eol + 1;
    ++line_no;
    const std::string_view content = trim(line);
    if (content.empty() || content.front() == '#') continue;

    const std::size_t d1 = content.find(delimiter);
    const std::size_t d2 = d1 == content.npos ? content.npos : content.find(delimiter, d1 + 1);
    if (d2 == content.npos) {
      throw SchemaError("line " + std::to_string(line_no) + ": expected lon" + delimiter + "lat" +
                        delimiter + "name");
    }
    const std::string_view lon_text = content.substr(0, d1);
    const std::string_view lat_text = content.substr(d1 + 1, d2 - d1 - 1);
    const std::string_view name = trim(content.substr(d2 + 1));
    if (first_content && iequals(trim(lon_text), "lon") && iequals(trim(lat_text), "lat")) {
      first_content = false;
      continue;
    }
    first_content = false;
    PointRecord rec;
    if (!parse_double(lon_text, rec.lon) || !parse_double(lat_text, rec.lat)) {
      throw SchemaError("line " + std::to_string(line_no) + ": longitude and latitude must be numbers");
    }
    rec.name = std::string(name);
    rec.line = line_no;
    records.push_back(std::move(rec));
  }
  return records;
}

std::vector<RestrictionDocument> ingest_point_dataset(std::span<const PointRecord> records,
                                                      const std::string& collection,
                                                      const Matrix2& default_repulsion) {
  const RepulsionMatrix repulsion(default_repulsion);
  std::vector<RestrictionDocument> out;
  out.reserve(records.size());
  std::map<std::string, int> seen;
  for (const PointRecord& rec : records) {
    const std::string where =
        rec.line ? "line " + std::to_string(rec.line) : "record " + std::to_string(out.size() + 1);
    if (!std::isfinite(rec.lon) || !std::isfinite(rec.lat) || rec.lon < -180.0 ||
        rec.lon > 180.0 || rec.lat < -90.0 || rec.lat > 90.0) {
      throw RangeError(where + ": coordinates out of range (lon " + std::to_string(rec.lon) +
                       ", lat " + std::to_string(rec.lat) + ")");
    }
    const std::string key = nlohmann::json(rec.lon).dump() + "|" + nlohmann::json(rec.lat).dump() +
                            "|" + rec.name;
    std::string id = collection + "-" + hex64(fnv1a(key));
    if (const int n = ++seen[id]; n > 1) id += "-" + std::to_string(n);

    RestrictionDocument doc;
    doc.geometry.kind = GeometryKind::Point;
    doc.geometry.parts.push_back({Vec2{rec.lon, rec.lat}});
    doc.geometry.repulsion = repulsion;
    doc.id = std::move(id);
    doc.collection = collection;
    if (!rec.name.empty()) doc.properties["name"] = rec.name;
    out.push_back(std::move(doc));
  }
  return out;
}

}  // namespace fieldspace
