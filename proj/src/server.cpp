#include "fieldspace/server.hpp"

#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <vector>

#include "httplib.h"

#include "fieldspace/errors.hpp"
#include "fieldspace/rgeojson.hpp"

namespace fieldspace {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

struct HttpError {
  int status;
  std::string message;
};

Response json_response(int status, const ordered_json& body) {
  return {status, body.dump(), "application/json"};
}

Response error_response(int status, const std::string& message) {
  ordered_json body;
  body["error"] = message;
  return json_response(status, body);
}

std::vector<std::string> split(std::string_view text, char sep) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (true) {
    const std::size_t next = text.find(sep, pos);
    out.emplace_back(text.substr(pos, next == std::string_view::npos ? next : next - pos));
    if (next == std::string_view::npos) break;
    pos = next + 1;
  }
  return out;
}

std::vector<std::string> parse_collections(std::string_view dbs) {
  std::vector<std::string> names = split(dbs, ',');
  for (const std::string& n : names) {
    if (n.empty()) throw HttpError{400, "empty collection name in '" + std::string(dbs) + "'"};
  }
  return names;
}

double parse_number(std::string_view text, const char* what) {
  double value = 0.0;
  const char* first = text.data();
  const char* last = first + text.size();
  if (!text.empty() && *first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (text.empty() || ec != std::errc() || ptr != last || !std::isfinite(value)) {
    throw HttpError{400, std::string("malformed ") + what + " '" + std::string(text) + "'"};
  }
  return value;
}

std::size_t parse_count(std::string_view text, const char* what) {
  std::size_t value = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (text.empty() || ec != std::errc() || ptr != text.data() + text.size()) {
    throw HttpError{400, std::string("malformed ") + what + " '" + std::string(text) + "'"};
  }
  return value;
}

Timestamp parse_time_value(const json& value) {
  try {
    if (value.is_string()) return parse_timestamp(value.get<std::string>());
    if (value.is_number_integer()) return Timestamp(std::chrono::seconds(value.get<long long>()));
  } catch (const std::invalid_argument& e) {
    throw HttpError{400, e.what()};
  }
  throw HttpError{400, "t must be an ISO-8601 string or epoch seconds"};
}

LonLat position_from_json(const json& value, const char* what) {
  if (!value.is_array() || value.size() != 2 || !value[0].is_number() || !value[1].is_number()) {
    throw HttpError{400, std::string(what) + " must be a [longitude, latitude] pair"};
  }
  const double lon = value[0].get<double>();
  const double lat = value[1].get<double>();
  if (!std::isfinite(lon) || !std::isfinite(lat)) throw HttpError{400, std::string(what) + " is not finite"};
  const LonLat p{lon, lat};
  check_geo_range(p);
  return p;
}

json parse_body(const Request& request) {
  try {
    json body = json::parse(request.body);
    if (!body.is_object()) throw HttpError{400, "request body must be a JSON object"};
    return body;
  } catch (const json::parse_error& e) {
    throw HttpError{400, std::string("malformed JSON body: ") + e.what()};
  }
}

std::vector<std::string> body_collections(const json& body) {
  const auto it = body.find("dbs");
  if (it == body.end()) throw HttpError{400, "missing 'dbs'"};
  if (it->is_string()) return parse_collections(it->get<std::string>());
  if (it->is_array()) {
    std::vector<std::string> names;
    for (const json& n : *it) {
      if (!n.is_string() || n.get<std::string>().empty()) {
        throw HttpError{400, "'dbs' entries must be non-empty strings"};
      }
      names.push_back(n.get<std::string>());
    }
    return names;
  }
  throw HttpError{400, "'dbs' must be a string or an array of strings"};
}

double body_number(const json& body, const char* key) {
  const auto it = body.find(key);
  if (it == body.end() || !it->is_number()) throw HttpError{400, std::string("'") + key + "' must be a number"};
  const double v = it->get<double>();
  if (!std::isfinite(v)) throw HttpError{400, std::string("'") + key + "' is not finite"};
  return v;
}

void require(const ApiKeyEntry& caller, ClearanceTier needed) {
  if (static_cast<int>(caller.tier) < static_cast<int>(needed)) {
    throw HttpError{403, std::string(to_string(needed)) + " clearance required"};
  }
}

ordered_json field_state(LonLat center, double radius, Timestamp t,
                         const std::vector<RestrictionDocument>& docs,
                         const std::vector<TemporaryUnit>& temps) {
  ordered_json out;
  out["center"] = {center.x, center.y};
  out["radius"] = radius;
  out["time"] = format_timestamp(t);
  ordered_json restrictions = ordered_json::array();
  for (const RestrictionDocument& doc : docs) restrictions.push_back(document_to_json(doc));
  out["restrictions"] = std::move(restrictions);
  ordered_json ephemeral = ordered_json::array();
  for (const TemporaryUnit& temp : temps) {
    ordered_json e;
    e["client"] = temp.owner;
    e["expires_at"] = format_timestamp(temp.expires_at);
    e["geometry"] = geometry_to_json(temp.geometry());
    ephemeral.push_back(std::move(e));
  }
  out["ephemeral"] = std::move(ephemeral);
  return out;
}

}  // namespace

ordered_json number_json(double value) {
  if (std::isinf(value) && value > 0.0) return "inf";
  return value;
}

ordered_json report_to_json(const ComplianceReport& report) {
  ordered_json out;
  out["verdict"] = std::string(to_string(report.verdict));
  out["energy_cost"] = number_json(report.energy_cost);
  out["peak_energy"] = report.peak_energy;
  out["peak_location"] = {report.peak_location.x, report.peak_location.y};
  out["length"] = report.length;
  return out;
}

ordered_json plan_to_json(const GeoPlan& plan) {
  ordered_json route = ordered_json::array();
  for (const LonLat& p : plan.route) route.push_back({p.x, p.y});
  ordered_json out;
  out["route"] = std::move(route);
  out["report"] = report_to_json(plan.report);
  return out;
}

ordered_json grid_to_json(const BBox& bbox, const EnergyGrid& grid) {
  ordered_json out;
  out["bbox"] = {bbox.lo.x, bbox.lo.y, bbox.hi.x, bbox.hi.y};
  out["nx"] = grid.nx;
  out["ny"] = grid.ny;
  // Rows run south to north, columns west to east.
  ordered_json rows = ordered_json::array();
  for (std::size_t r = 0; r < grid.ny; ++r) {
    ordered_json row = ordered_json::array();
    for (std::size_t c = 0; c < grid.nx; ++c) row.push_back(grid.at(r, c));
    rows.push_back(std::move(row));
  }
  out["values"] = std::move(rows);
  return out;
}

Service::Service(GeoStore& store, ApiKeyTable keys, AddressTable addresses, ServiceOptions options,
                 Clock clock)
    : store_(&store),
      keys_(std::move(keys)),
      addresses_(std::move(addresses)),
      options_(std::move(options)),
      clock_(std::move(clock)) {}

Response Service::handle(const Request& request) const {
  try {
    if (!request.api_key) return error_response(401, "missing X-Api-Key header");
    const auto key = keys_.find(*request.api_key);
    if (key == keys_.end()) return error_response(401, "unknown API key");
    return dispatch(request, key->second);
  } catch (const HttpError& e) {
    return error_response(e.status, e.message);
  } catch (const NoRoute& e) {
    return error_response(409, e.what());
  } catch (const DuplicateId& e) {
    return error_response(409, e.what());
  } catch (const IoError& e) {
    return error_response(500, e.what());
  } catch (const Error& e) {
    return error_response(400, e.what());
  } catch (const json::exception& e) {
    return error_response(400, e.what());
  } catch (const std::invalid_argument& e) {
    return error_response(400, e.what());
  } catch (const std::exception& e) {
    return error_response(500, e.what());
  }
}

Response Service::dispatch(const Request& request, const ApiKeyEntry& caller) const {
  if (request.path.empty() || request.path[0] != '/') throw HttpError{404, "not found"};
  const std::vector<std::string> seg = split(std::string_view(request.path).substr(1), '/');
  const std::string& m = request.method;
  auto method = [&](const char* wanted) {
    if (m != wanted) throw HttpError{405, "method not allowed"};
  };
  auto query_time = [&]() {
    const auto it = request.query.find("t");
    return it == request.query.end() ? clock_() : parse_time_value(json(it->second));
  };

  if (seg.size() == 2 && seg[0] == "test") {
    method("GET");
    const bool known = addresses_.find(seg[1]).has_value();
    if (!known && options_.strict_addresses) throw HttpError{404, "unknown address '" + seg[1] + "'"};
    ordered_json out;
    out["client"] = caller.client;
    out["tier"] = std::string(to_string(caller.tier));
    out["address_known"] = known;
    return json_response(200, out);
  }

  if (seg.size() == 3 && (seg[0] == "adds" || seg[0] == "locs")) {
    method("GET");
    require(caller, ClearanceTier::Observer);
    LonLat center;
    double radius = 0.0;
    if (seg[0] == "adds") {
      const auto entry = addresses_.find(seg[1]);
      if (!entry) throw HttpError{404, "unknown address '" + seg[1] + "'"};
      center = entry->center;
      radius = entry->radius_m;
    } else {
      const std::vector<std::string> parts = split(seg[1], ',');
      if (parts.size() != 3) throw HttpError{400, "expected {lat},{lon},{radius}"};
      const double lat = parse_number(parts[0], "latitude");
      const double lon = parse_number(parts[1], "longitude");
      radius = parse_number(parts[2], "radius");
      if (lat < -90.0 || lat > 90.0) throw HttpError{400, "latitude out of range"};
      if (lon < -180.0 || lon > 180.0) throw HttpError{400, "longitude out of range"};
      if (!(radius > 0.0)) throw HttpError{400, "radius must be positive"};
      center = {lon, lat};
    }
    const std::vector<std::string> dbs = parse_collections(seg[2]);
    const Timestamp t = query_time();
    const auto docs = store_->query_radius(center, radius, dbs, t);
    const auto temps = store_->temporaries_near(center, radius, t);
    return json_response(200, field_state(center, radius, t, docs, temps));
  }

  if (seg.size() == 1 && seg[0] == "collections") {
    method("GET");
    require(caller, ClearanceTier::Observer);
    ordered_json out;
    out["collections"] = store_->collections();
    return json_response(200, out);
  }

  if (seg.size() == 2 && seg[0] == "fields" && seg[1] == "grid") {
    method("GET");
    require(caller, ClearanceTier::Observer);
    auto param = [&](const char* name) -> const std::string& {
      const auto it = request.query.find(name);
      if (it == request.query.end()) throw HttpError{400, std::string("missing '") + name + "'"};
      return it->second;
    };
    const std::vector<std::string> b = split(param("bbox"), ',');
    if (b.size() != 4) throw HttpError{400, "bbox must be minlon,minlat,maxlon,maxlat"};
    const BBox bbox{{parse_number(b[0], "bbox"), parse_number(b[1], "bbox")},
                    {parse_number(b[2], "bbox"), parse_number(b[3], "bbox")}};
    const std::size_t nx = parse_count(param("nx"), "nx");
    const std::size_t ny = parse_count(param("ny"), "ny");
    std::vector<std::string> dbs;
    if (const auto it = request.query.find("dbs"); it != request.query.end() && !it->second.empty()) {
      dbs = parse_collections(it->second);
    }
    const EnergyGrid grid = sample_field(*store_, bbox, nx, ny, dbs, query_time(), options_.sample_cap);
    return json_response(200, grid_to_json(bbox, grid));
  }

  if (seg.size() == 2 && seg[0] == "routes" && (seg[1] == "validate" || seg[1] == "plan")) {
    method("POST");
    require(caller, ClearanceTier::Operator);
    const json body = parse_body(request);
    const std::vector<std::string> dbs = body_collections(body);
    const Timestamp t = body.contains("t") ? parse_time_value(body["t"]) : clock_();

    if (seg[1] == "validate") {
      const auto it = body.find("route");
      if (it == body.end() || !it->is_array()) throw HttpError{400, "'route' must be a position list"};
      if (it->size() < 2) throw HttpError{400, "a route needs at least 2 waypoints"};
      std::vector<LonLat> route;
      for (const json& p : *it) route.push_back(position_from_json(p, "waypoint"));
      const ComplianceReport report =
          validate_route(*store_, route, dbs, t, options_.planner.compliance());
      return json_response(200, report_to_json(report));
    }

    if (!body.contains("start") || !body.contains("goal")) throw HttpError{400, "missing 'start' or 'goal'"};
    const LonLat start = position_from_json(body["start"], "start");
    const LonLat goal = position_from_json(body["goal"], "goal");
    PlannerConfig cfg = options_.planner;
    if (const auto it = body.find("cfg"); it != body.end()) {
      if (!it->is_object()) throw HttpError{400, "'cfg' must be an object"};
      cfg.cell_size = it->value("cell_size", cfg.cell_size);
      cfg.lambda = it->value("lambda", cfg.lambda);
      cfg.block_energy = it->value("block_energy", cfg.block_energy);
      cfg.connectivity = it->value("connectivity", cfg.connectivity);
    }
    return json_response(200, plan_to_json(plan_route_geo(*store_, start, goal, dbs, t, cfg)));
  }

  if (seg.size() == 3 && seg[0] == "clients" && seg[2] == "state") {
    method("POST");
    require(caller, ClearanceTier::Operator);
    if (caller.client != seg[1]) throw HttpError{403, "API key does not belong to client '" + seg[1] + "'"};
    const json body = parse_body(request);
    if (!body.contains("position")) throw HttpError{400, "missing 'position'"};
    const LonLat position = position_from_json(body["position"], "position");
    const auto h = body.find("heading");
    if (h == body.end() || !h->is_array() || h->size() != 2 || !(*h)[0].is_number() ||
        !(*h)[1].is_number()) {
      throw HttpError{400, "'heading' must be an [east, north] vector"};
    }
    const Vec2 heading{(*h)[0].get<double>(), (*h)[1].get<double>()};
    const double speed = body_number(body, "speed");
    const double ttl = body.contains("ttl") ? body_number(body, "ttl") : options_.default_ttl;
    const TemporaryUnit unit = store_->upsert_temporary(caller.client, position, heading, speed, ttl, clock_());
    ordered_json out;
    out["client"] = unit.owner;
    out["expires_at"] = format_timestamp(unit.expires_at);
    out["geometry"] = geometry_to_json(unit.geometry());
    return json_response(200, out);
  }

  if (!seg.empty() && seg[0] == "restrictions" && seg.size() <= 2) {
    require(caller, ClearanceTier::Administrator);
    auto persist = [&]() {
      if (!options_.persist_path) return;
      std::lock_guard lock(persist_mutex_);
      save_snapshot(*store_, *options_.persist_path);
    };
    if (seg.size() == 1) {
      method("POST");
      RestrictionDocument doc = parse_document(request.body);
      const std::string id = store_->insert(std::move(doc));
      persist();
      ordered_json out;
      out["id"] = id;
      return json_response(201, out);
    }
    method("DELETE");
    if (!store_->remove(seg[1])) throw HttpError{404, "no restriction '" + seg[1] + "'"};
    persist();
    ordered_json out;
    out["removed"] = seg[1];
    return json_response(200, out);
  }

  throw HttpError{404, "not found"};
}

struct HttpServer::Impl {
  httplib::Server server;
  std::mutex log_mutex;
};

HttpServer::HttpServer(const Service& service, std::ostream* log) : impl_(std::make_unique<Impl>()) {
  auto handler = [this, &service, log](const httplib::Request& req, httplib::Response& res) {
    const auto started = std::chrono::steady_clock::now();
    Request r;
    r.method = req.method;
    r.path = req.path;
    for (const auto& [k, v] : req.params) r.query.emplace(k, v);
    if (req.has_header("X-Api-Key")) r.api_key = req.get_header_value("X-Api-Key");
    r.body = req.body;
    const Response out = service.handle(r);
    res.status = out.status;
    res.set_content(out.body, out.content_type);
    if (log != nullptr) {
      const double ms =
          std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - started).count();
      char ms_text[32];
      std::snprintf(ms_text, sizeof ms_text, "%.3f", ms);
      std::lock_guard lock(impl_->log_mutex);
      *log << req.method << ' ' << req.path << ' ' << out.status << ' ' << ms_text << "ms\n";
      log->flush();
    }
  };
  // SO_REUSEADDR only: httplib's default SO_REUSEPORT would let a second
  // server share an occupied port.
  impl_->server.set_socket_options([](socket_t sock) {
    int yes = 1;
    setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof(yes));
  });
  impl_->server.Get(".*", handler);
  impl_->server.Post(".*", handler);
  impl_->server.Put(".*", handler);
  impl_->server.Patch(".*", handler);
  impl_->server.Delete(".*", handler);
}

HttpServer::~HttpServer() { stop(); }

bool HttpServer::bind(const std::string& host, int port) {
  if (port == 0) {
    port_ = impl_->server.bind_to_any_port(host);
    return port_ > 0;
  }
  if (!impl_->server.bind_to_port(host, port)) return false;
  port_ = port;
  return true;
}

void HttpServer::run() { impl_->server.listen_after_bind(); }

void HttpServer::stop() {
  if (impl_) impl_->server.stop();
}

bool HttpServer::running() const { return impl_->server.is_running(); }

}  // namespace fieldspace
