#include "fieldspace/cli.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"

#include "fieldspace/conversion.hpp"
#include "fieldspace/errors.hpp"
#include "fieldspace/geo_store.hpp"
#include "fieldspace/routing.hpp"
#include "fieldspace/server.hpp"

namespace fieldspace {

namespace {

namespace fs = std::filesystem;

std::atomic<bool> g_stop{false};

// Thrown for flag values that parse but make no sense; maps to exit 2.
struct UsageError {
  std::string message;
};

std::vector<double> parse_numbers(const std::string& text, std::size_t count, const char* what) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != item.size() || !std::isfinite(v)) {
      throw UsageError{std::string("malformed ") + what + " '" + text + "'"};
    }
    out.push_back(v);
  }
  if (out.size() != count) {
    throw UsageError{std::string(what) + " needs " + std::to_string(count) + " comma-separated numbers"};
  }
  return out;
}

LonLat parse_position(const std::string& text, const char* what) {
  const auto v = parse_numbers(text, 2, what);
  const LonLat p{v[0], v[1]};
  check_geo_range(p);
  return p;
}

std::vector<std::string> parse_dbs(const std::string& text) {
  std::vector<std::string> out;
  if (text.empty()) return out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) throw UsageError{"empty collection name in '" + text + "'"};
    out.push_back(item);
  }
  return out;
}

Timestamp parse_time_flag(const std::string& text) {
  if (text.empty()) return now_utc();
  try {
    return parse_timestamp(text);
  } catch (const std::invalid_argument& e) {
    throw UsageError{e.what()};
  }
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::string format_energy(double e) {
  if (e == 0.0) return "0.000000000";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%#.9g", e);
  return buf;
}

struct Globals {
  std::string store;
  std::string config;
};

struct Context {
  ServerConfig config;
  fs::path store_path;
};

Context load_context(const Globals& g) {
  Context ctx;
  if (!g.config.empty()) ctx.config = load_server_config(g.config);
  ctx.store_path = g.store.empty() ? ctx.config.store_path : fs::path(g.store);
  return ctx;
}

// No --dbs means every collection in the store.
std::vector<std::string> select_collections(const GeoStore& store, const std::vector<std::string>& cols) {
  return cols.empty() ? store.collections() : cols;
}

GeoStore open_store(const Context& ctx) {
  if (ctx.store_path.empty()) throw UsageError{"no store given (--store or store_path in --config)"};
  if (!fs::exists(ctx.store_path / kManifestName)) {
    throw UsageError{"no snapshot at " + ctx.store_path.string()};
  }
  return load_snapshot(ctx.store_path, ctx.config.store);
}

}  // namespace

void request_stop() { g_stop.store(true); }

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err,
            const CliHooks& hooks) {
  CLI::App app{"Potential-field airspace restriction engine", "fieldspace"};
  app.require_subcommand(1);
  Globals globals;
  app.add_option("--store", globals.store, "Snapshot directory");
  app.add_option("--config", globals.config, "Server config file (JSON)");

  auto* serve = app.add_subcommand("serve", "Run the REST server");
  serve->fallthrough();
  bool init = false;
  serve->add_flag("--init", init, "Create an empty store if none exists");

  auto* ingest = app.add_subcommand("ingest", "Load lon,lat,name point records as restrictions");
  ingest->fallthrough();
  std::string records;
  std::string collection;
  std::string repulsion = "2500,0,0,2500";
  bool skip_duplicates = false;
  char delimiter = ',';
  ingest->add_option("--records", records, "Record file")->required();
  ingest->add_option("--collection", collection, "Target collection")->required();
  ingest->add_option("--repulsion", repulsion, "Repulsion matrix a11,a12,a21,a22 in m^2")
      ->capture_default_str();
  ingest->add_flag("--skip-duplicates", skip_duplicates, "Skip records whose id already exists");
  ingest->add_option("--delimiter", delimiter, "Field delimiter")->capture_default_str();

  std::string dbs;
  std::string time_text;

  auto* eval = app.add_subcommand("eval", "Print the field energy at a position");
  eval->fallthrough();
  double lat = 0.0;
  double lon = 0.0;
  eval->add_option("--lat", lat, "Latitude")->required();
  eval->add_option("--lon", lon, "Longitude")->required();
  eval->add_option("--dbs", dbs, "Comma-separated collections (default: all)");
  eval->add_option("-t,--time", time_text, "Evaluation time (ISO-8601 or epoch seconds)");

  auto* render = app.add_subcommand("render", "Write the field over a box as a PGM image");
  render->fallthrough();
  std::string bbox_text;
  std::size_t nx = 0;
  std::size_t ny = 0;
  std::string out_path;
  render->add_option("--bbox", bbox_text, "minlon,minlat,maxlon,maxlat")->required();
  render->add_option("--nx", nx, "Columns")->required();
  render->add_option("--ny", ny, "Rows")->required();
  render->add_option("--dbs", dbs, "Comma-separated collections");
  render->add_option("-t,--time", time_text, "Evaluation time");
  render->add_option("-o,--out", out_path, "Output file")->required();

  auto* route = app.add_subcommand("route", "Plan or validate a route");
  route->fallthrough();
  std::string start_text;
  std::string goal_text;
  std::string waypoints_text;
  bool validate_only = false;
  std::optional<double> cell_size;
  std::optional<double> lambda;
  std::optional<double> block_energy;
  std::optional<int> connectivity;
  route->add_option("--start", start_text, "lon,lat");
  route->add_option("--goal", goal_text, "lon,lat");
  route->add_option("--waypoints", waypoints_text, "lon,lat;lon,lat;... for --validate-only");
  route->add_flag("--validate-only", validate_only, "Score the given route instead of planning");
  route->add_option("--dbs", dbs, "Comma-separated collections");
  route->add_option("-t,--time", time_text, "Evaluation time");
  route->add_option("--cell-size", cell_size, "Grid cell size, meters");
  route->add_option("--lambda", lambda, "Energy weight in the move cost");
  route->add_option("--block-energy", block_energy, "Blocking energy threshold");
  route->add_option("--connectivity", connectivity, "4 or 8");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      out << app.help();
      return kExitOk;
    }
    err << "fieldspace: " << e.what() << "\n";
    return kExitUsage;
  }

  try {
    if (*serve) {
      if (globals.config.empty()) throw UsageError{"serve needs --config"};
      Context ctx = load_context(globals);
      if (ctx.store_path.empty()) throw UsageError{"no store_path configured"};
      GeoStore store(ctx.config.store);
      if (fs::exists(ctx.store_path / kManifestName)) {
        store = load_snapshot(ctx.store_path, ctx.config.store);
      } else if (init) {
        save_snapshot(store, ctx.store_path);
      } else {
        throw UsageError{"no snapshot at " + ctx.store_path.string() + " (use --init)"};
      }
      AddressTable addresses;
      if (!ctx.config.address_table_path.empty()) {
        addresses = load_address_table(ctx.config.address_table_path);
      }
      ServiceOptions options = ctx.config.service;
      options.persist_path = ctx.store_path;
      const Service service(store, ctx.config.keys, std::move(addresses), options);
      HttpServer server(service, &out);
      if (!server.bind(ctx.config.listen_host, ctx.config.listen_port)) {
        err << "fieldspace: cannot bind " << ctx.config.listen_host << ":" << ctx.config.listen_port << "\n";
        return kExitBind;
      }
      out << "listening on " << ctx.config.listen_host << ":" << server.port() << "\n";
      out.flush();
      g_stop.store(false);
      std::thread worker([&] { server.run(); });
      if (hooks.on_listening) hooks.on_listening(server.port());
      while (!g_stop.load()) std::this_thread::sleep_for(std::chrono::milliseconds(20));
      server.stop();
      worker.join();
      return kExitOk;
    }

    if (*ingest) {
      const auto r = parse_numbers(repulsion, 4, "repulsion");
      const Context ctx = load_context(globals);
      if (ctx.store_path.empty()) throw UsageError{"no store given (--store or store_path in --config)"};
      const auto parsed = parse_point_records(read_file(records), delimiter);
      const auto docs = ingest_point_dataset(parsed, collection, Matrix2{r[0], r[1], r[2], r[3]});
      GeoStore store = fs::exists(ctx.store_path / kManifestName)
                           ? load_snapshot(ctx.store_path, ctx.config.store)
                           : GeoStore(ctx.config.store);
      std::size_t inserted = 0;
      std::size_t skipped = 0;
      for (std::size_t i = 0; i < docs.size(); ++i) {
        const RestrictionDocument& doc = docs[i];
        if (store.get(doc.id)) {
          if (!skip_duplicates) {
            throw DuplicateId("line " + std::to_string(parsed[i].line) +
                              ": id '" + doc.id + "' already stored (use --skip-duplicates)");
          }
          ++skipped;
          continue;
        }
        store.insert(doc);
        ++inserted;
      }
      store.register_collection(collection);
      save_snapshot(store, ctx.store_path);
      out << "inserted " << inserted;
      if (skipped > 0) out << ", skipped " << skipped;
      out << "\n";
      return kExitOk;
    }

    if (*eval) {
      const Context ctx = load_context(globals);
      const LonLat p{lon, lat};
      check_geo_range(p);
      const std::vector<std::string> cols = parse_dbs(dbs);
      const Timestamp t = parse_time_flag(time_text);
      const GeoStore store = open_store(ctx);
      // Corner sample of a tiny 2x2 grid: identical to GET /fields/grid on
      // the same box.
      constexpr double kDelta = 1e-6;
      const bool east = p.x + kDelta <= 180.0;
      const bool north = p.y + kDelta <= 90.0;
      const BBox box{{east ? p.x : p.x - kDelta, north ? p.y : p.y - kDelta},
                     {east ? p.x + kDelta : p.x, north ? p.y + kDelta : p.y}};
      const EnergyGrid grid = sample_field(store, box, 2, 2, select_collections(store, cols), t);
      out << format_energy(grid.at(north ? 0 : 1, east ? 0 : 1)) << "\n";
      return kExitOk;
    }

    if (*render) {
      const Context ctx = load_context(globals);
      const auto b = parse_numbers(bbox_text, 4, "bbox");
      const BBox box{{b[0], b[1]}, {b[2], b[3]}};
      const std::vector<std::string> cols = parse_dbs(dbs);
      const Timestamp t = parse_time_flag(time_text);
      const GeoStore store = open_store(ctx);
      const EnergyGrid grid =
          sample_field(store, box, nx, ny, select_collections(store, cols), t, ctx.config.service.sample_cap);
      std::string bytes = "P5\n" + std::to_string(nx) + " " + std::to_string(ny) + "\n255\n";
      for (std::size_t row = ny; row-- > 0;) {
        for (std::size_t col = 0; col < nx; ++col) {
          bytes.push_back(static_cast<char>(std::lround(255.0 * grid.at(row, col))));
        }
      }
      std::ofstream file(out_path, std::ios::binary | std::ios::trunc);
      if (!file.write(bytes.data(), static_cast<std::streamsize>(bytes.size()))) {
        throw IoError("cannot write " + out_path);
      }
      return kExitOk;
    }

    if (*route) {
      const Context ctx = load_context(globals);
      const std::vector<std::string> cols = parse_dbs(dbs);
      const Timestamp t = parse_time_flag(time_text);
      PlannerConfig cfg = ctx.config.service.planner;
      if (cell_size) cfg.cell_size = *cell_size;
      if (lambda) cfg.lambda = *lambda;
      if (block_energy) cfg.block_energy = *block_energy;
      if (connectivity) cfg.connectivity = *connectivity;
      try {
        cfg.validate();
      } catch (const std::invalid_argument& e) {
        throw UsageError{e.what()};
      }

      if (validate_only) {
        std::vector<LonLat> wps;
        if (!waypoints_text.empty()) {
          std::stringstream ss(waypoints_text);
          std::string item;
          while (std::getline(ss, item, ';')) wps.push_back(parse_position(item, "waypoint"));
        } else {
          if (start_text.empty() || goal_text.empty()) throw UsageError{"--validate-only needs --waypoints or --start and --goal"};
          wps = {parse_position(start_text, "start"), parse_position(goal_text, "goal")};
        }
        if (wps.size() < 2) throw UsageError{"a route needs at least 2 waypoints"};
        const GeoStore store = open_store(ctx);
        const ComplianceReport report = validate_route(store, wps, select_collections(store, cols), t, cfg.compliance());
        out << report_to_json(report).dump() << "\n";
        return report.verdict == Verdict::Violation ? kExitViolation : kExitOk;
      }

      if (start_text.empty() || goal_text.empty()) throw UsageError{"route needs --start and --goal"};
      const LonLat start = parse_position(start_text, "start");
      const LonLat goal = parse_position(goal_text, "goal");
      const GeoStore store = open_store(ctx);
      try {
        const GeoPlan plan = plan_route_geo(store, start, goal, select_collections(store, cols), t, cfg);
        out << plan_to_json(plan).dump() << "\n";
        return kExitOk;
      } catch (const NoRoute& e) {
        err << "fieldspace: " << e.what() << "\n";
        return kExitNoRoute;
      }
    }
  } catch (const UsageError& e) {
    err << "fieldspace: " << e.message << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "fieldspace: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}

}  // namespace fieldspace
