#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

#include "doctest.h"
#include "httplib.h"

#include "fieldspace/cli.hpp"
#include "fieldspace/errors.hpp"
#include "fieldspace/server.hpp"
#include "fixtures.hpp"

using namespace fieldspace;
using namespace fixture;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run cli(std::vector<std::string> args, const CliHooks& hooks = {}) {
  args.insert(args.begin(), "fieldspace");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err, hooks);
  return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("fieldspace_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string pos(LonLat p) { return fmt(p.x) + "," + fmt(p.y); }

const std::string kFiveRecords =
    "lon,lat,name\n"
    "-122.0,37.0,Alpha School\n"
    "-122.01,37.0,Beta School\n"
    "-122.02,37.01,Gamma School\n"
    "-121.99,36.99,Delta School\n"
    "-121.98,37.02,Epsilon School\n";

// A store with the fixture documents saved as a snapshot.
fs::path fixture_store(const std::string& name) {
  const fs::path dir = scratch(name);
  GeoStore store;
  populate(store);
  save_snapshot(store, dir / "store");
  return dir / "store";
}

Request grid_at(LonLat p, const std::string& dbs) {
  Request r = get("/fields/grid", "obs-key");
  r.query = {{"bbox", fmt(p.x) + "," + fmt(p.y) + "," + fmt(p.x + 1e-6) + "," + fmt(p.y + 1e-6)},
             {"nx", "2"},
             {"ny", "2"},
             {"dbs", dbs},
             {"t", "2026-06-01T12:00:00Z"}};
  return r;
}

std::string format_energy(double e) {
  if (e == 0.0) return "0.000000000";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%#.9g", e);
  return buf;
}

}  // namespace

TEST_CASE("ingest") {
  const fs::path dir = scratch("ingest");
  std::ofstream(dir / "five.csv") << kFiveRecords;
  const std::string store = (dir / "store").string();
  const std::string records = (dir / "five.csv").string();

  Run r = cli({"--store", store, "ingest", "--records", records, "--collection", "schools"});
  CHECK(r.code == kExitOk);
  CHECK(r.out == "inserted 5\n");
  CHECK(load_snapshot(store).size() == 5);

  r = cli({"--store", store, "ingest", "--records", records, "--collection", "schools", "--skip-duplicates"});
  CHECK(r.code == kExitOk);
  CHECK(r.out == "inserted 0, skipped 5\n");

  r = cli({"--store", store, "ingest", "--records", records, "--collection", "schools"});
  CHECK(r.code == kExitUsage);
  CHECK(r.err.find("line 2") != std::string::npos);
  CHECK(load_snapshot(store).size() == 5);

  std::ofstream(dir / "bad.csv") << "-122.0,37.0,ok\n-122.1,37.0,ok\n-122.2,north,broken\n";
  r = cli({"--store", store, "ingest", "--records", (dir / "bad.csv").string(), "--collection", "parks"});
  CHECK(r.code == kExitUsage);
  CHECK(r.err.find("line 3") != std::string::npos);
  CHECK_FALSE(load_snapshot(store).has_collection("parks"));

  std::ofstream(dir / "far.csv") << "-122.0,37.0,ok\n-222.1,37.0,off the map\n";
  r = cli({"--store", store, "ingest", "--records", (dir / "far.csv").string(), "--collection", "parks"});
  CHECK(r.code == kExitUsage);
  CHECK(r.err.find("line 2") != std::string::npos);

  r = cli({"--store", store, "ingest", "--records", records, "--collection", "x", "--repulsion", "1,2,3,4"});
  CHECK(r.code == kExitUsage);
  r = cli({"--store", store, "ingest", "--records", records, "--collection", "x", "--repulsion", "1,2"});
  CHECK(r.code == kExitUsage);
  r = cli({"--store", store, "ingest", "--records", (dir / "missing.csv").string(), "--collection", "x"});
  CHECK(r.code == kExitUsage);
  r = cli({"--store", store, "ingest", "--collection", "x"});
  CHECK(r.code == kExitUsage);

  std::ofstream(dir / "semi.csv") << "-121.5;37.5;Semi\n";
  r = cli({"--store", store, "ingest", "--records", (dir / "semi.csv").string(), "--collection", "parks",
           "--delimiter", ";", "--repulsion", "900,0,0,900"});
  CHECK(r.out == "inserted 1\n");
  const auto parks = load_snapshot(store).documents();
  CHECK(std::count_if(parks.begin(), parks.end(), [](const auto& d) { return d.collection == "parks"; }) == 1);
  fs::remove_all(dir);
}

TEST_CASE("eval") {
  const fs::path store = fixture_store("eval");
  const std::string t = "2026-06-01T12:00:00Z";
  Run r = cli({"--store", store.string(), "eval", "--lat", fmt(kCenter.y), "--lon", fmt(kCenter.x), "-t", t});
  CHECK(r.code == kExitOk);
  CHECK(r.out == "1.00000000\n");

  const LonLat far = offset(kCenter, -50000, 40000);
  r = cli({"--store", store.string(), "eval", "--lat", fmt(far.y), "--lon", fmt(far.x), "-t", t, "--dbs", "schools"});
  CHECK(r.out == "0.000000000\n");

  r = cli({"--store", store.string(), "eval", "--lat", "37", "--lon", "-122", "--dbs", "nonexistent"});
  CHECK(r.code == kExitUsage);
  r = cli({"--store", store.string(), "eval", "--lat", "97", "--lon", "-122"});
  CHECK(r.code == kExitUsage);
  r = cli({"--store", (store.parent_path() / "nothing").string(), "eval", "--lat", "37", "--lon", "-122"});
  CHECK(r.code == kExitUsage);
  r = cli({"eval", "--lat", "37", "--lon", "-122"});
  CHECK(r.code == kExitUsage);

  // Matches the server's grid value bit for bit.
  GeoStore loaded = load_snapshot(store);
  const Service service(loaded, keys(), addresses());
  for (const LonLat p : {offset(kCenter, 55, 10), offset(kCenter, 280, 180), offset(kCenter, -240, 120),
                         offset(kCenter, 20, -70)}) {
    for (const std::string dbs : {"schools", "schools,hospitals"}) {
      const Response g = service.handle(grid_at(p, dbs));
      REQUIRE(g.status == 200);
      const double v = json::parse(g.body)["values"][0][0].get<double>();
      r = cli({"--store", store.string(), "eval", "--lat", fmt(p.y), "--lon", fmt(p.x), "--dbs", dbs, "-t", t});
      CHECK(r.out == format_energy(v) + "\n");
    }
  }
  r = cli({"--store", store.string(), "eval", "--lat", "90", "--lon", "180", "-t", t});
  CHECK(r.code == kExitOk);
  CHECK(r.out == "0.000000000\n");
  fs::remove_all(store.parent_path());
}

TEST_CASE("render") {
  const fs::path dir = scratch("render");
  const LonLat c = kCenter;
  const double a = 2500.0;
  {
    GeoStore store;
    store.insert(point_doc("p", "schools", c, a));
    store.insert(rect_doc("block", "schools", offset(c, 5000, 5000), offset(c, 5400, 5300), 100));
    save_snapshot(store, dir / "store");
  }
  const std::string store = (dir / "store").string();
  const std::string t = "2026-06-01T12:00:00Z";
  auto render = [&](LonLat lo, LonLat hi, int nx, int ny, const std::string& out) {
    return cli({"--store", store, "render", "--bbox", pos(lo) + "," + pos(hi), "--nx", std::to_string(nx), "--ny",
                std::to_string(ny), "-t", t, "-o", (dir / out).string()});
  };

  // Column 0 sits on the point, column 1 at sqrt(a) meters east.
  const LonLat lo{c.x, c.y - 1e-7};
  const LonLat hi{c.x + std::sqrt(a) / meters_per_degree_lon(c.y), c.y + 1e-7};
  REQUIRE(render(lo, hi, 2, 2, "known.pgm").code == kExitOk);
  const std::string header = "P5\n2 2\n255\n";
  const std::string bytes = slurp(dir / "known.pgm");
  REQUIRE(bytes.size() == header.size() + 4);
  CHECK(bytes.substr(0, header.size()) == header);
  for (int row = 0; row < 2; ++row) {
    CHECK(static_cast<unsigned char>(bytes[header.size() + 2 * row]) == 255);
    CHECK(static_cast<unsigned char>(bytes[header.size() + 2 * row + 1]) == 94);
  }

  REQUIRE(render(offset(c, -20000, -20000), offset(c, -19000, -19500), 17, 9, "empty.pgm").code == kExitOk);
  const std::string empty = slurp(dir / "empty.pgm");
  CHECK(empty.substr(0, 12) == "P5\n17 9\n255\n");
  CHECK(empty.size() == 12 + 17 * 9);
  CHECK(std::all_of(empty.begin() + 12, empty.end(), [](char b) { return b == 0; }));

  REQUIRE(render(offset(c, 5010, 5010), offset(c, 5390, 5290), 13, 7, "full.pgm").code == kExitOk);
  const std::string full = slurp(dir / "full.pgm");
  CHECK(std::all_of(full.begin() + 12, full.end(), [](char b) { return static_cast<unsigned char>(b) == 255; }));

  // Row 0 of the image is the northern edge.
  REQUIRE(render(offset(c, -100, -100), offset(c, 100, 300), 3, 5, "north.pgm").code == kExitOk);
  const std::string north = slurp(dir / "north.pgm");
  const std::size_t h = std::string("P5\n3 5\n255\n").size();
  CHECK(static_cast<unsigned char>(north[h + 3 * 3 + 1]) == 255);
  CHECK(static_cast<unsigned char>(north[h + 1]) < 255);

  for (int i = 0; i < 3; ++i) {
    REQUIRE(render(offset(c, -300, -200), offset(c, 400, 250), 64, 48, "a" + std::to_string(i) + ".pgm").code == 0);
  }
  CHECK(slurp(dir / "a0.pgm") == slurp(dir / "a1.pgm"));
  CHECK(slurp(dir / "a1.pgm") == slurp(dir / "a2.pgm"));

  CHECK(render(lo, hi, 5000, 5000, "cap.pgm").code == kExitUsage);
  CHECK(render(hi, lo, 5, 5, "flip.pgm").code == kExitUsage);
  CHECK(render(lo, hi, 1, 5, "thin.pgm").code == kExitUsage);
  CHECK(cli({"--store", store, "render", "--bbox", "1,2,3", "--nx", "2", "--ny", "2", "-o", "x.pgm"}).code == kExitUsage);
  fs::remove_all(dir);
}

TEST_CASE("route") {
  const fs::path store = fixture_store("route");
  const std::string t = "2026-06-01T12:00:00Z";
  const LonLat start = offset(kCenter, -600, -50), goal = offset(kCenter, 600, 40);

  Run r = cli({"--store", store.string(), "route", "--start", pos(start), "--goal", pos(goal), "--dbs",
               "schools,hospitals", "-t", t});
  REQUIRE(r.code == kExitOk);
  const json plan = json::parse(r.out);
  CHECK(plan["route"].size() >= 2);
  CHECK(plan["report"]["verdict"] == "Compliant");

  GeoStore loaded = load_snapshot(store);
  const Service service(loaded, keys(), addresses());
  json req;
  req["start"] = {start.x, start.y};
  req["goal"] = {goal.x, goal.y};
  req["dbs"] = "schools,hospitals";
  req["t"] = t;
  const Response server_plan = service.handle(post("/routes/plan", "op-key", req.dump()));
  REQUIRE(server_plan.status == 200);
  CHECK(r.out == server_plan.body + "\n");

  r = cli({"--store", store.string(), "route", "--start", pos(start), "--goal", pos(goal), "--dbs", "schools", "-t",
           t, "--cell-size", "10", "--lambda", "3", "--connectivity", "4"});
  CHECK(r.code == kExitOk);

  // Violating route through school-a.
  const LonLat w = offset(kCenter, -300, 0), e = offset(kCenter, 300, 0);
  r = cli({"--store", store.string(), "route", "--validate-only", "--waypoints", pos(w) + ";" + pos(e), "--dbs",
           "schools", "-t", t});
  CHECK(r.code == kExitViolation);
  CHECK(json::parse(r.out)["verdict"] == "Violation");
  CHECK(json::parse(r.out)["energy_cost"] == "inf");
  json vreq;
  vreq["route"] = {{w.x, w.y}, {e.x, e.y}};
  vreq["dbs"] = "schools";
  vreq["t"] = t;
  CHECK(r.out == service.handle(post("/routes/validate", "op-key", vreq.dump())).body + "\n");

  const LonLat n1 = offset(kCenter, -300, 2000), n2 = offset(kCenter, 300, 2000);
  r = cli({"--store", store.string(), "route", "--validate-only", "--start", pos(n1), "--goal", pos(n2), "-t", t});
  CHECK(r.code == kExitOk);
  CHECK(json::parse(r.out)["verdict"] == "Compliant");

  CHECK(cli({"--store", store.string(), "route", "--start", pos(start)}).code == kExitUsage);
  CHECK(cli({"--store", store.string(), "route", "--start", "x,y", "--goal", pos(goal)}).code == kExitUsage);
  CHECK(cli({"--store", store.string(), "route", "--start", pos(start), "--goal", pos(goal), "--connectivity", "6"})
            .code == kExitUsage);
  CHECK(cli({"--store", store.string(), "route", "--start", pos(kCenter), "--goal", pos(goal), "-t", t}).code ==
        kExitUsage);
  CHECK(cli({"--store", store.string(), "route", "--validate-only", "--waypoints", pos(w)}).code == kExitUsage);
  CHECK(cli({"--store", store.string(), "route", "--start", pos(start), "--goal", pos(goal), "-t", "noon"}).code ==
        kExitUsage);
  CHECK(cli({"--store", store.string(), "route", "--bogus-flag"}).code == kExitUsage);
  fs::remove_all(store.parent_path());
}

TEST_CASE("route to a walled goal") {
  const fs::path dir = scratch("walled");
  const LonLat g = kCenter;
  {
    GeoStore store;
    store.insert(rect_doc("w1", "walls", offset(g, -60, -60), offset(g, -50, 60), 4));
    store.insert(rect_doc("w2", "walls", offset(g, 50, -60), offset(g, 60, 60), 4));
    store.insert(rect_doc("w3", "walls", offset(g, -60, -60), offset(g, 60, -50), 4));
    store.insert(rect_doc("w4", "walls", offset(g, -60, 50), offset(g, 60, 60), 4));
    save_snapshot(store, dir / "store");
  }
  const Run r = cli({"--store", (dir / "store").string(), "route", "--start", pos(offset(g, -500, 0)), "--goal",
                     pos(g), "--dbs", "walls"});
  CHECK(r.code == kExitNoRoute);
  CHECK(r.out.empty());
  fs::remove_all(dir);
}

TEST_CASE("serve") {
  const fs::path dir = scratch("serve");
  const json config = {{"listen_host", "127.0.0.1"},
                       {"listen_port", 0},
                       {"store_path", "store"},
                       {"address_table", "addresses.json"},
                       {"keys", {{{"key", "k-obs"}, {"client", "viewer"}, {"tier", "Observer"}}}}};
  std::ofstream(dir / "config.json") << config.dump();
  std::ofstream(dir / "addresses.json") << R"([{"address": "Town Hall", "lat": 37, "lon": -122, "radius": 500}])";
  const std::string cfg = (dir / "config.json").string();

  SUBCASE("missing store without --init") {
    CHECK(cli({"--config", cfg, "serve"}).code == kExitUsage);
  }
  SUBCASE("serves and logs requests") {
    int status = 0;
    std::string body;
    CliHooks hooks;
    hooks.on_listening = [&](int port) {
      httplib::Client client("127.0.0.1", port);
      auto res = client.Get("/test/Town%20Hall", httplib::Headers{{"X-Api-Key", "k-obs"}});
      if (res) {
        status = res->status;
        body = res->body;
      }
      request_stop();
    };
    const Run r = cli({"--config", cfg, "serve", "--init"}, hooks);
    CHECK(r.code == kExitOk);
    CHECK(status == 200);
    CHECK(json::parse(body)["address_known"] == true);
    CHECK(r.out.find("listening on 127.0.0.1:") != std::string::npos);
    CHECK(r.out.find("GET /test/Town Hall 200 ") != std::string::npos);
    CHECK(fs::exists(dir / "store" / kManifestName));
  }
  SUBCASE("bad config") {
    CHECK(cli({"--config", (dir / "missing.json").string(), "serve"}).code == kExitUsage);
    std::ofstream(dir / "broken.json") << "{\"listen_port\": \"eighty\"}";
    CHECK(cli({"--config", (dir / "broken.json").string(), "serve", "--init"}).code == kExitUsage);
    CHECK(cli({"serve"}).code == kExitUsage);
  }
  SUBCASE("port in use") {
    GeoStore store;
    const Service service(store, {}, {});
    HttpServer squatter(service, nullptr);
    REQUIRE(squatter.bind("127.0.0.1", 0));
    json busy = config;
    busy["listen_port"] = squatter.port();
    std::ofstream(dir / "busy.json") << busy.dump();
    const Run r = cli({"--config", (dir / "busy.json").string(), "serve", "--init"});
    CHECK(r.code == kExitBind);
    CHECK(r.err.find("cannot bind") != std::string::npos);
  }
  fs::remove_all(dir);
}

TEST_CASE("usage") {
  CHECK(cli({}).code == kExitUsage);
  CHECK(cli({"frobnicate"}).code == kExitUsage);
  const Run help = cli({"--help"});
  CHECK(help.code == kExitOk);
  CHECK(help.out.find("render") != std::string::npos);
}
