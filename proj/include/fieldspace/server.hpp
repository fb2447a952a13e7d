#ifndef FIELDSPACE_SERVER_HPP_
#define FIELDSPACE_SERVER_HPP_

#include <cstddef>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>

#include "json.hpp"

#include "fieldspace/geo_store.hpp"
#include "fieldspace/projection.hpp"
#include "fieldspace/routing.hpp"
#include "fieldspace/time.hpp"

namespace fieldspace {

enum class ClearanceTier { Observer = 0, Operator = 1, Administrator = 2 };

std::string_view to_string(ClearanceTier tier);
std::optional<ClearanceTier> tier_from_string(std::string_view name);

struct ApiKeyEntry {
  std::string client;
  ClearanceTier tier = ClearanceTier::Observer;
};

using ApiKeyTable = std::map<std::string, ApiKeyEntry, std::less<>>;

struct AddressEntry {
  LonLat center;
  double radius_m = 0.0;
};

/// Lowercases ASCII letters, trims, and collapses whitespace runs to one space.
std::string normalize_address(std::string_view address);

class AddressTable {
 public:
  /// Throws RangeError for an out-of-range center or non-positive radius.
  void insert(std::string_view address, AddressEntry entry);
  std::optional<AddressEntry> find(std::string_view address) const;
  std::size_t size() const { return entries_.size(); }

  /// Reads [{"address", "lat", "lon", "radius"}, ...]. Throws ConfigError.
  static AddressTable from_json(const nlohmann::json& value);

 private:
  std::map<std::string, AddressEntry, std::less<>> entries_;
};

/// Throws ConfigError if the file is missing or malformed.
AddressTable load_address_table(const std::filesystem::path& path);

struct ServiceOptions {
  // Unknown addresses make GET /test/{adds} fail with 404 instead of
  // reporting address_known = false.
  bool strict_addresses = false;
  PlannerConfig planner;
  // Heartbeat ttl when the request omits it, seconds.
  double default_ttl = 30.0;
  std::size_t sample_cap = kDefaultSampleCap;
  // When set, the store is re-saved here after every restriction change.
  std::optional<std::filesystem::path> persist_path;
};

struct ServerConfig {
  std::string listen_host = "127.0.0.1";
  int listen_port = 8080;
  std::filesystem::path store_path;
  std::filesystem::path address_table_path;
  ApiKeyTable keys;
  StoreConfig store;
  ServiceOptions service;
};

using EnvLookup = std::function<std::optional<std::string>(const char*)>;

/// Reads the process environment.
std::optional<std::string> process_env(const char* name);

/// Loads a JSON config file, then applies FIELDSPACE_LISTEN_HOST,
/// FIELDSPACE_LISTEN_PORT, FIELDSPACE_STORE_PATH, FIELDSPACE_ADDRESS_TABLE
/// and FIELDSPACE_STRICT_ADDRESSES from `env`. Relative paths resolve
/// against the config file's directory. Throws ConfigError.
ServerConfig load_server_config(const std::filesystem::path& path,
                                const EnvLookup& env = process_env);

struct Request {
  std::string method;
  // Percent-decoded path without the query string.
  std::string path;
  std::map<std::string, std::string, std::less<>> query;
  std::optional<std::string> api_key;
  std::string body;
};

struct Response {
  int status = 200;
  std::string body;
  std::string content_type = "application/json";
};

using Clock = std::function<Timestamp()>;

/// Transport-independent request handling. Thread-safe: the store carries
/// its own readers/writer lock.
class Service {
 public:
  Service(GeoStore& store, ApiKeyTable keys, AddressTable addresses, ServiceOptions options = {},
          Clock clock = now_utc);

  Response handle(const Request& request) const;

  const ServiceOptions& options() const { return options_; }

 private:
  Response dispatch(const Request& request, const ApiKeyEntry& caller) const;

  GeoStore* store_;
  ApiKeyTable keys_;
  AddressTable addresses_;
  ServiceOptions options_;
  Clock clock_;
  // Serializes snapshot writes after restriction changes.
  mutable std::mutex persist_mutex_;
};

/// JSON serializations shared by the server and the CLI.
nlohmann::ordered_json number_json(double value);
nlohmann::ordered_json report_to_json(const ComplianceReport& report);
nlohmann::ordered_json plan_to_json(const GeoPlan& plan);
nlohmann::ordered_json grid_to_json(const BBox& bbox, const EnergyGrid& grid);

/// HTTP front end over a Service. Logs "METHOD path status ms" per request.
class HttpServer {
 public:
  HttpServer(const Service& service, std::ostream* log);
  ~HttpServer();
  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  /// Port 0 picks a free port. Returns false if the address cannot be bound.
  bool bind(const std::string& host, int port);
  int port() const { return port_; }
  /// Serves until stop() is called. Requires a successful bind().
  void run();
  void stop();
  bool running() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  int port_ = -1;
};

}  // namespace fieldspace

#endif  // FIELDSPACE_SERVER_HPP_
