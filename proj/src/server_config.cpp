#include <cctype>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "fieldspace/errors.hpp"
#include "fieldspace/server.hpp"

namespace fieldspace {

namespace {

using nlohmann::json;

json read_json_file(const std::filesystem::path& path, const char* what) {
  std::ifstream in(path);
  if (!in) throw ConfigError(std::string("cannot open ") + what + " " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  try {
    return json::parse(buf.str());
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

template <class T>
T get_or(const json& obj, const char* key, T fallback) {
  const auto it = obj.find(key);
  if (it == obj.end()) return fallback;
  try {
    return it->get<T>();
  } catch (const json::exception&) {
    throw ConfigError(std::string("config key '") + key + "' has the wrong type");
  }
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& value) {
  if (value.empty()) return {};
  const std::filesystem::path p(value);
  return p.is_absolute() ? p : base / p;
}

bool parse_bool(const std::string& name, const std::string& value) {
  std::string v;
  for (char c : value) v.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
  if (v == "0" || v == "false" || v == "no" || v == "off") return false;
  throw ConfigError(name + " must be a boolean, got '" + value + "'");
}

int parse_port(const std::string& name, const std::string& value) {
  char* end = nullptr;
  const long port = std::strtol(value.c_str(), &end, 10);
  if (value.empty() || *end != '\0' || port < 0 || port > 65535) {
    throw ConfigError(name + " must be a port number, got '" + value + "'");
  }
  return static_cast<int>(port);
}

}  // namespace

std::string_view to_string(ClearanceTier tier) {
  switch (tier) {
    case ClearanceTier::Observer: return "Observer";
    case ClearanceTier::Operator: return "Operator";
    case ClearanceTier::Administrator: return "Administrator";
  }
  return "Observer";
}

std::optional<ClearanceTier> tier_from_string(std::string_view name) {
  if (name == "Observer") return ClearanceTier::Observer;
  if (name == "Operator") return ClearanceTier::Operator;
  if (name == "Administrator") return ClearanceTier::Administrator;
  return std::nullopt;
}

std::string normalize_address(std::string_view address) {
  std::string out;
  bool pending_space = false;
  for (char c : address) {
    const auto uc = static_cast<unsigned char>(c);
    if (std::isspace(uc)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out.push_back(static_cast<char>(std::tolower(uc)));
  }
  return out;
}

void AddressTable::insert(std::string_view address, AddressEntry entry) {
  check_geo_range(entry.center);
  if (!(entry.radius_m > 0.0) || !std::isfinite(entry.radius_m)) {
    throw RangeError("address radius must be positive");
  }
  entries_.insert_or_assign(normalize_address(address), entry);
}

std::optional<AddressEntry> AddressTable::find(std::string_view address) const {
  const auto it = entries_.find(normalize_address(address));
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

AddressTable AddressTable::from_json(const json& value) {
  if (!value.is_array()) throw ConfigError("address table must be a JSON array");
  AddressTable table;
  for (std::size_t i = 0; i < value.size(); ++i) {
    const json& row = value[i];
    try {
      const auto address = row.at("address").get<std::string>();
      if (normalize_address(address).empty()) throw ConfigError("empty address");
      table.insert(address, {{row.at("lon").get<double>(), row.at("lat").get<double>()},
                             row.at("radius").get<double>()});
    } catch (const json::exception& e) {
      throw ConfigError("address entry " + std::to_string(i) + ": " + e.what());
    } catch (const Error& e) {
      throw ConfigError("address entry " + std::to_string(i) + ": " + e.what());
    } catch (const std::invalid_argument& e) {
      throw ConfigError("address entry " + std::to_string(i) + ": " + e.what());
    }
  }
  return table;
}

AddressTable load_address_table(const std::filesystem::path& path) {
  return AddressTable::from_json(read_json_file(path, "address table"));
}

std::optional<std::string> process_env(const char* name) {
  const char* v = std::getenv(name);
  if (v == nullptr) return std::nullopt;
  return std::string(v);
}

ServerConfig load_server_config(const std::filesystem::path& path, const EnvLookup& env) {
  const json root = read_json_file(path, "config file");
  if (!root.is_object()) throw ConfigError("config file must hold a JSON object");
  const std::filesystem::path base = path.parent_path();

  ServerConfig cfg;
  cfg.listen_host = get_or<std::string>(root, "listen_host", cfg.listen_host);
  cfg.listen_port = get_or<int>(root, "listen_port", cfg.listen_port);
  cfg.store_path = resolve(base, get_or<std::string>(root, "store_path", ""));
  cfg.address_table_path = resolve(base, get_or<std::string>(root, "address_table", ""));
  cfg.service.strict_addresses = get_or<bool>(root, "strict_addresses", false);

  if (const auto it = root.find("keys"); it != root.end()) {
    if (!it->is_array()) throw ConfigError("'keys' must be an array");
    for (const json& k : *it) {
      try {
        const auto key = k.at("key").get<std::string>();
        const auto tier_name = k.at("tier").get<std::string>();
        const auto tier = tier_from_string(tier_name);
        if (!tier) throw ConfigError("unknown clearance tier '" + tier_name + "'");
        if (key.empty()) throw ConfigError("empty API key");
        if (!cfg.keys.emplace(key, ApiKeyEntry{k.at("client").get<std::string>(), *tier}).second) {
          throw ConfigError("API key listed twice");
        }
      } catch (const json::exception& e) {
        throw ConfigError(std::string("bad key entry: ") + e.what());
      }
    }
  }

  if (const auto it = root.find("store"); it != root.end()) {
    cfg.store.reach_k = get_or<double>(*it, "reach_k", cfg.store.reach_k);
    cfg.store.separation_radius = get_or<double>(*it, "separation_radius", cfg.store.separation_radius);
    cfg.store.max_ttl = get_or<double>(*it, "max_ttl", cfg.store.max_ttl);
  }
  if (!(cfg.store.reach_k > 0.0) || !(cfg.store.separation_radius > 0.0) ||
      !(cfg.store.max_ttl > 0.0)) {
    throw ConfigError("store parameters must be positive");
  }

  PlannerConfig& planner = cfg.service.planner;
  if (const auto it = root.find("planner"); it != root.end()) {
    planner.cell_size = get_or<double>(*it, "cell_size", planner.cell_size);
    planner.lambda = get_or<double>(*it, "lambda", planner.lambda);
    planner.block_energy = get_or<double>(*it, "block_energy", planner.block_energy);
    planner.connectivity = get_or<int>(*it, "connectivity", planner.connectivity);
    planner.max_nodes = get_or<std::size_t>(*it, "max_nodes", planner.max_nodes);
  }
  try {
    planner.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("planner: ") + e.what());
  }

  if (const auto it = root.find("defaults"); it != root.end()) {
    cfg.service.default_ttl = get_or<double>(*it, "ttl", cfg.service.default_ttl);
    cfg.service.sample_cap = get_or<std::size_t>(*it, "sample_cap", cfg.service.sample_cap);
  }
  if (!(cfg.service.default_ttl > 0.0) || cfg.service.default_ttl > cfg.store.max_ttl) {
    throw ConfigError("default ttl must be in (0, max_ttl]");
  }

  if (auto v = env("FIELDSPACE_LISTEN_HOST")) cfg.listen_host = *v;
  if (auto v = env("FIELDSPACE_LISTEN_PORT")) {
    cfg.listen_port = parse_port("FIELDSPACE_LISTEN_PORT", *v);
  }
  if (auto v = env("FIELDSPACE_STORE_PATH")) cfg.store_path = *v;
  if (auto v = env("FIELDSPACE_ADDRESS_TABLE")) cfg.address_table_path = *v;
  if (auto v = env("FIELDSPACE_STRICT_ADDRESSES")) {
    cfg.service.strict_addresses = parse_bool("FIELDSPACE_STRICT_ADDRESSES", *v);
  }
  if (cfg.listen_port < 0 || cfg.listen_port > 65535) throw ConfigError("listen_port out of range");
  return cfg;
}

}  // namespace fieldspace
