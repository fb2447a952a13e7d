#include <cstdio>
#include <fstream>
#include <sstream>

#include "fieldspace/errors.hpp"
#include "fieldspace/geo_store.hpp"

namespace fieldspace {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

constexpr const char* kFormatName = "fieldspace-snapshot";
constexpr int kFormatVersion = 1;

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << content;
  if (!out) throw IoError("cannot write " + path.string());
}

std::string document_filename(std::size_t n) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%06zu.rgeojson", n);
  return buf;
}

}  // namespace

void save_snapshot(const GeoStore& store, const fs::path& dir) {
  std::error_code ec;
  if (fs::exists(dir, ec) && !fs::is_empty(dir, ec) && !fs::exists(dir / kManifestName, ec)) {
    throw IoError("refusing to overwrite " + dir.string() + ": not a snapshot directory");
  }
  fs::path staging = dir;
  staging += ".saving";
  fs::remove_all(staging, ec);
  if (!fs::create_directories(staging, ec) && ec) {
    throw IoError("cannot create " + staging.string() + ": " + ec.message());
  }

  std::string manifest;
  ordered_json header = ordered_json::object();
  header["format"] = kFormatName;
  header["version"] = kFormatVersion;
  header["collections"] = store.collections();
  manifest += header.dump() + "\n";

  std::size_t n = 0;
  for (RestrictionDocument doc : store.documents()) {
    const std::string file = document_filename(++n);
    ordered_json record = ordered_json::object();
    record["id"] = doc.id;
    record["collection"] = doc.collection;
    record["file"] = file;
    if (!doc.active_windows.empty()) {
      ordered_json ws = ordered_json::array();
      for (const auto& w : doc.active_windows) ws.push_back(window_to_json(w));
      record["active_windows"] = std::move(ws);
    }
    manifest += record.dump() + "\n";

    doc.id.clear();
    doc.collection.clear();
    doc.active_windows.clear();
    write_file(staging / file, serialize_document(doc, 2) + "\n");
  }
  write_file(staging / kManifestName, manifest);

  fs::remove_all(dir, ec);
  if (ec) throw IoError("cannot replace " + dir.string() + ": " + ec.message());
  fs::rename(staging, dir, ec);
  if (ec) throw IoError("cannot move snapshot into " + dir.string() + ": " + ec.message());
}

GeoStore load_snapshot(const fs::path& dir, StoreConfig config) {
  const fs::path manifest_path = dir / kManifestName;
  const std::string manifest = read_file(manifest_path);
  GeoStore store(config);

  std::istringstream lines(manifest);
  std::string line;
  std::size_t line_no = 0;
  bool header_seen = false;
  while (std::getline(lines, line)) {
    ++line_no;
    if (line.empty()) continue;
    const std::string where = manifest_path.string() + ":" + std::to_string(line_no);
    json record;
    try {
      record = json::parse(line);
    } catch (const json::parse_error& e) {
      throw IoError(where + ": " + e.what());
    }
    if (!header_seen) {
      if (!record.is_object() || record.value("format", "") != kFormatName ||
          record.value("version", 0) != kFormatVersion) {
        throw IoError(where + ": not a " + std::string(kFormatName) + " v" +
                      std::to_string(kFormatVersion) + " manifest");
      }
      for (const auto& c : record.value("collections", json::array())) {
        store.register_collection(c.get<std::string>());
      }
      header_seen = true;
      continue;
    }
    if (!record.is_object() || !record.contains("id") || !record.contains("collection") ||
        !record.contains("file") || !record["file"].is_string()) {
      throw IoError(where + ": manifest record needs id, collection and file");
    }
    const fs::path file = dir / record["file"].get<std::string>();
    try {
      RestrictionDocument doc = parse_document(read_file(file));
      doc.id = record["id"].get<std::string>();
      doc.collection = record["collection"].get<std::string>();
      if (record.contains("active_windows")) {
        for (const json& w : record["active_windows"]) {
          doc.active_windows.push_back(window_from_json(w));
        }
      }
      store.insert(std::move(doc));
    } catch (const IoError&) {
      throw;
    } catch (const std::exception& e) {
      throw IoError(file.string() + ": " + e.what());
    }
  }
  if (!header_seen) throw IoError(manifest_path.string() + ": empty manifest");
  return store;
}

}  // namespace fieldspace
