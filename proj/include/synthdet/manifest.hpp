#pragma once

#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "synthdet/image.hpp"

namespace synthdet {

std::string sha256_hex(const void* data, std::size_t size);
std::string sha256_hex(const std::string& bytes);
std::string sha256_hex_file(const std::string& path);

std::string iso8601_utc_now();

// Everything needed to re-run a command: resolved config, seeds, backend
// identities, and a digest for every artifact the run produced.
struct RunManifest {
  std::string command;
  nlohmann::json config = nlohmann::json::object();
  nlohmann::json seeds = nlohmann::json::object();
  nlohmann::json backends = nlohmann::json::object();
  std::vector<std::pair<std::string, std::string>> artifacts;  // path, sha256
  std::string started_at;
  std::string finished_at;

  // Digests the file now; path is stored relative to the run directory when
  // it lives inside one.
  void add_artifact(const std::string& path, const std::string& display_path);
  nlohmann::json to_json() const;
  void write(const std::string& path);  // stamps finished_at
};

// ---------------------------------------------------------------------------
// Dataset ingestion
// ---------------------------------------------------------------------------

// Bilinear, aspect ratio deliberately NOT preserved: a square target
// stretches non-square sources.
struct ResizePolicy {
  int target_resolution = 0;  // 0 keeps native size
};

struct DatasetEntry {
  std::string filename;
  std::string split = "test";
};

struct DatasetManifest {
  std::string dataset_id;
  std::string root;
  std::vector<DatasetEntry> entries;  // lexicographic by filename
  std::vector<std::pair<std::string, std::string>> errors;  // filename, why
  ResizePolicy policy;

  nlohmann::json to_json() const;
};

// Scans root for PNG files, orders them lexicographically by filename, and
// records unreadable ones under errors while ingestion continues. A
// directory with no readable image is a validation error.
DatasetManifest ingest_dataset(const std::string& root,
                               const ResizePolicy& policy,
                               const std::string& dataset_id = "");

// Loads every manifest entry, applying the manifest's resize policy.
std::vector<Image> load_dataset_images(const DatasetManifest& manifest);

// ---------------------------------------------------------------------------
// Run-directory lock
// ---------------------------------------------------------------------------

// Exclusive marker so concurrent commands cannot share an output directory.
// Creates the directory if needed; throws IoError when already locked.
class RunLock {
 public:
  explicit RunLock(const std::string& run_dir);
  RunLock(const RunLock&) = delete;
  RunLock& operator=(const RunLock&) = delete;
  ~RunLock();

 private:
  std::string lock_path_;
};

}  // namespace synthdet
