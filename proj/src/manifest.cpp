#include "synthdet/manifest.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <openssl/evp.h>

#include <algorithm>
#include <cctype>
#include <cerrno>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>

#include "synthdet/common.hpp"

namespace synthdet {

namespace fs = std::filesystem;

namespace {

std::string digest_to_hex(const unsigned char* digest, unsigned int len) {
  static const char* hex = "0123456789abcdef";
  std::string out;
  out.reserve(len * 2);
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[digest[i] >> 4];
    out += hex[digest[i] & 0xF];
  }
  return out;
}

struct EvpCtx {
  EVP_MD_CTX* ctx;
  EvpCtx() : ctx(EVP_MD_CTX_new()) {
    if (!ctx || EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) != 1)
      throw Error("cannot initialize SHA-256");
  }
  ~EvpCtx() { EVP_MD_CTX_free(ctx); }
};

}  // namespace

std::string sha256_hex(const void* data, std::size_t size) {
  EvpCtx c;
  if (EVP_DigestUpdate(c.ctx, data, size) != 1)
    throw Error("SHA-256 update failed");
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_DigestFinal_ex(c.ctx, digest, &len) != 1)
    throw Error("SHA-256 finalize failed");
  return digest_to_hex(digest, len);
}

std::string sha256_hex(const std::string& bytes) {
  return sha256_hex(bytes.data(), bytes.size());
}

std::string sha256_hex_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read file for digest: " + path);
  EvpCtx c;
  char buf[1 << 16];
  while (in) {
    in.read(buf, sizeof(buf));
    const auto got = in.gcount();
    if (got > 0 && EVP_DigestUpdate(c.ctx, buf, static_cast<std::size_t>(got)) != 1)
      throw Error("SHA-256 update failed");
  }
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_DigestFinal_ex(c.ctx, digest, &len) != 1)
    throw Error("SHA-256 finalize failed");
  return digest_to_hex(digest, len);
}

std::string iso8601_utc_now() {
  const std::time_t now = std::time(nullptr);
  std::tm tm_utc{};
  gmtime_r(&now, &tm_utc);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
  return buf;
}

void RunManifest::add_artifact(const std::string& path,
                               const std::string& display_path) {
  artifacts.emplace_back(display_path, sha256_hex_file(path));
}

nlohmann::json RunManifest::to_json() const {
  nlohmann::json arts = nlohmann::json::array();
  for (const auto& [path, digest] : artifacts)
    arts.push_back({{"path", path}, {"sha256", digest}});
  return nlohmann::json{{"command", command},
                        {"config", config},
                        {"seeds", seeds},
                        {"backends", backends},
                        {"artifacts", std::move(arts)},
                        {"started_at", started_at},
                        {"finished_at", finished_at},
                        {"tool", std::string(kProjectName) + " " + kProjectVersion}};
}

void RunManifest::write(const std::string& path) {
  finished_at = iso8601_utc_now();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write manifest: " + path);
  out << to_json().dump(2) << '\n';
  if (!out) throw IoError("failed writing manifest: " + path);
}

// ---------------------------------------------------------------------------
// Dataset ingestion
// ---------------------------------------------------------------------------

nlohmann::json DatasetManifest::to_json() const {
  nlohmann::json files = nlohmann::json::array();
  for (const auto& e : entries)
    files.push_back({{"filename", e.filename}, {"split", e.split}});
  nlohmann::json errs = nlohmann::json::array();
  for (const auto& [name, why] : errors)
    errs.push_back({{"filename", name}, {"error", why}});
  return nlohmann::json{
      {"dataset_id", dataset_id},
      {"root", root},
      {"entries", std::move(files)},
      {"errors", std::move(errs)},
      {"resize_policy",
       {{"target_resolution", policy.target_resolution},
        {"interpolation", "bilinear"},
        {"preserve_aspect", false}}}};
}

namespace {

bool has_png_extension(const fs::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return ext == ".png";
}

}  // namespace

DatasetManifest ingest_dataset(const std::string& root,
                               const ResizePolicy& policy,
                               const std::string& dataset_id) {
  if (policy.target_resolution < 0)
    throw ValidationError("resize target_resolution must be >= 0");
  const fs::path root_path(root);
  if (!fs::is_directory(root_path))
    throw IoError("dataset root is not a directory: " + root);

  DatasetManifest manifest;
  manifest.root = root;
  manifest.dataset_id =
      dataset_id.empty() ? root_path.filename().string() : dataset_id;
  if (manifest.dataset_id.empty())
    manifest.dataset_id = root_path.parent_path().filename().string();
  manifest.policy = policy;

  std::vector<std::string> names;
  for (const auto& entry : fs::directory_iterator(root_path)) {
    if (!entry.is_regular_file() || !has_png_extension(entry.path())) continue;
    names.push_back(entry.path().filename().string());
  }
  std::sort(names.begin(), names.end());

  for (const auto& name : names) {
    try {
      (void)read_png((root_path / name).string());
      manifest.entries.push_back({name, "test"});
    } catch (const std::exception& e) {
      manifest.errors.emplace_back(name, e.what());
    }
  }
  if (manifest.entries.empty())
    throw ValidationError("dataset has no readable PNG image: " + root);
  return manifest;
}

std::vector<Image> load_dataset_images(const DatasetManifest& manifest) {
  const fs::path root_path(manifest.root);
  std::vector<Image> images;
  images.reserve(manifest.entries.size());
  for (const auto& entry : manifest.entries) {
    Image img = read_png((root_path / entry.filename).string());
    const int target = manifest.policy.target_resolution;
    if (target > 0 && (img.width() != target || img.height() != target))
      img = bilinear_resize(img, target, target);
    images.push_back(std::move(img));
  }
  return images;
}

// ---------------------------------------------------------------------------
// Run-directory lock
// ---------------------------------------------------------------------------

RunLock::RunLock(const std::string& run_dir) {
  std::error_code ec;
  fs::create_directories(run_dir, ec);
  if (ec) throw IoError("cannot create run directory " + run_dir + ": " + ec.message());

  lock_path_ = (fs::path(run_dir) / ".synthdet-lock").string();
  const int fd = ::open(lock_path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
  if (fd < 0) {
    if (errno == EEXIST)
      throw IoError("run directory is locked by another command: " + run_dir);
    throw IoError("cannot create lock file: " + lock_path_);
  }
  const std::string pid = std::to_string(::getpid()) + "\n";
  (void)!::write(fd, pid.data(), pid.size());
  ::close(fd);
}

RunLock::~RunLock() {
  std::error_code ec;
  fs::remove(lock_path_, ec);
}

}  // namespace synthdet
