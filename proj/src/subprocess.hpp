#pragma once

// Minimal helper for adapter subprocesses: run a shell command with stdout
// and stderr captured to files in a scratch directory, return the exit code
// and the tail of stderr for diagnostics.

#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include "synthdet/common.hpp"

namespace synthdet::detail {

struct CommandResult {
  int exit_code = -1;
  std::string stderr_tail;
};

struct ScratchDir {
  std::filesystem::path path;
  explicit ScratchDir(const std::string& prefix) {
    auto base = std::filesystem::temp_directory_path();
    for (int attempt = 0; attempt < 1000; ++attempt) {
      auto candidate = base / (prefix + std::to_string(::getpid()) + "-" +
                               std::to_string(attempt));
      std::error_code ec;
      if (std::filesystem::create_directory(candidate, ec)) {
        path = candidate;
        return;
      }
    }
    throw IoError("cannot create scratch directory under " + base.string());
  }
  ScratchDir(const ScratchDir&) = delete;
  ScratchDir& operator=(const ScratchDir&) = delete;
  ~ScratchDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
};

inline std::string read_tail(const std::filesystem::path& p,
                             std::size_t max_bytes = 2000) {
  std::ifstream in(p, std::ios::binary);
  if (!in) return {};
  in.seekg(0, std::ios::end);
  const auto size = static_cast<std::size_t>(in.tellg());
  const auto offset = size > max_bytes ? size - max_bytes : 0;
  in.seekg(static_cast<std::streamoff>(offset));
  std::string out(size - offset, '\0');
  in.read(out.data(), static_cast<std::streamsize>(out.size()));
  return out;
}

inline CommandResult run_command(const std::string& command_line,
                                 const std::filesystem::path& scratch_dir) {
  const auto out_log = scratch_dir / "stdout.log";
  const auto err_log = scratch_dir / "stderr.log";
  const std::string full = command_line + " >" + out_log.string() + " 2>" +
                           err_log.string();
  const int rc = std::system(full.c_str());
  CommandResult result;
  result.exit_code = rc != -1 && WIFEXITED(rc) ? WEXITSTATUS(rc) : rc;
  result.stderr_tail = read_tail(err_log);
  return result;
}

// Resolve an adapter command: absolute and multi-word commands pass through;
// bare names are looked up under $SYNTHDET_ADAPTER_PATH when set.
inline std::string resolve_adapter_command(const std::string& command) {
  if (command.find('/') != std::string::npos ||
      command.find(' ') != std::string::npos)
    return command;
  if (const char* dir = std::getenv("SYNTHDET_ADAPTER_PATH")) {
    const auto candidate = std::filesystem::path(dir) / command;
    if (std::filesystem::exists(candidate)) return candidate.string();
  }
  return command;
}

}  // namespace synthdet::detail
