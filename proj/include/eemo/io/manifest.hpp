#pragma once

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>

#include <openssl/evp.h>

#include <nlohmann/json.hpp>

#include "eemo/error.hpp"
#include "eemo/io/table.hpp"

namespace eemo::io {

inline constexpr std::string_view kManifestSchema = "eemo.manifest/1";
inline constexpr std::string_view kToolVersion = "0.1.0";

inline std::string sha256_hex(std::string_view bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw Error(ErrorKind::kIo, "sha256 failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    out += kHex[digest[i] >> 4];
    out += kHex[digest[i] & 0xF];
  }
  return out;
}

inline std::string file_sha256(const std::string& path) { return sha256_hex(read_file(path)); }

// ISO-8601 UTC. SOURCE_DATE_EPOCH pins the clock for reproducible manifests.
inline std::string utc_timestamp() {
  std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  if (const char* fixed = std::getenv("SOURCE_DATE_EPOCH")) t = static_cast<std::time_t>(std::strtoll(fixed, nullptr, 10));
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

// Write to a sibling temp file, then rename over the target.
inline void write_file_atomic(const std::string& path, std::string_view content) {
  const std::filesystem::path target(path);
  if (target.has_parent_path()) std::filesystem::create_directories(target.parent_path());
  const auto tmp = target.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::kIo, "cannot write " + tmp);
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw Error(ErrorKind::kIo, "short write to " + tmp);
  }
  std::error_code ec;
  std::filesystem::rename(tmp, target, ec);
  if (ec) throw Error(ErrorKind::kIo, "cannot rename " + tmp + ": " + ec.message());
}

struct RunManifest {
  std::string command;
  std::string config_sha256;
  std::uint64_t seed = 0;
  std::map<std::string, std::string> inputs;   // path -> sha256
  std::map<std::string, std::string> outputs;  // path -> sha256
  std::string started;
  std::string finished;

  void add_input(const std::string& path) { inputs[path] = file_sha256(path); }
  void add_output(const std::string& path, std::string_view content) { outputs[path] = sha256_hex(content); }

  nlohmann::json to_json() const {
    return {{"schema", kManifestSchema}, {"command", command}, {"tool_version", kToolVersion},
            {"config_sha256", config_sha256}, {"seed", seed},  {"inputs", inputs},
            {"outputs", outputs}, {"started", started}, {"finished", finished}};
  }
};

inline std::string manifest_path(const std::string& primary_output) { return primary_output + ".manifest.json"; }

}  // namespace eemo::io
