#pragma once

// Output directory bookkeeping shared by every subcommand.

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "ctxscale/serialize.hpp"

namespace ctxscale::cli {

inline constexpr const char* kToolVersion = "0.1.0";

/// UTC ISO-8601; honours SOURCE_DATE_EPOCH when set.
std::string utc_timestamp();

class RunManifest {
 public:
  RunManifest(std::string command, std::filesystem::path out_dir);

  const std::filesystem::path& out_dir() const { return out_dir_; }
  const std::string& timestamp() const { return timestamp_; }

  /// Hash of the exact bytes of an ingested config; several inputs are chained.
  void add_config_bytes(std::string_view bytes);
  void add_seed(std::uint64_t seed);
  /// Writes out_dir / name atomically and records it.
  void write(const std::string& name, std::string_view contents);
  /// Records a file produced by a library call.
  void record(const std::string& name);
  Json& extra() { return extra_; }

  /// Writes manifest.json listing every recorded artifact.
  void finish();

 private:
  std::string command_;
  std::filesystem::path out_dir_;
  std::string timestamp_;
  std::string config_bytes_;
  bool has_config_ = false;
  std::vector<std::uint64_t> seeds_;
  std::vector<std::string> artifacts_;
  Json extra_ = Json::object();
};

}  // namespace ctxscale::cli
