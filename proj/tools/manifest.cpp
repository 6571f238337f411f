#include "manifest.hpp"

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <ctime>

#include "ctxscale/io.hpp"

namespace ctxscale::cli {

std::string utc_timestamp() {
  std::time_t t = std::time(nullptr);
  if (const char* env = std::getenv("SOURCE_DATE_EPOCH"); env && *env) t = static_cast<std::time_t>(std::atoll(env));
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

RunManifest::RunManifest(std::string command, std::filesystem::path out_dir)
    : command_(std::move(command)), out_dir_(std::move(out_dir)), timestamp_(utc_timestamp()) {}

void RunManifest::add_config_bytes(std::string_view bytes) {
  config_bytes_.append(bytes);
  has_config_ = true;
}

void RunManifest::add_seed(std::uint64_t seed) {
  if (std::find(seeds_.begin(), seeds_.end(), seed) == seeds_.end()) seeds_.push_back(seed);
}

void RunManifest::write(const std::string& name, std::string_view contents) {
  io::write_file_atomic(out_dir_ / name, contents);
  record(name);
}

void RunManifest::record(const std::string& name) {
  if (std::find(artifacts_.begin(), artifacts_.end(), name) == artifacts_.end()) artifacts_.push_back(name);
}

void RunManifest::finish() {
  Json artifacts = Json::array();
  for (const auto& name : artifacts_) {
    Json a{{"path", name}};
    if (std::filesystem::is_regular_file(out_dir_ / name)) a["fnv1a"] = io::fnv1a_hex(io::read_file(out_dir_ / name));
    artifacts.push_back(std::move(a));
  }
  Json j{{"command", command_},
         {"config_hash", has_config_ ? Json(io::fnv1a_hex(config_bytes_)) : Json(nullptr)},
         {"seeds", seeds_},
         {"artifacts", std::move(artifacts)},
         {"tool_version", kToolVersion},
         {"timestamp", timestamp_}};
  for (auto& [k, v] : extra_.items()) j[k] = v;
  io::write_file_atomic(out_dir_ / "manifest.json", dump_json(j));
}

}  // namespace ctxscale::cli
