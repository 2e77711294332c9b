// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "taskspace/benchmarks.hpp"
#include "taskspace/pool.hpp"

namespace taskspace {

/// Where unsupervised pool texts come from. Generated family inputs and
/// JSONL text files are sampled `cap` per source.
struct PoolSpec {
  std::vector<std::string> families;
  std::vector<std::string> files;
  std::vector<std::string> dedup_files;  // texts that must not enter the pool
  std::size_t cap = 50;

  nlohmann::json to_json() const;
  static PoolSpec from_json(const nlohmann::json& j);
};

struct RunConfig {
  std::uint64_t seed = 0;
  SurrogateSetup surrogate;
  PoolSpec pool;
  ExtractionSetup extraction;
  nlohmann::json experiment = nlohmann::json::object();
  std::string store;
  std::string runs;  // empty: <store>/runs
  std::size_t jobs = 1;

  /// ConfigError on anything that would fail later.
  void validate() const;
  nlohmann::json to_json() const;
  static RunConfig from_json(const nlohmann::json& j);
};

/// Command-line values that take precedence over the config file.
struct RunOverrides {
  std::optional<std::string> store;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> method;
  std::optional<std::size_t> jobs;
};

/// Config file (may be absent), then the store environment variable for an
/// unset store, then overrides. Validated before returning.
RunConfig resolve_run_config(const std::optional<std::filesystem::path>& config_file, const RunOverrides& flags,
                             const char* store_env);

inline constexpr const char* kStoreEnvVar = "TASKSPACE_STORE";

/// Pool per `spec`, sampled with `seed`. Family inputs are generated in the
/// surrogate's layout.
UnsupervisedPool build_pool_from_spec(const PoolSpec& spec, const SurrogateConfig& layout, std::uint64_t seed);

}  // namespace taskspace
