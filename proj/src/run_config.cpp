// SPDX-License-Identifier: Apache-2.0
#include "taskspace/run_config.hpp"

#include <algorithm>

#include "taskspace/errors.hpp"
#include "taskspace/families.hpp"
#include "taskspace/file_util.hpp"
#include "taskspace/json_util.hpp"
#include "taskspace/rng.hpp"

namespace taskspace {

using json = nlohmann::json;

json PoolSpec::to_json() const {
  return {{"families", families}, {"files", files}, {"dedup_files", dedup_files}, {"cap", cap}};
}

PoolSpec PoolSpec::from_json(const json& j) {
  StrictObject o(j, "pool", {"families", "files", "dedup_files", "cap"});
  PoolSpec p;
  o.get("families", p.families);
  o.get("files", p.files);
  o.get("dedup_files", p.dedup_files);
  o.get("cap", p.cap);
  return p;
}

void RunConfig::validate() const {
  try {
    surrogate.config.validate();
  } catch (const ArgumentError& e) {
    throw ConfigError(std::string("surrogate.config: ") + e.what());
  }
  if (jobs == 0) throw ConfigError("jobs must be at least 1");
  if (pool.cap == 0) throw ConfigError("pool.cap must be at least 1");
  for (const auto& f : pool.families)
    if (std::find(family_ids().begin(), family_ids().end(), f) == family_ids().end())
      throw ConfigError("pool.families: unknown family '" + f + "'");
  for (const ExtractorConfig* e : {&extraction.dte, &extraction.mte}) {
    if (e->train.batch == 0) throw ConfigError("extraction batch must be at least 1");
    if (!(e->train.lr > 0.0)) throw ConfigError("extraction lr must be positive");
    if (extraction.method == Method::TuPaTE && e->prefix_len == 0)
      throw ConfigError("tupate extraction needs prefix_len >= 1");
  }
  if (!experiment.is_object()) throw ConfigError("experiment must be a JSON object");
}

json RunConfig::to_json() const {
  return {{"seed", seed},
          {"surrogate", taskspace::to_json(surrogate)},
          {"pool", pool.to_json()},
          {"extraction", taskspace::to_json(extraction)},
          {"experiment", experiment},
          {"store", store},
          {"runs", runs},
          {"jobs", jobs}};
}

RunConfig RunConfig::from_json(const json& j) {
  StrictObject o(j, "run config", {"seed", "surrogate", "pool", "extraction", "experiment", "store", "runs", "jobs"});
  RunConfig c;
  o.get("seed", c.seed);
  o.get("store", c.store);
  o.get("runs", c.runs);
  o.get("jobs", c.jobs);
  if (o.has("surrogate")) c.surrogate = surrogate_setup_from_json(o.at("surrogate"));
  if (o.has("pool")) c.pool = PoolSpec::from_json(o.at("pool"));
  if (o.has("extraction")) c.extraction = extraction_from_json(o.at("extraction"));
  if (o.has("experiment")) c.experiment = o.at("experiment");
  return c;
}

RunConfig resolve_run_config(const std::optional<std::filesystem::path>& config_file, const RunOverrides& flags,
                             const char* store_env) {
  json j = json::object();
  if (config_file) {
    try {
      j = json::parse(read_text(*config_file));
    } catch (const json::parse_error& e) {
      throw ConfigError(config_file->string() + ": " + e.what());
    }
    if (!j.is_object()) throw ConfigError(config_file->string() + ": config must be a JSON object");
  }
  if (!j.contains("store") && store_env && *store_env) j["store"] = store_env;
  if (flags.store) j["store"] = *flags.store;
  if (flags.seed) j["seed"] = *flags.seed;
  if (flags.jobs) j["jobs"] = *flags.jobs;
  if (flags.method) {
    if (!j.contains("extraction") || !j["extraction"].is_object()) j["extraction"] = json::object();
    j["extraction"]["method"] = *flags.method;
  }
  RunConfig c = RunConfig::from_json(j);
  c.validate();
  return c;
}

UnsupervisedPool build_pool_from_spec(const PoolSpec& spec, const SurrogateConfig& layout, std::uint64_t seed) {
  std::vector<PoolSource> sources;
  for (std::size_t k = 0; k < spec.families.size(); ++k) {
    TaskFamily f;
    f.id = spec.families[k];
    f.seed = Rng::mix(seed, 3000 + k);
    f.n_train = 2 * spec.cap;
    f.n_test = 0;
    f.classes = layout.classes;
    f.seq_out = layout.seq_out;
    f.vocab = layout.vocab;
    std::vector<TokenSeq> texts;
    for (const auto& ex : gen_family(f).train) texts.push_back(ex.tokens);
    sources.push_back({f.id, std::move(texts)});
  }
  for (const auto& file : spec.files) sources.push_back({file, read_texts_jsonl(file)});
  if (sources.empty()) throw ConfigError("pool spec names no families and no files");
  std::vector<TokenSeq> dedup;
  for (const auto& file : spec.dedup_files) {
    auto texts = read_texts_jsonl(file);
    dedup.insert(dedup.end(), texts.begin(), texts.end());
  }
  return build_pool(sources, spec.cap, dedup, Rng::mix(seed, 3100));
}

}  // namespace taskspace
