// SPDX-License-Identifier: Apache-2.0
// taskspace: command-line front end for the task-embedding pipeline.
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "taskspace/benchmarks.hpp"
#include "taskspace/dataset_io.hpp"
#include "taskspace/errors.hpp"
#include "taskspace/file_util.hpp"
#include "taskspace/hash.hpp"
#include "taskspace/pipeline.hpp"
#include "taskspace/projection.hpp"
#include "taskspace/run_config.hpp"
#include "taskspace/verify.hpp"

using namespace taskspace;
using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

enum Exit : int { kOk = 0, kFailure = 1, kConfig = 2, kNumeric = 3, kTransport = 4, kIncompatible = 5 };

struct Flags {
  std::string config;
  std::string store;
  std::string runs;
  std::optional<std::uint64_t> seed;
  std::string method;
  std::optional<std::size_t> jobs;
  std::string oracle_cmd;
  std::string oracle_url;
  std::string prompt_file;
  // command arguments
  std::string pool;
  std::string data;
  std::string name;
  std::string target;
  std::vector<std::string> candidates;
  std::vector<std::string> ids;
  std::size_t dims = 2;
};

void log(const std::string& line) { std::cerr << "taskspace: " << line << "\n"; }

RunConfig resolve(const Flags& f) {
  RunOverrides o;
  if (!f.store.empty()) o.store = f.store;
  o.seed = f.seed;
  if (!f.method.empty()) o.method = f.method;
  o.jobs = f.jobs;
  const std::optional<fs::path> file = f.config.empty() ? std::nullopt : std::optional<fs::path>(f.config);
  return resolve_run_config(file, o, std::getenv(kStoreEnvVar));
}

fs::path runs_root(const RunConfig& cfg) {
  if (!cfg.runs.empty()) return cfg.runs;
  if (!cfg.store.empty()) return fs::path(cfg.store) / "runs";
  return "taskspace-runs";
}

/// Creates `<runs>/<command>-<hash>` and writes the resolved config there.
fs::path open_run_dir(const std::string& command, const json& resolved, const RunConfig& cfg) {
  std::string slug = command;
  for (auto& ch : slug)
    if (ch == ' ') ch = '-';
  const fs::path dir = runs_root(cfg) / (slug + "-" + sha256_hex(resolved.dump()).substr(0, 16));
  fs::create_directories(dir);
  write_text_atomic(dir / "config.json", resolved.dump(2) + "\n");
  return dir;
}

json resolved_with_args(const std::string& command, const RunConfig& cfg, const json& args) {
  return {{"command", command}, {"args", args}, {"config", cfg.to_json()}};
}

EmbeddingStore open_store(const RunConfig& cfg) {
  if (cfg.store.empty())
    throw ConfigError(std::string("no store: pass --store or set ") + kStoreEnvVar);
  return EmbeddingStore(cfg.store);
}

std::vector<std::string> split_command(const std::string& cmd) {
  std::vector<std::string> out;
  std::string cur;
  bool in_token = false;
  char quote = 0;
  for (char ch : cmd) {
    if (quote) {
      if (ch == quote) quote = 0;
      else cur += ch;
    } else if (ch == '\'' || ch == '"') {
      quote = ch;
      in_token = true;
    } else if (ch == ' ' || ch == '\t') {
      if (in_token) out.push_back(cur);
      cur.clear();
      in_token = false;
    } else {
      cur += ch;
      in_token = true;
    }
  }
  if (quote) throw ConfigError("unterminated quote in --oracle-cmd");
  if (in_token) out.push_back(cur);
  if (out.empty()) throw ConfigError("--oracle-cmd is empty");
  return out;
}

OraclePtr connect_oracle(const Flags& f) {
  if (!f.oracle_cmd.empty() && !f.oracle_url.empty()) throw ConfigError("give only one of --oracle-cmd and --oracle-url");
  if (!f.oracle_cmd.empty()) return launch_process_oracle(split_command(f.oracle_cmd));
  if (!f.oracle_url.empty()) return connect_http_oracle(f.oracle_url);
  throw ConfigError("this command needs --oracle-cmd or --oracle-url");
}

UnsupervisedPool select_pool(const EmbeddingStore& store, const std::string& id) {
  if (!id.empty()) {
    if (!fs::exists(store.pool_path(id))) throw ConfigError("store has no pool '" + id + "'");
    return store.load_pool(id);
  }
  std::vector<std::string> found;
  if (fs::exists(store.root() / "pool"))
    for (const auto& e : fs::directory_iterator(store.root() / "pool"))
      if (e.path().extension() == ".jsonl") found.push_back(e.path().stem().string());
  if (found.size() != 1)
    throw ConfigError("store holds " + std::to_string(found.size()) + " pools; choose one with --pool");
  return store.load_pool(found.front());
}

/// Store id, or a source id matching exactly one stored embedding.
std::pair<std::string, TaskEmbedding> find_embedding(const EmbeddingStore& store, const std::string& key) {
  if (auto e = store.get(key)) return {key, *e};
  std::vector<std::pair<std::string, TaskEmbedding>> hits;
  for (const auto& id : store.ids())
    if (auto e = store.get(id); e && e->source_id == key) hits.emplace_back(id, *e);
  if (hits.size() != 1)
    throw ConfigError("'" + key + "' matches " + std::to_string(hits.size()) + " stored embeddings; use a store id");
  return hits.front();
}

std::string ranking_tsv(const std::vector<RankedCandidate>& ranked) {
  std::ostringstream os;
  os << "rank\tid\tsimilarity\n";
  for (std::size_t i = 0; i < ranked.size(); ++i) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.9g", ranked[i].similarity);
    os << (i + 1) << "\t" << ranked[i].id << "\t" << buf << "\n";
  }
  return os.str();
}

json embedding_summary(const std::string& id, const TaskEmbedding& e) {
  return {{"id", id},
          {"kind", to_string(e.kind)},
          {"method", to_string(e.method)},
          {"source", e.source_id},
          {"dimension", e.dimension()},
          {"fingerprint", e.fingerprint},
          {"pool", e.pool_id}};
}

// --- commands ----------------------------------------------------------------------

int cmd_pool_build(const Flags& f) {
  const RunConfig cfg = resolve(f);
  EmbeddingStore store = open_store(cfg);
  const auto pool = build_pool_from_spec(cfg.pool, cfg.surrogate.config, cfg.seed);
  const fs::path run = open_run_dir("pool build", resolved_with_args("pool build", cfg, json::object()), cfg);
  store.save_pool(pool);
  std::map<std::string, std::size_t> per_source;
  for (const auto& p : pool.provenance) ++per_source[p];
  write_text_atomic(run / "pool.json", json{{"id", pool.id}, {"size", pool.size()}, {"sources", per_source}}.dump(2) + "\n");
  std::cout << pool.id << "\n";
  log("pool " + pool.id + " with " + std::to_string(pool.size()) + " texts");
  return kOk;
}

int cmd_pretrain(const Flags& f) {
  const RunConfig cfg = resolve(f);
  EmbeddingStore store = open_store(cfg);
  const fs::path run = open_run_dir("pretrain", resolved_with_args("pretrain", cfg, {{"pool", f.pool}}), cfg);
  UnsupervisedPool pool;
  if (!f.pool.empty()) {
    pool = select_pool(store, f.pool);
  } else {
    pool = build_pool_from_spec(cfg.pool, cfg.surrogate.config, cfg.seed);
    store.save_pool(pool);
  }
  const SurrogateCheckpoint ckpt = prepare_surrogate(cfg.surrogate, pool);
  const auto existing = store.surrogate_fingerprint();
  if (existing && *existing != ckpt.fingerprint && !store.ids().empty())
    throw IncompatibleSpaceError("store already holds embeddings of surrogate " + existing->substr(0, 12) +
                                 "; use a new store");
  store.register_surrogate(ckpt);
  const double loss = masked_token_loss(ckpt, pool.texts, 0.15, cfg.seed);
  write_text_atomic(run / "surrogate.json", json{{"fingerprint", ckpt.fingerprint},
                                                 {"config", ckpt.config.to_json()},
                                                 {"parameters", ckpt.params.numel()},
                                                 {"pool", pool.id},
                                                 {"masked_token_loss", loss}}
                                                    .dump(2) + "\n");
  std::cout << ckpt.fingerprint << "\n";
  log("surrogate " + ckpt.fingerprint.substr(0, 12) + " registered, masked-token loss " + std::to_string(loss));
  return kOk;
}

int cmd_dte(const Flags& f) {
  if (f.data.empty()) throw ConfigError("dte needs --data");
  const RunConfig cfg = resolve(f);
  EmbeddingStore store = open_store(cfg);
  const std::string name = f.name.empty() ? fs::path(f.data).stem().string() : f.name;
  const LabeledSet data = read_labeled_jsonl(f.data);
  const fs::path run =
      open_run_dir("dte", resolved_with_args("dte", cfg, {{"data", f.data}, {"name", name}}), cfg);
  InvocationLedger ledger;
  Pipeline pipe(store, store.load_surrogate(), ledger);
  ledger.set_shape(0, 1);
  const auto e = pipe.compute_dte(data, name, cfg.extraction.method, cfg.extraction.dte);
  const std::string id =
      cache_key(e.method, EmbeddingKind::DTE, e.fingerprint, name, "", cfg.extraction.dte);
  write_text_atomic(run / "embedding.json", embedding_summary(id, e).dump(2) + "\n");
  ledger.write(run / "ledger.json");
  std::cout << id << "\n";
  return kOk;
}

std::vector<std::pair<std::string, TaskEmbedding>> compute_mtes(Pipeline& pipe, OraclePtr oracle,
                                                                 const UnsupervisedPool& pool,
                                                                 const std::vector<PromptSpec>& prompts,
                                                                 const RunConfig& cfg) {
  std::vector<OraclePtr> models;
  if (prompts.empty()) models.push_back(oracle);
  for (const auto& p : prompts) models.push_back(as_prompted_model(oracle, p, pipe.surrogate().config.max_len));
  std::vector<std::pair<std::string, TaskEmbedding>> out(models.size());
  run_jobs(models.size(), cfg.jobs, [&](std::size_t i) {
    const auto e = pipe.compute_mte(*models[i], pool, cfg.extraction.method, cfg.extraction.mte);
    out[i] = {cache_key(e.method, EmbeddingKind::MTE, e.fingerprint, e.source_id, pool.id, cfg.extraction.mte), e};
  });
  return out;
}

int cmd_mte(const Flags& f) {
  const RunConfig cfg = resolve(f);
  EmbeddingStore store = open_store(cfg);
  const auto prompts = f.prompt_file.empty() ? std::vector<PromptSpec>{} : read_prompts(f.prompt_file);
  const UnsupervisedPool pool = select_pool(store, f.pool);
  const fs::path run = open_run_dir(
      "mte",
      resolved_with_args("mte", cfg,
                         {{"pool", pool.id}, {"oracle_cmd", f.oracle_cmd}, {"oracle_url", f.oracle_url},
                          {"prompt_file", f.prompt_file}}),
      cfg);
  InvocationLedger ledger;
  Pipeline pipe(store, store.load_surrogate(), ledger);
  const auto oracle = connect_oracle(f);
  const auto made = compute_mtes(pipe, oracle, pool, prompts, cfg);
  ledger.set_shape(made.size(), 0);
  json list = json::array();
  for (const auto& [id, e] : made) {
    list.push_back(embedding_summary(id, e));
    std::cout << id << "\t" << e.source_id << "\n";
  }
  write_text_atomic(run / "embeddings.json", list.dump(2) + "\n");
  ledger.write(run / "ledger.json");
  return kOk;
}

int cmd_rank(const Flags& f) {
  if (f.target.empty()) throw ConfigError("rank needs --target");
  const RunConfig cfg = resolve(f);
  EmbeddingStore store = open_store(cfg);
  const auto [target_id, target] = find_embedding(store, f.target);
  std::vector<TaskEmbedding> cands;
  if (!f.candidates.empty()) {
    for (const auto& c : f.candidates) cands.push_back(find_embedding(store, c).second);
  } else {
    for (const auto& id : store.ids())
      if (auto e = store.get(id); e && e->kind != target.kind && e->method == target.method &&
                                  e->fingerprint == target.fingerprint)
        cands.push_back(*e);
  }
  if (cands.empty()) throw ConfigError("no candidates to rank against " + target_id);
  const fs::path run = open_run_dir(
      "rank", resolved_with_args("rank", cfg, {{"target", target_id}, {"candidates", f.candidates}}), cfg);
  const auto ranked = rank_candidates(target, cands);
  const std::string tsv = ranking_tsv(ranked);
  write_text_atomic(run / "ranking.tsv", tsv);
  std::cout << tsv;
  return kOk;
}

int cmd_select_prompt(const Flags& f) {
  if (f.data.empty()) throw ConfigError("select-prompt needs --data");
  if (f.prompt_file.empty()) throw ConfigError("select-prompt needs --prompt-file");
  const RunConfig cfg = resolve(f);
  EmbeddingStore store = open_store(cfg);
  const auto prompts = read_prompts(f.prompt_file);
  const LabeledSet data = read_labeled_jsonl(f.data);
  const std::string name = f.name.empty() ? fs::path(f.data).stem().string() : f.name;
  const UnsupervisedPool pool = select_pool(store, f.pool);
  const fs::path run = open_run_dir(
      "select-prompt",
      resolved_with_args("select-prompt", cfg,
                         {{"data", f.data}, {"name", name}, {"pool", pool.id}, {"oracle_cmd", f.oracle_cmd},
                          {"oracle_url", f.oracle_url}, {"prompt_file", f.prompt_file}}),
      cfg);
  InvocationLedger ledger;
  Pipeline pipe(store, store.load_surrogate(), ledger);
  ledger.set_shape(prompts.size(), 1);
  const auto oracle = connect_oracle(f);
  const auto dte = pipe.compute_dte(data, name, cfg.extraction.method, cfg.extraction.dte);
  const auto mtes = compute_mtes(pipe, oracle, pool, prompts, cfg);
  std::vector<TaskEmbedding> cands;
  for (const auto& [_, e] : mtes) {
    cands.push_back(e);
    ledger.record_grid_evaluation();
  }
  const auto ranked = rank_candidates(dte, cands);
  std::string best = ranked.front().id;
  for (const auto& p : prompts)
    if (best == oracle->id() + "#" + p.id) best = p.id;
  write_text_atomic(run / "ranking.tsv", ranking_tsv(ranked));
  write_text_atomic(run / "selection.json",
                    json{{"dataset", name}, {"prompt", best}, {"model", ranked.front().id},
                         {"similarity", ranked.front().similarity}}
                            .dump(2) + "\n");
  ledger.write(run / "ledger.json");
  std::cout << best << "\n";
  return kOk;
}

/// Experiment object with the command-line overrides applied.
json experiment_json(const RunConfig& cfg, const Flags& f) {
  json e = cfg.experiment;
  if (f.seed) e["seed"] = *f.seed;
  if (f.jobs) e["jobs"] = *f.jobs;
  if (!f.method.empty()) {
    if (!e.contains("extraction") || !e["extraction"].is_object()) e["extraction"] = json::object();
    e["extraction"]["method"] = f.method;
  }
  return e;
}

void print_report(const RankingReport& r, const fs::path& run) {
  std::printf("%s %s seed %llu: rho %.3f (random %.3f), ndcg %.3f (random %.3f), rate %.3f (random %.3f)\n",
              r.experiment.c_str(), r.method.c_str(), static_cast<unsigned long long>(r.seed), r.mean_rho,
              r.random_rho, r.mean_ndcg, r.random_ndcg, r.mean_rate, r.random_rate);
  std::printf("extractor calls %llu for k_p %zu + k_D %zu; report in %s\n",
              static_cast<unsigned long long>(r.ledger.extractor_calls), r.ledger.k_p, r.ledger.k_d, run.c_str());
}

int cmd_bench_transfer(const Flags& f) {
  const RunConfig cfg = resolve(f);
  const TransferBenchConfig bench = TransferBenchConfig::from_json(experiment_json(cfg, f));
  const fs::path run = runs_root(cfg) / run_dir_name("transfer", bench.to_json());
  const auto report = run_transfer_benchmark(bench, run);
  write_report(report, run);
  print_report(report, run);
  return kOk;
}

int cmd_bench_prompt(const Flags& f) {
  const RunConfig cfg = resolve(f);
  const PromptBenchConfig bench = PromptBenchConfig::from_json(experiment_json(cfg, f));
  const fs::path run = runs_root(cfg) / run_dir_name("prompt", bench.to_json());
  const auto report = run_prompt_benchmark(bench, run);
  write_report(report, run);
  print_report(report, run);
  return kOk;
}

int cmd_project(const Flags& f) {
  const RunConfig cfg = resolve(f);
  EmbeddingStore store = open_store(cfg);
  std::vector<std::pair<std::string, TaskEmbedding>> picked;
  if (!f.ids.empty()) {
    for (const auto& id : f.ids) picked.push_back(find_embedding(store, id));
  } else {
    for (const auto& id : store.ids())
      if (auto e = store.get(id); e && e->method == cfg.extraction.method) picked.emplace_back(id, *e);
  }
  const fs::path run =
      open_run_dir("project", resolved_with_args("project", cfg, {{"ids", f.ids}, {"dims", f.dims}}), cfg);
  const Projection p = pca_project(picked, f.dims);
  write_text_atomic(run / "projection.tsv", p.to_tsv());
  write_text_atomic(run / "projection.json", json{{"requested", p.requested},
                                                  {"components", p.components},
                                                  {"rank_deficient", p.rank_deficient()},
                                                  {"variance", p.variance}}
                                                     .dump(2) + "\n");
  if (p.rank_deficient())
    log("only " + std::to_string(p.components) + " of " + std::to_string(p.requested) + " components available");
  std::cout << p.to_tsv();
  return kOk;
}

int cmd_verify(const Flags& f) {
  const RunConfig cfg = resolve(f);
  const fs::path run = open_run_dir(
      "verify", resolved_with_args("verify", cfg, {{"oracle_cmd", f.oracle_cmd}}), cfg);
  bool numeric_ok = true, protocol_ok = true;
  json out = json::array();
  for (const auto& r : run_invariant_suite(run / "scratch")) {
    numeric_ok = numeric_ok && r.passed;
    std::printf("%s %s: %s (%.1f s)\n", r.passed ? "PASS" : "FAIL", r.name.c_str(), r.detail.c_str(), r.seconds);
    out.push_back({{"name", r.name}, {"passed", r.passed}, {"detail", r.detail}});
  }
  fs::remove_all(run / "scratch");
  if (!f.oracle_cmd.empty()) {
    for (const auto& c : run_conformance(split_command(f.oracle_cmd))) {
      protocol_ok = protocol_ok && c.passed;
      std::printf("%s conformance %s: %s\n", c.passed ? "PASS" : "FAIL", c.name.c_str(), c.detail.c_str());
      out.push_back({{"name", "conformance " + c.name}, {"passed", c.passed}, {"detail", c.detail}});
    }
  }
  write_text_atomic(run / "verify.json", out.dump(2) + "\n");
  if (!numeric_ok) return kNumeric;
  return protocol_ok ? kOk : kTransport;
}

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e) || dynamic_cast<const ArgumentError*>(&e)) return kConfig;
  if (dynamic_cast<const NumericError*>(&e) || dynamic_cast<const DegenerateError*>(&e)) return kNumeric;
  if (dynamic_cast<const TransportError*>(&e) || dynamic_cast<const ProtocolError*>(&e)) return kTransport;
  if (dynamic_cast<const IncompatibleSpaceError*>(&e)) return kIncompatible;
  return kFailure;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"taskspace: task embeddings for model and prompt selection"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_help_flag();
  app.set_help_all_flag("-h,--help", "Print every command and flag, then exit");
  Flags f;
  app.add_option("--config", f.config, "run config (JSON)");
  app.add_option("--store", f.store, std::string("embedding store root (default: $") + kStoreEnvVar + ")");
  app.add_option("--runs", f.runs, "root for run directories (default: <store>/runs)");
  app.add_option("--seed", f.seed, "run seed");
  app.add_option("--method", f.method, "extraction method")->check(CLI::IsMember({"taskemb", "tupate"}));
  app.add_option("--jobs", f.jobs, "parallel jobs")->check(CLI::PositiveNumber);
  app.add_option("--oracle-cmd", f.oracle_cmd, "command line of a stdio oracle");
  app.add_option("--oracle-url", f.oracle_url, "base URL of an HTTP oracle");
  app.add_option("--prompt-file", f.prompt_file, "prompts (JSON array or JSONL)");

  int (*handler)(const Flags&) = nullptr;
  auto bind = [&](CLI::App* sub, int (*fn)(const Flags&)) { sub->callback([&handler, fn] { handler = fn; }); };

  auto* pretrain = app.add_subcommand("pretrain", "build the surrogate and register it in the store");
  pretrain->add_option("--pool", f.pool, "pretrain on a stored pool instead of the config pool spec");
  bind(pretrain, cmd_pretrain);

  auto* pool = app.add_subcommand("pool", "unsupervised pool operations");
  pool->require_subcommand(1);
  bind(pool->add_subcommand("build", "build the pool from the config and store it"), cmd_pool_build);

  auto* dte = app.add_subcommand("dte", "dataset task embedding");
  dte->add_option("--data", f.data, "labeled JSONL")->required();
  dte->add_option("--name", f.name, "dataset id (default: file stem)");
  bind(dte, cmd_dte);

  auto* mte = app.add_subcommand("mte", "model task embedding of an oracle, one per prompt with --prompt-file");
  mte->add_option("--pool", f.pool, "pool id (default: the store's only pool)");
  bind(mte, cmd_mte);

  auto* rank = app.add_subcommand("rank", "rank stored embeddings against a target");
  rank->add_option("--target", f.target, "store id or source id")->required();
  rank->add_option("--candidates", f.candidates, "store or source ids (default: all of the other kind)");
  bind(rank, cmd_rank);

  auto* select = app.add_subcommand("select-prompt", "pick the prompt whose MTE is closest to a dataset's DTE");
  select->add_option("--data", f.data, "labeled JSONL")->required();
  select->add_option("--name", f.name, "dataset id (default: file stem)");
  select->add_option("--pool", f.pool, "pool id (default: the store's only pool)");
  bind(select, cmd_select_prompt);

  auto* bench = app.add_subcommand("bench", "synthetic benchmarks");
  bench->require_subcommand(1);
  bind(bench->add_subcommand("transfer", "model selection for transfer"), cmd_bench_transfer);
  bind(bench->add_subcommand("prompt", "prompt selection"), cmd_bench_prompt);

  auto* project = app.add_subcommand("project", "PCA projection of stored embeddings to TSV");
  project->add_option("--ids", f.ids, "store or source ids (default: every embedding of --method)");
  project->add_option("--dims", f.dims, "components")->check(CLI::PositiveNumber);
  bind(project, cmd_project);

  bind(app.add_subcommand("verify", "invariant suite, plus protocol conformance with --oracle-cmd"), cmd_verify);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kConfig;
  }
  try {
    return handler(f);
  } catch (const std::exception& e) {
    std::cerr << "taskspace: error: " << e.what() << "\n";
    return exit_code_for(e);
  }
}
