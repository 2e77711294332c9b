// SPDX-License-Identifier: Apache-2.0
#include "taskspace/benchmarks.hpp"

#include <algorithm>
#include <array>
#include <cstdio>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include "taskspace/errors.hpp"
#include "taskspace/file_util.hpp"
#include "taskspace/hash.hpp"
#include "taskspace/json_util.hpp"
#include "taskspace/rng.hpp"

namespace taskspace {

using nlohmann::json;

// --- scoring and gains ---------------------------------------------------------

namespace {
bool tokens_match(const TokenSeq& pred, const TokenSeq& target) {
  for (std::size_t j = 0; j < target.size(); ++j)
    if (target[j] != kPadToken && (j >= pred.size() || pred[j] != target[j])) return false;
  return true;
}
}  // namespace

double task_score(const SurrogateCheckpoint& ckpt, const LabeledSet& test) {
  if (test.empty()) throw ArgumentError("cannot score on an empty test split");
  const LabelKind kind = test.kind();
  double total = 0.0;
  for (const auto& ex : test) {
    const Label pred = predict_label(ckpt, ex.tokens, kind);
    switch (kind) {
      case LabelKind::Class:
        total += std::get<ClassLabel>(pred).index == std::get<ClassLabel>(ex.label).index ? 1.0 : 0.0;
        break;
      case LabelKind::Scalar: {
        const double d = std::get<ScalarLabel>(pred).value - std::get<ScalarLabel>(ex.label).value;
        total -= d * d;
        break;
      }
      case LabelKind::Tokens:
        total += tokens_match(std::get<TokenSeqLabel>(pred).tokens, std::get<TokenSeqLabel>(ex.label).tokens) ? 1.0 : 0.0;
        break;
      case LabelKind::Distribution: {
        const auto& p = std::get<DistributionLabel>(pred).probs;
        const auto& q = std::get<DistributionLabel>(ex.label).probs;
        double tv = 0.0;
        for (std::size_t i = 0; i < q.size(); ++i) tv += std::abs(p[i] - q[i]);
        total += 1.0 - 0.5 * tv;
        break;
      }
    }
  }
  return total / static_cast<double>(test.size());
}

namespace {
TrainConfig seeded(TrainConfig t, std::uint64_t seed, std::uint64_t salt) {
  t.seed = Rng::mix(seed, salt);
  return t;
}
}  // namespace

double measure_transfer_gain(const SurrogateCheckpoint& base, const LabeledSet& source, const FamilySplit& target,
                             const GainConfig& cfg) {
  if (source.empty() || target.train.empty() || target.test.empty()) throw ArgumentError("transfer gain needs non-empty sets");
  if (cfg.seeds.empty()) throw ArgumentError("transfer gain needs at least one seed");
  double sum = 0.0;
  for (std::uint64_t s : cfg.seeds) {
    const auto src = fine_tune_full(base, source, seeded(cfg.source_stage, s, 1));
    const auto tgt_cfg = seeded(cfg.target_stage, s, 2);
    sum += task_score(fine_tune_full(src, target.train, tgt_cfg), target.test) -
           task_score(fine_tune_full(base, target.train, tgt_cfg), target.test);
  }
  return sum / static_cast<double>(cfg.seeds.size());
}

// --- config (de)serialization ----------------------------------------------------

ExtractionSetup ExtractionSetup::defaults(Method method) {
  ExtractionSetup e;
  e.method = method;
  if (method == Method::TuPaTE) e.dte.train.lr = e.mte.train.lr = 1e-2;
  return e;
}

ExtractionSetup ExtractionSetup::prompt_defaults(Method method) {
  ExtractionSetup e = defaults(method);
  e.dte.train.epochs = e.mte.train.epochs = 5;
  return e;
}

json to_json(const ExtractionSetup& e) {
  return {{"method", to_string(e.method)}, {"dte", e.dte.to_json()}, {"mte", e.mte.to_json()}};
}

ExtractionSetup extraction_from_json(const json& j, ExtractionSetup (*base)(Method)) {
  StrictObject o(j, "extraction", {"method", "dte", "mte"});
  Method method = Method::TaskEmb;
  if (o.has("method")) {
    std::string m;
    o.get("method", m);
    try {
      method = method_from_string(m);
    } catch (const ArgumentError& err) {
      throw ConfigError(err.what());
    }
  }
  ExtractionSetup e = base(method);
  if (o.has("dte")) e.dte = ExtractorConfig::from_json(o.at("dte"), e.dte);
  if (o.has("mte")) e.mte = ExtractorConfig::from_json(o.at("mte"), e.mte);
  return e;
}

json to_json(const SurrogateSetup& s) {
  return {{"config", s.config.to_json()},
          {"init_seed", s.init_seed},
          {"pretrain_epochs", s.pretrain_epochs},
          {"pretrain_lr", s.pretrain_lr}};
}

SurrogateSetup surrogate_setup_from_json(const json& j) {
  StrictObject o(j, "surrogate", {"config", "init_seed", "pretrain_epochs", "pretrain_lr"});
  SurrogateSetup s;
  if (o.has("config")) s.config = SurrogateConfig::from_json(o.at("config"));
  o.get("init_seed", s.init_seed);
  o.get("pretrain_epochs", s.pretrain_epochs);
  o.get("pretrain_lr", s.pretrain_lr);
  return s;
}

namespace {
json train_json(const TrainConfig& t) {
  return {{"epochs", t.epochs}, {"batch", t.batch}, {"lr", t.lr}};
}
TrainConfig train_from_json(const json& j, const std::string& ctx) {
  StrictObject o(j, ctx, {"epochs", "batch", "lr"});
  TrainConfig t;
  o.get("epochs", t.epochs);
  o.get("batch", t.batch);
  o.get("lr", t.lr);
  return t;
}
std::string relevance_name(RelevanceMapping m) { return m == RelevanceMapping::MinMax ? "minmax" : "shift"; }
RelevanceMapping relevance_from_name(const std::string& s) {
  if (s == "minmax") return RelevanceMapping::MinMax;
  if (s == "shift") return RelevanceMapping::Shift;
  throw ConfigError("relevance must be 'minmax' or 'shift', got '" + s + "'");
}
}  // namespace

TransferBenchConfig TransferBenchConfig::for_method(Method method) {
  TransferBenchConfig c;
  c.extraction = ExtractionSetup::defaults(method);
  return c;
}

json TransferBenchConfig::to_json() const {
  return {{"seed", seed},
          {"families", families},
          {"architectures", architectures},
          {"source_sizes", source_sizes},
          {"target_train", target_train},
          {"target_test", target_test},
          {"zoo_epochs", zoo_epochs},
          {"pool_cap", pool_cap},
          {"surrogate", taskspace::to_json(surrogate)},
          {"extraction", taskspace::to_json(extraction)},
          {"gain", {{"source_stage", train_json(gain.source_stage)},
                    {"target_stage", train_json(gain.target_stage)},
                    {"seeds", gain.seeds}}},
          {"relevance", relevance_name(relevance)},
          {"random_trials", random_trials}};
}

TransferBenchConfig TransferBenchConfig::from_json(const json& j) {
  StrictObject o(j, "transfer benchmark config",
                 {"seed", "families", "architectures", "source_sizes", "target_train", "target_test", "zoo_epochs",
                  "pool_cap", "surrogate", "extraction", "gain", "relevance", "random_trials", "jobs"});
  TransferBenchConfig c;
  o.get("seed", c.seed);
  o.get("families", c.families);
  o.get("architectures", c.architectures);
  o.get("source_sizes", c.source_sizes);
  o.get("target_train", c.target_train);
  o.get("target_test", c.target_test);
  o.get("zoo_epochs", c.zoo_epochs);
  o.get("pool_cap", c.pool_cap);
  o.get("random_trials", c.random_trials);
  o.get("jobs", c.jobs);
  if (o.has("surrogate")) c.surrogate = surrogate_setup_from_json(o.at("surrogate"));
  if (o.has("extraction")) c.extraction = extraction_from_json(o.at("extraction"));
  if (o.has("gain")) {
    StrictObject g(o.at("gain"), "gain", {"source_stage", "target_stage", "seeds"});
    if (g.has("source_stage")) c.gain.source_stage = train_from_json(g.at("source_stage"), "gain.source_stage");
    if (g.has("target_stage")) c.gain.target_stage = train_from_json(g.at("target_stage"), "gain.target_stage");
    g.get("seeds", c.gain.seeds);
  }
  if (o.has("relevance")) {
    std::string r;
    o.get("relevance", r);
    c.relevance = relevance_from_name(r);
  }
  return c;
}

json PromptBenchConfig::to_json() const {
  return {{"seed", seed},
          {"datasets", datasets},
          {"classes", classes},
          {"llm_labels", llm_labels},
          {"llms", llms},
          {"prompts", prompts},
          {"prompt_len", prompt_len},
          {"matched_accuracy", matched_accuracy},
          {"mismatched_accuracy", mismatched_accuracy},
          {"noise", noise},
          {"dataset_train", dataset_train},
          {"dataset_test", dataset_test},
          {"pool_cap", pool_cap},
          {"pool_families", pool_families},
          {"surrogate", taskspace::to_json(surrogate)},
          {"extraction", taskspace::to_json(extraction)},
          {"random_trials", random_trials}};
}

PromptBenchConfig PromptBenchConfig::from_json(const json& j) {
  StrictObject o(j, "prompt benchmark config",
                 {"seed", "datasets", "classes", "llm_labels", "llms", "prompts", "prompt_len", "matched_accuracy",
                  "mismatched_accuracy", "noise", "dataset_train", "dataset_test", "pool_cap", "pool_families",
                  "surrogate", "extraction", "random_trials", "jobs"});
  PromptBenchConfig c;
  o.get("seed", c.seed);
  o.get("datasets", c.datasets);
  o.get("classes", c.classes);
  o.get("llm_labels", c.llm_labels);
  o.get("llms", c.llms);
  o.get("prompts", c.prompts);
  o.get("prompt_len", c.prompt_len);
  o.get("matched_accuracy", c.matched_accuracy);
  o.get("mismatched_accuracy", c.mismatched_accuracy);
  o.get("noise", c.noise);
  o.get("dataset_train", c.dataset_train);
  o.get("dataset_test", c.dataset_test);
  o.get("pool_cap", c.pool_cap);
  o.get("pool_families", c.pool_families);
  o.get("random_trials", c.random_trials);
  o.get("jobs", c.jobs);
  if (o.has("surrogate")) c.surrogate = surrogate_setup_from_json(o.at("surrogate"));
  if (o.has("extraction")) c.extraction = extraction_from_json(o.at("extraction"), &ExtractionSetup::prompt_defaults);
  return c;
}

PromptBenchConfig PromptBenchConfig::for_method(Method method) {
  PromptBenchConfig c;
  c.extraction = ExtractionSetup::prompt_defaults(method);
  return c;
}

// --- zoo ---------------------------------------------------------------------------

const std::vector<std::string>& zoo_architectures() {
  static const std::vector<std::string> a = {"tx-small", "tx-wide", "bag"};
  return a;
}

OraclePtr train_zoo_model(const std::string& id, const std::string& arch, const SurrogateConfig& layout,
                          const LabeledSet& data, std::size_t epochs, std::uint64_t seed) {
  const LabelKind kind = data.kind();
  if (arch == "tx-small" || arch == "tx-wide") {
    SurrogateConfig c = layout;
    if (arch == "tx-wide") {
      c.width = 48;
      c.layers = 1;
      c.heads = 4;
      c.ff = 96;
    }
    auto tuned = fine_tune_full(init_surrogate(c, seed), data, {epochs, 16, 3e-3, Rng::mix(seed, 7)});
    return std::make_shared<CheckpointOracle>(id, std::move(tuned), kind);
  }
  if (arch == "bag") {
    BagOfTokensModel m(layout.vocab, layout.classes, layout.seq_out, seed);
    m.train(data, {epochs * 4, 16, 3e-2, Rng::mix(seed, 7)});
    return std::make_shared<BagOfTokensOracle>(id, std::move(m), kind);
  }
  throw ArgumentError("unknown zoo architecture '" + arch + "'");
}

// --- reports -----------------------------------------------------------------------

json RankingReport::to_json() const {
  json rows_j = json::array();
  for (const auto& r : rows) {
    json pred = json::array();
    for (const auto& c : r.predicted) pred.push_back({{"id", c.id}, {"similarity", c.similarity}});
    json row = {{"target", r.target},
                {"predicted", pred},
                {"truth", r.truth},
                {"relevance", r.relevance},
                {"true_best", r.true_best},
                {"rho", r.rho},
                {"ndcg", r.ndcg},
                {"ndcg_degenerate", r.ndcg_degenerate},
                {"selected", r.selected},
                {"selected_performance", r.selected_performance},
                {"rate", r.rate},
                {"random_rho", r.random_rho},
                {"random_ndcg", r.random_ndcg}};
    if (experiment == "transfer") {
      row["datasize_rho"] = r.datasize_rho;
      row["datasize_ndcg"] = r.datasize_ndcg;
    }
    rows_j.push_back(std::move(row));
  }
  json summary = {{"rho", mean_rho},           {"ndcg", mean_ndcg},          {"rate", mean_rate},
                  {"performance", mean_performance}, {"random_rho", random_rho}, {"random_ndcg", random_ndcg},
                  {"random_rate", random_rate}};
  if (experiment == "transfer") {
    summary["datasize_rho"] = datasize_rho;
    summary["datasize_ndcg"] = datasize_ndcg;
  }
  return {{"experiment", experiment},
          {"method", method},
          {"seed", seed},
          {"surrogate", surrogate_fingerprint},
          {"embedding_dimension", embedding_dimension},
          {"summary", summary},
          {"ledger", ledger.to_json()},
          {"rows", rows_j}};
}

std::string RankingReport::to_tsv() const {
  std::ostringstream os;
  os.precision(10);
  os << "target\tselected\ttrue_best\trho\tndcg\trate\tselected_performance\trandom_rho\trandom_ndcg\tpredicted\n";
  for (const auto& r : rows) {
    os << r.target << '\t' << r.selected << '\t' << r.true_best << '\t' << r.rho << '\t' << r.ndcg << '\t' << r.rate
       << '\t' << r.selected_performance << '\t' << r.random_rho << '\t' << r.random_ndcg << '\t';
    for (std::size_t i = 0; i < r.predicted.size(); ++i) os << (i ? "," : "") << r.predicted[i].id;
    os << '\n';
  }
  return os.str();
}


void write_report(const RankingReport& report, const std::filesystem::path& run_dir) {
  std::filesystem::create_directories(run_dir);
  write_text_atomic(run_dir / "config.json", report.config.dump(2) + "\n");
  write_text_atomic(run_dir / "ledger.json", report.ledger.to_json().dump(2) + "\n");
  write_text_atomic(run_dir / "rows.tsv", report.to_tsv());
  write_text_atomic(run_dir / "report.json", report.to_json().dump(2) + "\n");
}

std::string run_dir_name(const std::string& experiment, const json& config) {
  return experiment + "-" + sha256_hex(config.dump()).substr(0, 16);
}

// --- shared experiment plumbing ------------------------------------------------------

SurrogateCheckpoint prepare_surrogate(const SurrogateSetup& s, const UnsupervisedPool& pool) {
  auto ckpt = init_surrogate(s.config, s.init_seed);
  if (s.pretrain_epochs == 0) return ckpt;
  return pretrain_masked(ckpt, pool, {s.pretrain_epochs, 16, s.pretrain_lr, 0.15, Rng::mix(s.init_seed, 11)});
}

namespace {

std::vector<TokenSeq> inputs_of(const LabeledSet& s) {
  std::vector<TokenSeq> out;
  for (const auto& ex : s) out.push_back(ex.tokens);
  return out;
}

UnsupervisedPool experiment_pool(std::uint64_t seed, std::size_t cap, const std::vector<TokenSeq>& dedup,
                                 std::size_t classes, const std::vector<std::string>& families = family_ids()) {
  std::vector<PoolSource> sources;
  for (std::size_t k = 0; k < families.size(); ++k) {
    TaskFamily f;
    f.id = families[k];
    f.seed = Rng::mix(seed, 3000 + k);
    f.n_train = 2 * cap;
    f.n_test = 0;
    f.classes = classes;
    sources.push_back({f.id, inputs_of(gen_family(f).train)});
  }
  return build_pool(sources, cap, dedup, Rng::mix(seed, 3100));
}

std::filesystem::path fresh_store(const std::filesystem::path& run_dir) {
  const auto dir = run_dir / "store";
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

std::vector<std::string> ids_of(const std::vector<RankedCandidate>& r) {
  std::vector<std::string> out;
  for (const auto& c : r) out.push_back(c.id);
  return out;
}

std::string argmax_id(const std::map<std::string, double>& m) {
  auto best = m.begin();
  for (auto it = m.begin(); it != m.end(); ++it)
    if (it->second > best->second) best = it;
  return best->first;
}

void finish_means(RankingReport& rep) {
  const double n = static_cast<double>(rep.rows.size());
  for (const auto& r : rep.rows) {
    rep.mean_rho += r.rho / n;
    rep.mean_ndcg += r.ndcg / n;
    rep.mean_rate += r.rate / n;
    rep.mean_performance += r.selected_performance / n;
    rep.random_rho += r.random_rho / n;
    rep.random_ndcg += r.random_ndcg / n;
    rep.datasize_rho += r.datasize_rho / n;
    rep.datasize_ndcg += r.datasize_ndcg / n;
  }
}

}  // namespace

// --- transfer benchmark ---------------------------------------------------------------

RankingReport run_transfer_benchmark(const TransferBenchConfig& cfg, const std::filesystem::path& run_dir) {
  if (cfg.families.size() < 2) throw ArgumentError("transfer benchmark needs at least two families");
  if (cfg.architectures.empty() || cfg.source_sizes.empty()) throw ArgumentError("transfer benchmark needs a zoo");
  const auto& layout = cfg.surrogate.config;

  struct Candidate {
    std::string id, family, arch;
    TaskFamily spec;
    LabeledSet data;
  };
  std::vector<Candidate> cands;
  for (const auto& f : cfg.families)
    for (std::size_t a = 0; a < cfg.architectures.size(); ++a) {
      const std::size_t i = cands.size();
      TaskFamily spec;
      spec.id = f;
      spec.seed = Rng::mix(cfg.seed, 1000 + i);
      spec.n_train = cfg.source_sizes[a % cfg.source_sizes.size()];
      spec.n_test = 0;
      spec.noise_rate = std::array<double, 3>{0.0, 0.05, 0.1}[i % 3];
      spec.vocab_skew = std::array<double, 3>{0.0, 0.5, 1.0}[(i / 3) % 3];
      spec.classes = layout.classes;
      spec.seq_out = layout.seq_out;
      spec.vocab = layout.vocab;
      cands.push_back({f + "/" + cfg.architectures[a], f, cfg.architectures[a], spec, gen_family(spec).train});
    }
  if (cands.size() < 2) throw ArgumentError("transfer benchmark needs at least two zoo models");

  struct Target {
    std::string id;
    FamilySplit split;
  };
  std::vector<Target> targets;
  std::vector<TokenSeq> eval_inputs;
  for (std::size_t t = 0; t < cfg.families.size(); ++t) {
    TaskFamily spec;
    spec.id = cfg.families[t];
    spec.seed = Rng::mix(cfg.seed, 2000 + t);
    spec.n_train = cfg.target_train;
    spec.n_test = cfg.target_test;
    spec.classes = layout.classes;
    spec.seq_out = layout.seq_out;
    spec.vocab = layout.vocab;
    targets.push_back({"target/" + spec.id, gen_family(spec)});
    for (const auto* s : {&targets.back().split.train, &targets.back().split.test})
      for (const auto& ex : *s) eval_inputs.push_back(ex.tokens);
  }

  const UnsupervisedPool pool = experiment_pool(cfg.seed, cfg.pool_cap, eval_inputs, layout.classes);
  const SurrogateCheckpoint surrogate = prepare_surrogate(cfg.surrogate, pool);

  EmbeddingStore store(fresh_store(run_dir));
  store.save_pool(pool);
  InvocationLedger ledger;
  ledger.set_shape(cands.size(), targets.size());
  Pipeline pipe(store, surrogate, ledger);

  const Method method = cfg.extraction.method;
  std::vector<TaskEmbedding> mtes(cands.size());
  run_jobs(cands.size(), cfg.jobs, [&](std::size_t i) {
    auto oracle = train_zoo_model(cands[i].id, cands[i].arch, layout, cands[i].data, cfg.zoo_epochs, Rng::mix(cfg.seed, 5000 + i));
    mtes[i] = pipe.compute_mte(*oracle, pool, method, cfg.extraction.mte);
  });
  std::vector<TaskEmbedding> dtes(targets.size());
  run_jobs(targets.size(), cfg.jobs, [&](std::size_t t) {
    dtes[t] = pipe.compute_dte(targets[t].split.train, targets[t].id, method, cfg.extraction.dte);
  });

  // Ground truth: source stages are shared across targets, baselines across sources.
  const std::size_t ns = cfg.gain.seeds.size();
  if (ns == 0) throw ArgumentError("transfer benchmark needs at least one gain seed");
  std::vector<SurrogateCheckpoint> source_ckpts(cands.size() * ns);
  run_jobs(source_ckpts.size(), cfg.jobs, [&](std::size_t k) {
    source_ckpts[k] = fine_tune_full(surrogate, cands[k / ns].data, seeded(cfg.gain.source_stage, cfg.gain.seeds[k % ns], 1));
  });
  std::vector<double> baseline(targets.size() * ns);
  run_jobs(baseline.size(), cfg.jobs, [&](std::size_t k) {
    const auto& tg = targets[k / ns].split;
    baseline[k] = task_score(fine_tune_full(surrogate, tg.train, seeded(cfg.gain.target_stage, cfg.gain.seeds[k % ns], 2)), tg.test);
  });
  std::vector<double> gains(cands.size() * targets.size());
  run_jobs(gains.size(), cfg.jobs, [&](std::size_t cell) {
    const std::size_t i = cell / targets.size(), t = cell % targets.size();
    const auto& tg = targets[t].split;
    double sum = 0.0;
    for (std::size_t s = 0; s < ns; ++s) {
      const auto tuned = fine_tune_full(source_ckpts[i * ns + s], tg.train, seeded(cfg.gain.target_stage, cfg.gain.seeds[s], 2));
      sum += task_score(tuned, tg.test) - baseline[t * ns + s];
    }
    gains[cell] = sum / static_cast<double>(ns);
    ledger.record_grid_evaluation();
  });

  RankingReport rep;
  rep.experiment = "transfer";
  rep.method = std::string(to_string(method));
  rep.seed = cfg.seed;
  rep.config = cfg.to_json();
  rep.surrogate_fingerprint = surrogate.fingerprint;
  rep.embedding_dimension = dtes[0].dimension();

  std::vector<std::string> by_size;
  for (const auto& c : cands) by_size.push_back(c.id);
  std::map<std::string, std::size_t> size_of;
  for (const auto& c : cands) size_of[c.id] = c.data.size();
  std::stable_sort(by_size.begin(), by_size.end(), [&](const std::string& a, const std::string& b) {
    if (size_of[a] != size_of[b]) return size_of[a] > size_of[b];
    return a < b;
  });

  for (std::size_t t = 0; t < targets.size(); ++t) {
    TargetRow row;
    row.target = targets[t].id;
    row.predicted = rank_candidates(dtes[t], mtes);
    for (std::size_t i = 0; i < cands.size(); ++i) row.truth[cands[i].id] = gains[i * targets.size() + t];
    row.relevance = relevance_from_gains(row.truth, cfg.relevance);
    row.true_best = argmax_id(row.truth);
    const auto order = ids_of(row.predicted);
    row.rho = avg_rank(order, row.truth);
    const auto nd = ndcg(order, row.relevance);
    row.ndcg = nd.value;
    row.ndcg_degenerate = nd.degenerate;
    row.selected = order.front();
    row.selected_performance = row.truth.at(row.selected);
    row.rate = row.relevance.at(row.selected);
    const auto rb = random_ranking_baseline(row.truth, row.relevance, cfg.random_trials, Rng::mix(cfg.seed, 9000 + t));
    row.random_rho = rb.rho;
    row.random_ndcg = rb.ndcg;
    row.datasize_rho = avg_rank(by_size, row.truth);
    row.datasize_ndcg = ndcg(by_size, row.relevance).value;
    rep.rows.push_back(std::move(row));
  }
  finish_means(rep);
  // Expected rate of a random pick: mean relevance.
  for (const auto& r : rep.rows) {
    double m = 0.0;
    for (const auto& [_, v] : r.relevance) m += v;
    rep.random_rate += m / static_cast<double>(r.relevance.size()) / static_cast<double>(rep.rows.size());
  }
  rep.ledger = ledger.snapshot();
  ledger.write(store.root() / "ledger.json");
  write_report(rep, run_dir);
  return rep;
}

// --- prompt benchmark -------------------------------------------------------------------

PromptWorld build_prompt_world(const PromptBenchConfig& cfg) {
  const std::size_t nd = cfg.datasets.size();
  if (nd == 0) throw ArgumentError("prompt benchmark needs datasets");
  if (cfg.prompts < nd || cfg.prompts < 2) throw ArgumentError("prompt benchmark needs at least one prompt per dataset");
  if (cfg.prompt_len == 0) throw ArgumentError("prompt length must be positive");
  if (cfg.llm_labels < cfg.classes) throw ArgumentError("simulated models need at least as many labels as the datasets");
  for (const auto& d : cfg.datasets)
    if (family_kind(d) != LabelKind::Class) throw ArgumentError("prompt benchmark datasets must be classification families");

  PromptWorld w;
  Rng rng(Rng::mix(cfg.seed, 5000));
  std::set<TokenSeq> used;
  while (w.prompts.size() < cfg.prompts) {
    TokenSeq p(cfg.prompt_len);
    for (auto& t : p) t = static_cast<Token>(kFirstContentToken + rng.below(cfg.surrogate.config.vocab - kFirstContentToken));
    if (!used.insert(p).second) continue;
    char id[16];
    std::snprintf(id, sizeof(id), "p%02zu", w.prompts.size());
    w.prompts.push_back({id, std::move(p), ""});
  }

  std::map<std::string, SimulatedLLM::Behavior> behaviors;
  for (const auto& d : cfg.datasets) {
    const std::size_t classes = cfg.classes, seq_out = cfg.surrogate.config.seq_out;
    behaviors[d] = [d, classes, seq_out](std::span<const Token> in) {
      return std::get<ClassLabel>(family_rule(d, in, classes, seq_out)).index;
    };
  }
  for (std::size_t l = 0; l < cfg.llms; ++l) {
    std::vector<std::size_t> perm(cfg.prompts);
    std::iota(perm.begin(), perm.end(), 0);
    rng.shuffle(perm);
    std::vector<SimulatedLLM::Route> routes;
    std::vector<std::size_t> matched(nd);
    for (std::size_t k = 0; k < cfg.prompts; ++k) {
      const std::size_t p = perm[k];
      const bool is_matched = k < nd;
      const std::size_t task = is_matched ? k : (k - nd) % nd;
      if (is_matched) matched[task] = p;
      routes.push_back({w.prompts[p].tokens, cfg.datasets[task], is_matched ? cfg.matched_accuracy : cfg.mismatched_accuracy});
    }
    w.matched.push_back(matched);
    w.llms.push_back(std::make_shared<SimulatedLLM>("llm" + std::to_string(l), cfg.llm_labels, behaviors, routes,
                                                    cfg.datasets[0], 0.5, cfg.noise, Rng::mix(cfg.seed, 6000 + l)));
  }
  return w;
}

RankingReport run_prompt_benchmark(const PromptBenchConfig& cfg, const std::filesystem::path& run_dir) {
  const auto& layout = cfg.surrogate.config;
  if (cfg.llm_labels > layout.classes) throw ArgumentError("simulated model labels exceed the surrogate's class head");
  PromptWorld world = build_prompt_world(cfg);

  std::vector<FamilySplit> data;
  std::vector<TokenSeq> eval_inputs;
  for (std::size_t k = 0; k < cfg.datasets.size(); ++k) {
    TaskFamily f;
    f.id = cfg.datasets[k];
    f.seed = Rng::mix(cfg.seed, 4000 + k);
    f.n_train = cfg.dataset_train;
    f.n_test = cfg.dataset_test;
    f.classes = cfg.classes;
    f.seq_out = layout.seq_out;
    f.vocab = layout.vocab;
    data.push_back(gen_family(f));
    for (const auto* s : {&data.back().train, &data.back().test})
      for (const auto& ex : *s) eval_inputs.push_back(ex.tokens);
  }

  const UnsupervisedPool pool = experiment_pool(cfg.seed, cfg.pool_cap, eval_inputs, cfg.classes,
                                                cfg.pool_families.empty() ? cfg.datasets : cfg.pool_families);
  const SurrogateCheckpoint surrogate = prepare_surrogate(cfg.surrogate, pool);
  EmbeddingStore store(fresh_store(run_dir));
  store.save_pool(pool);
  InvocationLedger ledger;
  const std::size_t np = cfg.prompts, nl = cfg.llms, nd = cfg.datasets.size();
  ledger.set_shape(np * nl, nd);
  Pipeline pipe(store, surrogate, ledger);
  const Method method = cfg.extraction.method;

  std::vector<OraclePtr> models;
  for (std::size_t l = 0; l < nl; ++l)
    for (std::size_t p = 0; p < np; ++p) models.push_back(as_prompted_model(world.llms[l], world.prompts[p], layout.max_len));

  std::vector<TaskEmbedding> mtes(models.size());
  run_jobs(models.size(), cfg.jobs, [&](std::size_t i) { mtes[i] = pipe.compute_mte(*models[i], pool, method, cfg.extraction.mte); });
  std::vector<TaskEmbedding> dtes(nd);
  run_jobs(nd, cfg.jobs, [&](std::size_t d) { dtes[d] = pipe.compute_dte(data[d].train, "dataset/" + cfg.datasets[d], method, cfg.extraction.dte); });

  std::vector<double> acc(models.size() * nd);
  run_jobs(acc.size(), cfg.jobs, [&](std::size_t cell) {
    const std::size_t i = cell / nd, d = cell % nd;
    std::size_t ok = 0;
    for (const auto& ex : data[d].test)
      ok += std::get<ClassLabel>(models[i]->predict(ex.tokens)).index == std::get<ClassLabel>(ex.label).index;
    acc[cell] = static_cast<double>(ok) / static_cast<double>(data[d].test.size());
    ledger.record_grid_evaluation();
  });

  RankingReport rep;
  rep.experiment = "prompt";
  rep.method = std::string(to_string(method));
  rep.seed = cfg.seed;
  rep.config = cfg.to_json();
  rep.surrogate_fingerprint = surrogate.fingerprint;
  rep.embedding_dimension = dtes[0].dimension();
  for (std::size_t d = 0; d < nd; ++d)
    for (std::size_t l = 0; l < nl; ++l) {
      TargetRow row;
      row.target = cfg.datasets[d] + "@llm" + std::to_string(l);
      std::vector<TaskEmbedding> cands(mtes.begin() + static_cast<std::ptrdiff_t>(l * np),
                                       mtes.begin() + static_cast<std::ptrdiff_t>((l + 1) * np));
      row.predicted = rank_candidates(dtes[d], cands);
      std::vector<double> all;
      for (std::size_t p = 0; p < np; ++p) {
        const double a = acc[(l * np + p) * nd + d];
        row.truth[models[l * np + p]->id()] = a;
        all.push_back(a);
      }
      row.relevance = row.truth;
      row.true_best = argmax_id(row.truth);
      const auto order = ids_of(row.predicted);
      row.rho = avg_rank(order, row.truth);
      const auto nd_res = ndcg(order, row.relevance);
      row.ndcg = nd_res.value;
      row.ndcg_degenerate = nd_res.degenerate;
      row.selected = order.front();
      row.selected_performance = row.truth.at(row.selected);
      row.rate = performance_rate(row.selected_performance, all);
      const auto rb = random_ranking_baseline(row.truth, row.relevance, cfg.random_trials, Rng::mix(cfg.seed, 9100 + d * nl + l));
      row.random_rho = rb.rho;
      row.random_ndcg = rb.ndcg;
      const double mean_acc = std::accumulate(all.begin(), all.end(), 0.0) / static_cast<double>(all.size());
      rep.random_rate += mean_acc / *std::max_element(all.begin(), all.end());
      rep.rows.push_back(std::move(row));
    }
  rep.random_rate /= static_cast<double>(rep.rows.size());
  finish_means(rep);
  rep.ledger = ledger.snapshot();
  ledger.write(store.root() / "ledger.json");
  write_report(rep, run_dir);
  return rep;
}

// --- clustering probe -----------------------------------------------------------------------

std::vector<ProbeResult> run_clustering_probe(const ProbeConfig& cfg, const std::filesystem::path& run_dir) {
  if (cfg.families.size() < 2) throw ArgumentError("probe needs at least two families");
  const auto& layout = cfg.surrogate.config;
  auto family_spec = [&](const std::string& f, std::uint64_t seed) {
    TaskFamily spec;
    spec.id = f;
    spec.seed = seed;
    spec.n_train = cfg.train;
    spec.n_test = 0;
    spec.classes = layout.classes;
    spec.seq_out = layout.seq_out;
    spec.vocab = layout.vocab;
    return spec;
  };

  std::vector<LabeledSet> dte_data;
  std::vector<TokenSeq> eval_inputs;
  for (std::size_t fi = 0; fi < cfg.families.size(); ++fi) {
    dte_data.push_back(gen_family(family_spec(cfg.families[fi], Rng::mix(cfg.seed, 8000 + fi))).train);
    for (const auto& ex : dte_data.back()) eval_inputs.push_back(ex.tokens);
  }
  const UnsupervisedPool pool = experiment_pool(cfg.seed, cfg.pool_cap, eval_inputs, layout.classes);
  const SurrogateCheckpoint surrogate = prepare_surrogate(cfg.surrogate, pool);
  EmbeddingStore store(fresh_store(run_dir));
  InvocationLedger ledger;
  Pipeline pipe(store, surrogate, ledger);

  struct Member {
    std::string id;
    std::size_t family;
    OraclePtr oracle;
  };
  std::vector<Member> zoo;
  for (std::size_t fi = 0; fi < cfg.families.size(); ++fi)
    for (const auto& arch : cfg.architectures)
      for (std::size_t s = 0; s < cfg.seeds; ++s)
        zoo.push_back({cfg.families[fi] + "/" + arch + "/s" + std::to_string(s), fi, nullptr});
  run_jobs(zoo.size(), cfg.jobs, [&](std::size_t i) {
    const std::size_t fi = zoo[i].family;
    const std::string arch = zoo[i].id.substr(cfg.families[fi].size() + 1, zoo[i].id.rfind('/') - cfg.families[fi].size() - 1);
    const auto data = gen_family(family_spec(cfg.families[fi], Rng::mix(cfg.seed, 7000 + i))).train;
    zoo[i].oracle = train_zoo_model(zoo[i].id, arch, layout, data, cfg.zoo_epochs, Rng::mix(cfg.seed, 7500 + i));
  });

  std::vector<ProbeResult> results;
  json out = json::object();
  for (const auto& ex : cfg.extractions) {
    const Method m = ex.method;
    ProbeResult r;
    r.method = std::string(to_string(m));
    std::vector<TaskEmbedding> dtes(cfg.families.size());
    run_jobs(dtes.size(), cfg.jobs, [&](std::size_t fi) {
      dtes[fi] = pipe.compute_dte(dte_data[fi], "family/" + cfg.families[fi], m, ex.dte);
    });
    std::vector<TaskEmbedding> mtes(zoo.size());
    run_jobs(zoo.size(), cfg.jobs, [&](std::size_t i) { mtes[i] = pipe.compute_mte(*zoo[i].oracle, pool, m, ex.mte); });
    r.dimension = dtes[0].dimension();
    for (std::size_t i = 0; i < zoo.size(); ++i) {
      std::vector<double> cos(cfg.families.size());
      for (std::size_t fi = 0; fi < cfg.families.size(); ++fi) {
        cos[fi] = cosine_similarity(mtes[i], dtes[fi]);
        r.cosines[zoo[i].id][cfg.families[fi]] = cos[fi];
      }
      for (std::size_t fi = 0; fi < cfg.families.size(); ++fi) {
        if (fi == zoo[i].family) continue;
        ++r.pairs;
        r.satisfied += cos[zoo[i].family] > cos[fi];
      }
    }
    out[r.method] = {{"pairs", r.pairs}, {"satisfied", r.satisfied}, {"fraction", r.fraction()},
                     {"dimension", r.dimension}, {"cosines", r.cosines}};
    results.push_back(std::move(r));
  }
  write_text_atomic(run_dir / "probe.json", out.dump(2) + "\n");
  return results;
}

}  // namespace taskspace
