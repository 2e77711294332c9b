// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "taskspace/families.hpp"
#include "taskspace/metrics.hpp"
#include "taskspace/pipeline.hpp"

namespace taskspace {

/// Score of a checkpoint on a test split in the split's natural metric:
/// accuracy (class), negative mean squared error (scalar), exact-match rate
/// (tokens), mean total-variation agreement 1 - TV (distribution).
double task_score(const SurrogateCheckpoint& ckpt, const LabeledSet& test);

struct GainConfig {
  TrainConfig source_stage{2, 16, 1e-3, 0};
  TrainConfig target_stage{8, 16, 1e-3, 0};
  std::vector<std::uint64_t> seeds{0, 1, 2};
};

/// Mean over seeds of score(source then target) - score(target only) on
/// target.test. Both arms share the base checkpoint and the target-stage seed.
double measure_transfer_gain(const SurrogateCheckpoint& base, const LabeledSet& source, const FamilySplit& target,
                             const GainConfig& cfg);

/// Surrogate shared by every embedding of an experiment.
struct SurrogateSetup {
  SurrogateConfig config;
  std::uint64_t init_seed = 1;
  std::size_t pretrain_epochs = 1;
  double pretrain_lr = 1e-3;
};

struct ExtractionSetup {
  Method method = Method::TaskEmb;
  ExtractorConfig dte{{3, 16, 1e-3, 0}, 4, 0.1};
  ExtractorConfig mte{{1, 16, 1e-3, 0}, 4, 0.1};

  /// Per-method defaults: prefix tuning uses lr 1e-2, full fine-tuning 1e-3.
  static ExtractionSetup defaults(Method method);
  /// Prompt selection: five epochs on both sides.
  static ExtractionSetup prompt_defaults(Method method);
};

/// init_surrogate, then masked pretraining on `pool` when pretrain_epochs > 0.
SurrogateCheckpoint prepare_surrogate(const SurrogateSetup& s, const UnsupervisedPool& pool);

nlohmann::json to_json(const ExtractionSetup& e);
/// Absent fields take `base(method)`.
ExtractionSetup extraction_from_json(const nlohmann::json& j,
                                     ExtractionSetup (*base)(Method) = &ExtractionSetup::defaults);
nlohmann::json to_json(const SurrogateSetup& s);
SurrogateSetup surrogate_setup_from_json(const nlohmann::json& j);

/// Zoo architectures: "tx-small" (surrogate layout), "tx-wide" (one wider
/// layer), "bag" (bag-of-tokens linear model).
const std::vector<std::string>& zoo_architectures();
OraclePtr train_zoo_model(const std::string& id, const std::string& arch, const SurrogateConfig& base_layout,
                          const LabeledSet& data, std::size_t epochs, std::uint64_t seed);

struct TransferBenchConfig {
  std::uint64_t seed = 0;
  std::vector<std::string> families{"majority-class", "sentiment-lexicon", "token-count-regression", "fill-mask-seq"};
  std::vector<std::string> architectures{"tx-small", "tx-wide", "bag"};
  std::vector<std::size_t> source_sizes{150, 300, 450};
  std::size_t target_train = 40;
  std::size_t target_test = 200;
  std::size_t zoo_epochs = 4;
  std::size_t pool_cap = 50;
  SurrogateSetup surrogate;
  ExtractionSetup extraction;
  GainConfig gain;
  RelevanceMapping relevance = RelevanceMapping::MinMax;
  std::size_t random_trials = 1000;
  std::size_t jobs = 1;

  static TransferBenchConfig for_method(Method method);
  nlohmann::json to_json() const;
  static TransferBenchConfig from_json(const nlohmann::json& j);
};

struct TargetRow {
  std::string target;
  std::vector<RankedCandidate> predicted;
  std::map<std::string, double> truth;      // gain (transfer) or measured accuracy (prompt)
  std::map<std::string, double> relevance;
  std::string true_best;
  double rho = 0.0;
  double ndcg = 0.0;
  bool ndcg_degenerate = false;
  std::string selected;
  double selected_performance = 0.0;
  double rate = 0.0;
  double random_rho = 0.0;
  double random_ndcg = 0.0;
  double datasize_rho = 0.0;
  double datasize_ndcg = 0.0;
};

struct RankingReport {
  std::string experiment;  // "transfer" | "prompt"
  std::string method;
  std::uint64_t seed = 0;
  std::vector<TargetRow> rows;
  double mean_rho = 0.0;
  double mean_ndcg = 0.0;
  double mean_rate = 0.0;
  double mean_performance = 0.0;
  double random_rho = 0.0;
  double random_ndcg = 0.0;
  double random_rate = 0.0;
  double datasize_rho = 0.0;
  double datasize_ndcg = 0.0;
  LedgerSnapshot ledger;
  std::string surrogate_fingerprint;
  std::size_t embedding_dimension = 0;
  nlohmann::json config;

  nlohmann::json to_json() const;
  std::string to_tsv() const;
};

/// report.json, rows.tsv, ledger.json and config.json under `run_dir`.
void write_report(const RankingReport& report, const std::filesystem::path& run_dir);

/// "<experiment>-<first 16 hex of sha256(config)>"
std::string run_dir_name(const std::string& experiment, const nlohmann::json& config);

/// Runs one experiment seed. The embedding store lives under
/// `run_dir/store` and is wiped first, so ledger counts are exact.
RankingReport run_transfer_benchmark(const TransferBenchConfig& cfg, const std::filesystem::path& run_dir);

struct PromptBenchConfig {
  std::uint64_t seed = 0;
  std::vector<std::string> datasets{"sentiment-lexicon", "majority-class", "parity"};
  std::size_t classes = 2;
  /// Label space of the simulated models; a wrong answer may fall outside the
  /// dataset's classes.
  std::size_t llm_labels = 8;
  std::size_t llms = 2;
  std::size_t prompts = 13;
  std::size_t prompt_len = 4;
  double matched_accuracy = 0.9;
  double mismatched_accuracy = 0.6;
  double noise = 0.05;
  std::size_t dataset_train = 200;
  std::size_t dataset_test = 300;
  std::size_t pool_cap = 100;
  /// Pool source families; empty means the datasets' own families.
  std::vector<std::string> pool_families;
  SurrogateSetup surrogate;
  ExtractionSetup extraction = ExtractionSetup::prompt_defaults(Method::TaskEmb);
  std::size_t random_trials = 1000;
  std::size_t jobs = 1;

  static PromptBenchConfig for_method(Method method);
  nlohmann::json to_json() const;
  static PromptBenchConfig from_json(const nlohmann::json& j);
};

/// A prompt set with its routing: for each LLM, one matched prompt per
/// dataset and decoys that perform a dataset's task at the mismatched accuracy.
struct PromptWorld {
  std::vector<PromptSpec> prompts;
  std::vector<std::shared_ptr<SimulatedLLM>> llms;
  /// matched[llm][dataset] = prompt index
  std::vector<std::vector<std::size_t>> matched;
};
PromptWorld build_prompt_world(const PromptBenchConfig& cfg);

RankingReport run_prompt_benchmark(const PromptBenchConfig& cfg, const std::filesystem::path& run_dir);

struct ProbeConfig {
  std::uint64_t seed = 0;
  std::vector<std::string> families{"majority-class", "sentiment-lexicon", "token-count-regression", "fill-mask-seq"};
  std::vector<std::string> architectures{"tx-small", "tx-wide", "bag"};
  std::size_t seeds = 3;
  std::size_t train = 300;
  std::size_t zoo_epochs = 4;
  std::size_t pool_cap = 50;
  SurrogateSetup surrogate;
  std::vector<ExtractionSetup> extractions{ExtractionSetup::defaults(Method::TaskEmb),
                                          ExtractionSetup::defaults(Method::TuPaTE)};
  std::size_t jobs = 1;
};

struct ProbeResult {
  std::string method;
  std::size_t pairs = 0;
  std::size_t satisfied = 0;
  double fraction() const { return pairs ? static_cast<double>(satisfied) / static_cast<double>(pairs) : 0.0; }
  /// oracle id -> family -> cosine
  std::map<std::string, std::map<std::string, double>> cosines;
  std::size_t dimension = 0;
};

/// For each zoo oracle, cos(MTE, DTE(own family)) vs cos(MTE, DTE(other family)).
/// One result per method; probe.json is written under `run_dir`.
std::vector<ProbeResult> run_clustering_probe(const ProbeConfig& cfg, const std::filesystem::path& run_dir);

}  // namespace taskspace
