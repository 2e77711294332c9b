// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <filesystem>
#include <set>

#include "taskspace/benchmarks.hpp"
#include "taskspace/errors.hpp"
#include "taskspace/families.hpp"

using namespace taskspace;
namespace fs = std::filesystem;

namespace {

fs::path run_dir(const std::string& name) {
  auto d = fs::temp_directory_path() / ("taskspace_bench_" + name);
  fs::remove_all(d);
  return d;
}

SurrogateSetup tiny_surrogate() {
  SurrogateSetup s;
  s.config.width = 8;
  s.config.ff = 16;
  s.config.layers = 1;
  s.pretrain_epochs = 0;
  return s;
}

ExtractionSetup quick_extraction(Method m) {
  ExtractionSetup e = ExtractionSetup::defaults(m);
  e.dte.train.epochs = e.mte.train.epochs = 1;
  return e;
}

TransferBenchConfig tiny_transfer(Method m = Method::TaskEmb) {
  TransferBenchConfig c;
  c.families = {"majority-class", "sentiment-lexicon"};
  c.architectures = {"bag"};
  c.source_sizes = {30};
  c.target_train = 10;
  c.target_test = 30;
  c.zoo_epochs = 1;
  c.pool_cap = 10;
  c.surrogate = tiny_surrogate();
  c.extraction = quick_extraction(m);
  c.gain.source_stage.epochs = 1;
  c.gain.target_stage.epochs = 1;
  c.gain.seeds = {0};
  c.random_trials = 50;
  return c;
}

PromptBenchConfig tiny_prompt(Method m = Method::TaskEmb) {
  PromptBenchConfig c;
  c.llms = 1;
  c.prompts = 4;
  c.dataset_train = 20;
  c.dataset_test = 40;
  c.pool_cap = 10;
  c.surrogate = tiny_surrogate();
  c.extraction = quick_extraction(m);
  c.random_trials = 50;
  return c;
}

}  // namespace

TEST(TransferGain, ZeroSourceEpochsGiveZeroGain) {
  SurrogateConfig c;
  c.width = 8;
  c.ff = 16;
  c.layers = 1;
  TaskFamily f;
  f.id = "majority-class";
  f.n_train = 20;
  f.n_test = 20;
  const auto target = gen_family(f);
  f.id = "sentiment-lexicon";
  const auto source = gen_family(f).train;
  GainConfig g;
  g.source_stage.epochs = 0;
  g.target_stage.epochs = 1;
  g.seeds = {0, 1};
  EXPECT_EQ(measure_transfer_gain(init_surrogate(c, 1), source, target, g), 0.0);
}

TEST(TransferBenchmark, LedgerIsLinearAndReportsAreDeterministic) {
  const auto cfg = tiny_transfer();
  const auto a = run_transfer_benchmark(cfg, run_dir("t1"));
  const auto b = run_transfer_benchmark(cfg, run_dir("t2"));
  EXPECT_EQ(a.ledger.k_p, 2u);
  EXPECT_EQ(a.ledger.k_d, 2u);
  EXPECT_EQ(a.ledger.extractor_calls, a.ledger.k_p + a.ledger.k_d);
  EXPECT_EQ(a.ledger.grid_evaluations, a.ledger.k_p * a.ledger.k_d);
  EXPECT_EQ(a.to_tsv(), b.to_tsv());
  EXPECT_EQ(a.mean_rho, b.mean_rho);
  ASSERT_EQ(a.rows.size(), 2u);
  for (const auto& row : a.rows) {
    EXPECT_EQ(row.predicted.size(), 2u);
    EXPECT_GE(row.rho, 1.0);
    EXPECT_LE(row.rho, 2.0);
    EXPECT_GE(row.ndcg, 0.0);
    EXPECT_LE(row.ndcg, 1.0 + 1e-12);
  }
}

TEST(TransferBenchmark, WritesReportFiles) {
  const auto dir = run_dir("files");
  const auto r = run_transfer_benchmark(tiny_transfer(Method::TuPaTE), dir);
  write_report(r, dir);
  for (const char* f : {"report.json", "rows.tsv", "ledger.json", "config.json"}) EXPECT_TRUE(fs::exists(dir / f)) << f;
  EXPECT_EQ(r.method, "tupate");
}

TEST(TransferBenchmark, ConfigRoundTripAndStrictKeys) {
  const auto cfg = tiny_transfer();
  EXPECT_EQ(TransferBenchConfig::from_json(cfg.to_json()).to_json(), cfg.to_json());
  auto j = cfg.to_json();
  j["familes"] = j["families"];
  EXPECT_THROW(TransferBenchConfig::from_json(j), ConfigError);
  EXPECT_EQ(run_dir_name("transfer", cfg.to_json()), run_dir_name("transfer", cfg.to_json()));
  EXPECT_EQ(run_dir_name("transfer", cfg.to_json()).size(), std::string("transfer-").size() + 16);
}

TEST(PromptWorld, EachModelHasOneMatchedPromptPerDataset) {
  PromptBenchConfig c;
  const auto w = build_prompt_world(c);
  EXPECT_EQ(w.prompts.size(), c.prompts);
  ASSERT_EQ(w.llms.size(), c.llms);
  std::set<std::string> ids;
  for (const auto& p : w.prompts) ids.insert(p.id);
  EXPECT_EQ(ids.size(), w.prompts.size());
  for (const auto& per_llm : w.matched) {
    ASSERT_EQ(per_llm.size(), c.datasets.size());
    EXPECT_EQ(std::set<std::size_t>(per_llm.begin(), per_llm.end()).size(), per_llm.size());
    for (std::size_t idx : per_llm) EXPECT_LT(idx, c.prompts);
  }
}

TEST(PromptWorld, RejectsImpossibleSetups) {
  PromptBenchConfig c;
  c.prompts = 2;
  EXPECT_THROW(build_prompt_world(c), Error);
  c = PromptBenchConfig{};
  c.llm_labels = 1;
  EXPECT_THROW(build_prompt_world(c), Error);
}

TEST(PromptBenchmark, LedgerAndShape) {
  const auto cfg = tiny_prompt();
  const auto r = run_prompt_benchmark(cfg, run_dir("p1"));
  EXPECT_EQ(r.rows.size(), 3u);
  EXPECT_EQ(r.ledger.k_p, 4u);
  EXPECT_EQ(r.ledger.k_d, 3u);
  EXPECT_EQ(r.ledger.extractor_calls, 7u);
  EXPECT_EQ(r.ledger.grid_evaluations, 12u);
  for (const auto& row : r.rows) {
    EXPECT_EQ(row.predicted.size(), 4u);
    EXPECT_GE(row.rate, 0.0);
    EXPECT_LE(row.rate, 1.0 + 1e-12);
  }
  const auto again = run_prompt_benchmark(cfg, run_dir("p2"));
  EXPECT_EQ(r.to_tsv(), again.to_tsv());
}

TEST(PromptBenchmark, ConfigRoundTripAndDefaults) {
  const auto cfg = PromptBenchConfig::for_method(Method::TuPaTE);
  EXPECT_EQ(cfg.extraction.method, Method::TuPaTE);
  EXPECT_EQ(cfg.extraction.dte.train.epochs, 5u);
  EXPECT_EQ(PromptBenchConfig::from_json(cfg.to_json()).to_json(), cfg.to_json());
  // Unset extraction fields fall back to the prompt defaults of the named method.
  const auto j = nlohmann::json{{"extraction", {{"method", "tupate"}}}};
  EXPECT_EQ(PromptBenchConfig::from_json(j).to_json(), cfg.to_json());
  EXPECT_THROW(PromptBenchConfig::from_json({{"prompt", 3}}), ConfigError);
}
