// SPDX-License-Identifier: Apache-2.0
#include "taskspace/verify.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <functional>

#include "taskspace/embedding.hpp"
#include "taskspace/errors.hpp"
#include "taskspace/extractors.hpp"
#include "taskspace/families.hpp"
#include "taskspace/file_util.hpp"
#include "taskspace/metrics.hpp"
#include "taskspace/pipeline.hpp"
#include "taskspace/rng.hpp"
#include "taskspace/surrogate.hpp"

namespace taskspace {

namespace {

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3g", v);
  return buf;
}

SurrogateConfig small_config(Rng& rng) {
  SurrogateConfig c;
  c.heads = 1 + rng.below(2);
  c.width = c.heads * (2 + rng.below(3));
  c.layers = 1 + rng.below(2);
  c.ff = 2 + rng.below(6);
  c.vocab = 8 + rng.below(6);
  c.max_len = 3 + rng.below(5);
  c.classes = 2 + rng.below(3);
  c.seq_out = 1 + rng.below(3);
  return c;
}

Example small_example(Rng& rng, LabelKind kind, const SurrogateConfig& c) {
  TokenSeq t(1 + rng.below(c.max_len));
  for (auto& x : t) x = static_cast<Token>(kFirstContentToken + rng.below(c.vocab - kFirstContentToken));
  switch (kind) {
    case LabelKind::Class: return {t, ClassLabel{static_cast<std::uint32_t>(rng.below(c.classes))}};
    case LabelKind::Distribution: {
      std::vector<double> q(c.classes);
      double z = 0.0;
      for (auto& v : q) z += (v = 0.05 + rng.uniform());
      for (auto& v : q) v /= z;
      return {t, DistributionLabel{q}};
    }
    case LabelKind::Scalar: return {t, ScalarLabel{rng.normal()}};
    case LabelKind::Tokens: {
      TokenSeq out(c.seq_out);
      for (auto& y : out) y = static_cast<Token>(kFirstContentToken + rng.below(c.vocab - kFirstContentToken));
      return {t, TokenSeqLabel{out}};
    }
  }
  return {t, ClassLabel{0}};
}

constexpr LabelKind kKinds[] = {LabelKind::Class, LabelKind::Distribution, LabelKind::Scalar, LabelKind::Tokens};

CheckResult gradients() {
  Rng rng(101);
  double worst = 0.0;
  for (int i = 0; i < 6; ++i) {
    const SurrogateConfig c = small_config(rng);
    const auto ck = init_surrogate(c, 200 + i);
    for (LabelKind kind : kKinds) {
      const auto fn = log_prob_objective(c, small_example(rng, kind, c));
      const auto analytic = ad::value_and_grad(fn, ck.params).grad.flatten();
      // Richardson combination of two central differences.
      const auto d1 = ad::finite_diff_grad(fn, ck.params, 1e-5).flatten();
      const auto d2 = ad::finite_diff_grad(fn, ck.params, 2e-5).flatten();
      std::vector<double> numeric(d1.size());
      for (std::size_t k = 0; k < d1.size(); ++k) numeric[k] = (4.0 * d1[k] - d2[k]) / 3.0;
      worst = std::max(worst, ad::max_relative_error(analytic, numeric));
    }
  }
  return {"gradient vs finite differences", worst <= 1e-6, "max relative error " + num(worst), 0.0};
}

CheckResult fisher() {
  Rng rng(102);
  double worst = 0.0;
  for (int s = 0; s < 4; ++s) {
    const SurrogateConfig c = small_config(rng);
    const auto ck = init_surrogate(c, 300 + s);
    LabeledSet data;
    for (int i = 0; i < 5; ++i) data.push_back(small_example(rng, kKinds[s], c));
    const auto diag = fisher_diagonal(ck, data);
    std::vector<double> naive(diag.size(), 0.0);
    for (const auto& ex : data) {
      const auto g = ad::value_and_grad(log_prob_objective(c, ex), ck.params).grad.flatten();
      for (std::size_t j = 0; j < g.size(); ++j) naive[j] += g[j] * g[j] / static_cast<double>(data.size());
    }
    for (std::size_t j = 0; j < diag.size(); ++j) worst = std::max(worst, std::abs(diag[j] - naive[j]));
  }
  return {"fisher diagonal vs per-example loop", worst <= 1e-10, "max deviation " + num(worst), 0.0};
}

CheckResult prefix_freeze() {
  Rng rng(103);
  const SurrogateConfig c = small_config(rng);
  const auto ck = init_surrogate(c, 7);
  const auto before = ck.params.flatten();
  LabeledSet data;
  for (int i = 0; i < 4; ++i) data.push_back(small_example(rng, LabelKind::Class, c));
  (void)fine_tune_prefix(ck, data, 2, {2, 2, 1e-2, 0});
  const auto after = ck.params.flatten();
  const bool frozen = std::memcmp(before.data(), after.data(), before.size() * sizeof(double)) == 0;
  const PrefixParams empty(c.layers, 0, c.width);
  bool equal = true;
  for (LabelKind kind : kKinds) {
    const Example ex = small_example(rng, kind, c);
    const double a = log_prob(ck, &empty, ex), b = log_prob(ck, nullptr, ex);
    equal = equal && std::memcmp(&a, &b, sizeof(double)) == 0;
  }
  return {"prefix freeze and empty prefix", frozen && equal,
          std::string(frozen ? "backbone unchanged" : "BACKBONE CHANGED") + ", p=0 " + (equal ? "bit-equal" : "DIFFERS"),
          0.0};
}

CheckResult store_determinism(const std::filesystem::path& scratch) {
  SurrogateConfig c;
  c.width = 8;
  c.ff = 16;
  c.layers = 1;
  const auto ck = init_surrogate(c, 9);
  TaskFamily f;
  f.id = "sentiment-lexicon";
  f.n_train = 12;
  f.n_test = 0;
  f.classes = c.classes;
  const LabeledSet data = gen_family(f).train;
  std::vector<std::string> bytes;
  for (const char* name : {"a", "b"}) {
    const auto root = scratch / name;
    std::filesystem::remove_all(root);
    EmbeddingStore store(root);
    InvocationLedger ledger;
    Pipeline pipe(store, ck, ledger);
    const ExtractorConfig cfg{{1, 4, 1e-3, 0}, 2, 0.1};
    (void)pipe.compute_dte(data, "d", Method::TaskEmb, cfg);
    (void)pipe.compute_dte(data, "d", Method::TuPaTE, cfg);
    std::string all;
    for (const auto& id : store.ids()) all += read_text(store.emb_dir() / (id + ".f32"));
    bytes.push_back(all);
  }
  bool guarded = false;
  try {
    EmbeddingStore store(scratch / "a");
    InvocationLedger ledger;
    Pipeline other(store, init_surrogate(c, 10), ledger);
  } catch (const IncompatibleSpaceError&) {
    guarded = true;
  }
  const bool same = !bytes[0].empty() && bytes[0] == bytes[1];
  std::filesystem::remove_all(scratch / "a");
  std::filesystem::remove_all(scratch / "b");
  return {"store determinism and fingerprint guard", same && guarded,
          std::string(same ? "embedding files bit-identical" : "EMBEDDING FILES DIFFER") + ", foreign surrogate " +
              (guarded ? "rejected" : "ACCEPTED"),
          0.0};
}

CheckResult ndcg_value() {
  const double hand = (1.0 + 2.0 / std::log2(3.0) + 3.0 / 2.0) / (3.0 + 2.0 / std::log2(3.0) + 1.0 / 2.0);
  const double got = ndcg({"c", "b", "a"}, {{"a", 3}, {"b", 2}, {"c", 1}}).value;
  return {"ndcg hand value", std::abs(got - hand) <= 1e-12, "ndcg " + num(got), 0.0};
}

}  // namespace

std::vector<CheckResult> run_invariant_suite(const std::filesystem::path& scratch) {
  std::filesystem::create_directories(scratch);
  const std::vector<std::pair<std::string, std::function<CheckResult()>>> checks = {
      {"gradient vs finite differences", gradients},
      {"fisher diagonal vs per-example loop", fisher},
      {"prefix freeze and empty prefix", prefix_freeze},
      {"store determinism and fingerprint guard", [&] { return store_determinism(scratch); }},
      {"ndcg hand value", ndcg_value}};
  std::vector<CheckResult> out;
  for (const auto& [name, check] : checks) {
    const auto t0 = std::chrono::steady_clock::now();
    CheckResult r;
    try {
      r = check();
    } catch (const std::exception& e) {
      r = {name, false, std::string("error: ") + e.what(), 0.0};
    }
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace taskspace
