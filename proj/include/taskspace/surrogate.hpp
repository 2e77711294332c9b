// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "taskspace/autodiff.hpp"
#include "taskspace/label.hpp"
#include "taskspace/pool.hpp"
#include "taskspace/tensor.hpp"

namespace taskspace {

struct SurrogateConfig {
  std::size_t vocab = 64;
  std::size_t width = 32;
  std::size_t layers = 2;
  std::size_t heads = 2;
  std::size_t ff = 64;
  std::size_t max_len = 32;
  std::size_t classes = 8;
  std::size_t seq_out = 8;

  /// Throws ArgumentError on zero extents, width not divisible by heads,
  /// or a vocabulary too small for the reserved ids.
  void validate() const;
  LabelLimits limits() const { return {classes, seq_out, vocab}; }
  /// Number of scalar parameters implied by the architecture.
  std::size_t parameter_count() const;

  nlohmann::json to_json() const;
  static SurrogateConfig from_json(const nlohmann::json& j);
  friend bool operator==(const SurrogateConfig&, const SurrogateConfig&) = default;
};

/// Immutable parameter state of the surrogate. Build through make_checkpoint
/// so that the fingerprint always matches the content.
struct SurrogateCheckpoint {
  SurrogateConfig config;
  ParamVector params;
  std::string fingerprint;
};

SurrogateCheckpoint make_checkpoint(SurrogateConfig config, ParamVector params);
std::string checkpoint_fingerprint(const SurrogateConfig& config, const ParamVector& params);

SurrogateCheckpoint init_surrogate(const SurrogateConfig& config, std::uint64_t seed);

/// Per-layer attention prefix matrices, each (length x width).
class PrefixParams {
 public:
  PrefixParams() = default;
  PrefixParams(std::size_t layers, std::size_t length, std::size_t width);
  /// Deterministic N(0, init_std^2) initialization.
  static PrefixParams random(std::size_t layers, std::size_t length, std::size_t width, double init_std,
                             std::uint64_t seed);
  static PrefixParams from_params(ParamVector params, std::size_t layers, std::size_t length);

  std::size_t layers() const { return layers_; }
  std::size_t length() const { return length_; }
  std::size_t width() const { return width_; }
  /// Canonical order: k0, v0, k1, v1, ...; empty when length is zero.
  const ParamVector& params() const { return params_; }
  const Tensor& keys(std::size_t layer) const { return params_[2 * layer]; }
  const Tensor& values(std::size_t layer) const { return params_[2 * layer + 1]; }

  friend bool operator==(const PrefixParams&, const PrefixParams&) = default;

 private:
  std::size_t layers_ = 0;
  std::size_t length_ = 0;
  std::size_t width_ = 0;
  ParamVector params_;
};

/// log P(label | tokens) under the surrogate, optionally with prefix attention.
double log_prob(const SurrogateCheckpoint& ckpt, const PrefixParams* prefix, const Example& example);

/// Tape-level building block shared by training, extraction and tests.
/// `params` and `prefix` hold leaves in canonical order; `prefix` may be empty.
ad::Var log_prob_on_tape(ad::Tape& tape, const SurrogateConfig& config, std::span<const ad::Var> params,
                         std::span<const ad::Var> prefix, const Example& example);

/// Objective whose leaves are all surrogate parameters.
ad::Objective log_prob_objective(const SurrogateConfig& config, const Example& example,
                                 const PrefixParams* prefix = nullptr);

/// Model output for `tokens` in the requested kind (argmax class, softmax
/// distribution, regression mean, argmax per output position).
Label predict_label(const SurrogateCheckpoint& ckpt, std::span<const Token> tokens, LabelKind kind,
                    const PrefixParams* prefix = nullptr);

struct TrainConfig {
  std::size_t epochs = 3;
  std::size_t batch = 16;
  double lr = 1e-3;
  std::uint64_t seed = 0;
};

SurrogateCheckpoint fine_tune_full(const SurrogateCheckpoint& ckpt, const LabeledSet& data, const TrainConfig& cfg);

/// Trains only the prefix; the backbone in `ckpt` is never modified.
PrefixParams fine_tune_prefix(const SurrogateCheckpoint& ckpt, const LabeledSet& data, std::size_t prefix_len,
                              const TrainConfig& cfg, double init_std = 0.1);
/// The initialization fine_tune_prefix starts from for a given seed.
PrefixParams initial_prefix(const SurrogateConfig& config, std::size_t prefix_len, std::uint64_t seed,
                            double init_std = 0.1);

struct PretrainConfig {
  std::size_t epochs = 1;
  std::size_t batch = 16;
  double lr = 1e-3;
  double mask_rate = 0.15;
  std::uint64_t seed = 0;
};

/// Masked-token pretraining over pool texts.
SurrogateCheckpoint pretrain_masked(const SurrogateCheckpoint& ckpt, const UnsupervisedPool& pool,
                                    const PretrainConfig& cfg);
/// Mean masked-token negative log-likelihood with a mask pattern fixed by `seed`.
double masked_token_loss(const SurrogateCheckpoint& ckpt, std::span<const TokenSeq> texts, double mask_rate,
                         std::uint64_t seed);

/// Binary checkpoint: "TSKV1", u32 JSON length, canonical config JSON,
/// u64 parameter count, little-endian f64 payload in canonical order.
void save_checkpoint(const SurrogateCheckpoint& ckpt, const std::filesystem::path& path);
SurrogateCheckpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace taskspace
