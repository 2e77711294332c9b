// SPDX-License-Identifier: Apache-2.0
#include "taskspace/surrogate.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>

#include "taskspace/adam.hpp"
#include "taskspace/errors.hpp"
#include "taskspace/hash.hpp"
#include "taskspace/rng.hpp"

namespace taskspace {

namespace {

// Parameter slots. Registration order below is the canonical order.
enum LayerSlot : std::size_t { kLn1G, kLn1B, kWq, kBq, kWk, kBk, kWv, kBv, kWo, kBo, kLn2G, kLn2B, kW1, kB1, kW2, kB2, kPerLayer };
enum FinalSlot : std::size_t { kLnfG, kLnfB, kClsW, kClsB, kRegW, kRegB, kSeqW, kSeqB };

constexpr std::size_t kTokEmb = 0;
constexpr std::size_t kPosEmb = 1;
constexpr double kMasked = -1e9;

std::size_t layer_index(std::size_t layer, LayerSlot slot) { return 2 + layer * kPerLayer + slot; }
std::size_t final_index(const SurrogateConfig& c, FinalSlot slot) { return 2 + c.layers * kPerLayer + slot; }

Tensor normal_tensor(Rng& rng, Shape shape, double stddev) {
  Tensor t(std::move(shape), 0.0);
  for (auto& v : t.vec()) v = stddev * rng.normal();
  return t;
}

struct Encoded {
  ad::Var hidden;  // rows x width, after the final layer norm
  ad::Var pooled;  // 1 x width, mean over non-pad rows
};

Encoded encode(ad::Tape& tape, const SurrogateConfig& c, std::span<const ad::Var> p, std::span<const ad::Var> prefix,
               std::span<const Token> tokens, std::size_t rows) {
  validate_tokens(tokens, c.vocab, c.max_len);
  if (rows > c.max_len) throw ContractError("padded length exceeds maximum input length");
  std::vector<Token> ids(tokens.begin(), tokens.end());
  ids.resize(std::max(rows, ids.size()), kPadToken);
  const std::size_t n = ids.size();
  std::vector<std::uint32_t> positions(n);
  std::iota(positions.begin(), positions.end(), 0u);

  std::size_t live = 0;
  for (Token t : ids) live += (t != kPadToken);
  const bool all_pad = live == 0;

  const std::size_t plen = prefix.empty() ? 0 : prefix[0].value().rows();
  Tensor key_mask({n, plen + n}, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (ids[j] == kPadToken && !all_pad) key_mask[i * (plen + n) + plen + j] = kMasked;

  ad::Var x = ad::add(ad::embedding(p[kTokEmb], ids), ad::embedding(p[kPosEmb], positions));
  const std::size_t dh = c.width / c.heads;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));

  for (std::size_t l = 0; l < c.layers; ++l) {
    auto P = [&](LayerSlot s) { return p[layer_index(l, s)]; };
    ad::Var a = ad::layer_norm_rows(x, P(kLn1G), P(kLn1B));
    ad::Var q = ad::add_bias(ad::matmul(a, P(kWq)), P(kBq));
    ad::Var k = ad::add_bias(ad::matmul(a, P(kWk)), P(kBk));
    ad::Var v = ad::add_bias(ad::matmul(a, P(kWv)), P(kBv));
    if (plen > 0) {
      k = ad::concat_rows(prefix[2 * l], k);
      v = ad::concat_rows(prefix[2 * l + 1], v);
    }
    std::vector<ad::Var> heads;
    heads.reserve(c.heads);
    for (std::size_t h = 0; h < c.heads; ++h) {
      ad::Var qh = ad::slice_cols(q, h * dh, dh);
      ad::Var kh = ad::slice_cols(k, h * dh, dh);
      ad::Var vh = ad::slice_cols(v, h * dh, dh);
      ad::Var scores = ad::mask_add(ad::scale(ad::matmul_nt(qh, kh), inv_sqrt), key_mask);
      heads.push_back(ad::matmul(ad::softmax_rows(scores), vh));
    }
    ad::Var att = c.heads == 1 ? heads[0] : ad::concat_cols(heads);
    x = ad::add(x, ad::add_bias(ad::matmul(att, P(kWo)), P(kBo)));
    ad::Var b = ad::layer_norm_rows(x, P(kLn2G), P(kLn2B));
    ad::Var f = ad::gelu(ad::add_bias(ad::matmul(b, P(kW1)), P(kB1)));
    x = ad::add(x, ad::add_bias(ad::matmul(f, P(kW2)), P(kB2)));
  }
  ad::Var hidden = ad::layer_norm_rows(x, p[final_index(c, kLnfG)], p[final_index(c, kLnfB)]);

  Tensor pool_w({1, n}, 0.0);
  for (std::size_t j = 0; j < n; ++j)
    if (all_pad || ids[j] != kPadToken) pool_w[j] = 1.0 / static_cast<double>(all_pad ? n : live);
  ad::Var pooled = ad::matmul(tape.constant(std::move(pool_w)), hidden);
  return {hidden, pooled};
}

ad::Var class_log_softmax(const SurrogateConfig& c, std::span<const ad::Var> p, const Encoded& e) {
  return ad::log_softmax_rows(ad::add_bias(ad::matmul(e.pooled, p[final_index(c, kClsW)]), p[final_index(c, kClsB)]));
}

ad::Var regression_mean(const SurrogateConfig& c, std::span<const ad::Var> p, const Encoded& e) {
  return ad::add_bias(ad::matmul(e.pooled, p[final_index(c, kRegW)]), p[final_index(c, kRegB)]);
}

ad::Var sequence_log_softmax(const SurrogateConfig& c, std::span<const ad::Var> p, ad::Var rows) {
  return ad::log_softmax_rows(ad::add_bias(ad::matmul(rows, p[final_index(c, kSeqW)]), p[final_index(c, kSeqB)]));
}

std::vector<ad::Var> borrow_all(ad::Tape& tape, const ParamVector& params, bool grads) {
  std::vector<ad::Var> out;
  out.reserve(params.count());
  for (std::size_t i = 0; i < params.count(); ++i) out.push_back(tape.borrow(params[i], grads));
  return out;
}

void check_prefix(const SurrogateConfig& c, const PrefixParams* prefix) {
  if (!prefix || prefix->length() == 0) return;
  if (prefix->layers() != c.layers || prefix->width() != c.width)
    throw ContractError("prefix shape does not match the surrogate configuration");
}

}  // namespace

void SurrogateConfig::validate() const {
  if (vocab == 0 || width == 0 || layers == 0 || heads == 0 || ff == 0 || max_len == 0 || classes == 0 || seq_out == 0)
    throw ArgumentError("surrogate config extents must be positive");
  if (width % heads != 0) throw ArgumentError("width must be divisible by the number of heads");
  if (vocab <= kFirstContentToken) throw ArgumentError("vocabulary must include reserved ids 0..2 and content tokens");
  if (seq_out > max_len) throw ArgumentError("sequence output length exceeds maximum input length");
}

std::size_t SurrogateConfig::parameter_count() const {
  const std::size_t d = width;
  const std::size_t per_layer = 2 * d + 4 * (d * d + d) + 2 * d + (d * ff + ff) + (ff * d + d);
  return vocab * d + max_len * d + layers * per_layer + 2 * d + (d * classes + classes) + (d + 1) + (d * vocab + vocab);
}

nlohmann::json SurrogateConfig::to_json() const {
  return {{"vocab", vocab},     {"width", width},     {"layers", layers},   {"heads", heads},
          {"ff", ff},           {"max_len", max_len}, {"classes", classes}, {"seq_out", seq_out}};
}

SurrogateConfig SurrogateConfig::from_json(const nlohmann::json& j) {
  SurrogateConfig c;
  static const char* keys[] = {"vocab", "width", "layers", "heads", "ff", "max_len", "classes", "seq_out"};
  if (!j.is_object()) throw ConfigError("surrogate config must be an object");
  for (auto it = j.begin(); it != j.end(); ++it)
    if (std::find_if(std::begin(keys), std::end(keys), [&](const char* k) { return it.key() == k; }) == std::end(keys))
      throw ConfigError("unknown surrogate config key: " + it.key());
  auto get = [&](const char* k, std::size_t& dst) {
    if (!j.contains(k)) return;
    if (!j[k].is_number_unsigned()) throw ConfigError(std::string("surrogate config field must be a positive integer: ") + k);
    dst = j[k].get<std::size_t>();
  };
  get("vocab", c.vocab);
  get("width", c.width);
  get("layers", c.layers);
  get("heads", c.heads);
  get("ff", c.ff);
  get("max_len", c.max_len);
  get("classes", c.classes);
  get("seq_out", c.seq_out);
  return c;
}

std::string checkpoint_fingerprint(const SurrogateConfig& config, const ParamVector& params) {
  Sha256 h;
  h.update(config.to_json().dump());
  for (std::size_t i = 0; i < params.count(); ++i) {
    h.update(params.name(i));
    h.update_doubles(params[i].data());
  }
  return h.hex();
}

SurrogateCheckpoint make_checkpoint(SurrogateConfig config, ParamVector params) {
  config.validate();
  if (params.numel() != config.parameter_count())
    throw ContractError("parameter count " + std::to_string(params.numel()) + " does not match configuration (" +
                        std::to_string(config.parameter_count()) + ")");
  std::string fp = checkpoint_fingerprint(config, params);
  return {std::move(config), std::move(params), std::move(fp)};
}

SurrogateCheckpoint init_surrogate(const SurrogateConfig& c, std::uint64_t seed) {
  c.validate();
  Rng rng(seed);
  const std::size_t d = c.width;
  const double sd = 1.0 / std::sqrt(static_cast<double>(d));
  const double sff = 1.0 / std::sqrt(static_cast<double>(c.ff));
  ParamVector p;
  p.add("tok_emb", normal_tensor(rng, {c.vocab, d}, 0.5));
  p.add("pos_emb", normal_tensor(rng, {c.max_len, d}, 0.1));
  for (std::size_t l = 0; l < c.layers; ++l) {
    const std::string pre = "layer" + std::to_string(l) + ".";
    p.add(pre + "ln1.gain", Tensor({d}, 1.0));
    p.add(pre + "ln1.bias", Tensor({d}, 0.0));
    for (const char* w : {"q", "k", "v", "o"}) {
      p.add(pre + "attn.w" + w, normal_tensor(rng, {d, d}, sd));
      p.add(pre + "attn.b" + w, Tensor({d}, 0.0));
    }
    p.add(pre + "ln2.gain", Tensor({d}, 1.0));
    p.add(pre + "ln2.bias", Tensor({d}, 0.0));
    p.add(pre + "ffn.w1", normal_tensor(rng, {d, c.ff}, sd));
    p.add(pre + "ffn.b1", Tensor({c.ff}, 0.0));
    p.add(pre + "ffn.w2", normal_tensor(rng, {c.ff, d}, sff));
    p.add(pre + "ffn.b2", Tensor({d}, 0.0));
  }
  p.add("lnf.gain", Tensor({d}, 1.0));
  p.add("lnf.bias", Tensor({d}, 0.0));
  p.add("head.class.w", normal_tensor(rng, {d, c.classes}, sd));
  p.add("head.class.b", Tensor({c.classes}, 0.0));
  p.add("head.reg.w", normal_tensor(rng, {d, 1}, sd));
  p.add("head.reg.b", Tensor({1}, 0.0));
  p.add("head.seq.w", normal_tensor(rng, {d, c.vocab}, sd));
  p.add("head.seq.b", Tensor({c.vocab}, 0.0));
  return make_checkpoint(c, std::move(p));
}

PrefixParams::PrefixParams(std::size_t layers, std::size_t length, std::size_t width)
    : layers_(layers), length_(length), width_(width) {
  if (length == 0) return;
  for (std::size_t l = 0; l < layers; ++l) {
    params_.add("prefix" + std::to_string(l) + ".k", Tensor({length, width}, 0.0));
    params_.add("prefix" + std::to_string(l) + ".v", Tensor({length, width}, 0.0));
  }
}

PrefixParams PrefixParams::random(std::size_t layers, std::size_t length, std::size_t width, double init_std,
                                  std::uint64_t seed) {
  PrefixParams out(layers, length, width);
  Rng rng(seed);
  for (std::size_t i = 0; i < out.params_.count(); ++i)
    for (auto& v : out.params_[i].vec()) v = init_std * rng.normal();
  return out;
}

PrefixParams PrefixParams::from_params(ParamVector params, std::size_t layers, std::size_t length) {
  if (length == 0) return PrefixParams(layers, 0, 0);
  if (params.count() != 2 * layers) throw ContractError("prefix parameter list must hold one key/value pair per layer");
  const std::size_t width = params[0].cols();
  for (std::size_t i = 0; i < params.count(); ++i)
    if (params[i].shape() != Shape{length, width}) throw ContractError("prefix matrices must share one shape");
  PrefixParams out;
  out.layers_ = layers;
  out.length_ = length;
  out.width_ = width;
  out.params_ = std::move(params);
  return out;
}

ad::Var log_prob_on_tape(ad::Tape& tape, const SurrogateConfig& c, std::span<const ad::Var> p,
                         std::span<const ad::Var> prefix, const Example& ex) {
  validate_label(ex.label, c.limits());
  const LabelKind kind = kind_of(ex.label);
  const std::size_t rows = kind == LabelKind::Tokens ? std::max(ex.tokens.size(), c.seq_out) : ex.tokens.size();
  Encoded e = encode(tape, c, p, prefix, ex.tokens, rows);
  switch (kind) {
    case LabelKind::Class:
      return ad::pick(class_log_softmax(c, p, e), std::get<ClassLabel>(ex.label).index);
    case LabelKind::Distribution: {
      const auto& q = std::get<DistributionLabel>(ex.label).probs;
      return ad::dot_const(class_log_softmax(c, p, e), Tensor({1, q.size()}, q));
    }
    case LabelKind::Scalar: {
      ad::Var mu = regression_mean(c, p, e);
      ad::Var r = ad::sub(mu, tape.constant(Tensor({1, 1}, std::get<ScalarLabel>(ex.label).value)));
      return ad::scale(ad::sum(ad::square(r)), -0.5);
    }
    case LabelKind::Tokens: {
      const auto& target = std::get<TokenSeqLabel>(ex.label).tokens;
      ad::Var lsm = sequence_log_softmax(c, p, ad::slice_rows(e.hidden, 0, c.seq_out));
      Tensor onehot({c.seq_out, c.vocab}, 0.0);
      for (std::size_t j = 0; j < target.size(); ++j)
        if (target[j] != kPadToken) onehot[j * c.vocab + target[j]] = 1.0;
      return ad::dot_const(lsm, onehot);
    }
  }
  throw ContractError("unsupported label kind");
}

ad::Objective log_prob_objective(const SurrogateConfig& config, const Example& example, const PrefixParams* prefix) {
  check_prefix(config, prefix);
  return [config, example, prefix](ad::Tape& tape, std::span<const ad::Var> p) {
    std::vector<ad::Var> pre;
    if (prefix && prefix->length() > 0) pre = borrow_all(tape, prefix->params(), false);
    return log_prob_on_tape(tape, config, p, pre, example);
  };
}

double log_prob(const SurrogateCheckpoint& ckpt, const PrefixParams* prefix, const Example& example) {
  check_prefix(ckpt.config, prefix);
  ad::Tape tape;
  auto p = borrow_all(tape, ckpt.params, false);
  std::vector<ad::Var> pre;
  if (prefix && prefix->length() > 0) pre = borrow_all(tape, prefix->params(), false);
  return log_prob_on_tape(tape, ckpt.config, p, pre, example).item();
}

Label predict_label(const SurrogateCheckpoint& ckpt, std::span<const Token> tokens, LabelKind kind,
                    const PrefixParams* prefix) {
  const auto& c = ckpt.config;
  check_prefix(c, prefix);
  ad::Tape tape;
  auto p = borrow_all(tape, ckpt.params, false);
  std::vector<ad::Var> pre;
  if (prefix && prefix->length() > 0) pre = borrow_all(tape, prefix->params(), false);
  const std::size_t rows = kind == LabelKind::Tokens ? std::max(tokens.size(), c.seq_out) : tokens.size();
  Encoded e = encode(tape, c, p, pre, tokens, rows);
  switch (kind) {
    case LabelKind::Class: {
      const auto& v = class_log_softmax(c, p, e).value().vec();
      return ClassLabel{static_cast<std::uint32_t>(std::max_element(v.begin(), v.end()) - v.begin())};
    }
    case LabelKind::Distribution: {
      auto v = class_log_softmax(c, p, e).value().vec();
      for (auto& x : v) x = std::exp(x);
      const double s = std::accumulate(v.begin(), v.end(), 0.0);
      for (auto& x : v) x /= s;
      return DistributionLabel{std::move(v)};
    }
    case LabelKind::Scalar:
      return ScalarLabel{regression_mean(c, p, e).value()[0]};
    case LabelKind::Tokens: {
      const auto& v = sequence_log_softmax(c, p, ad::slice_rows(e.hidden, 0, c.seq_out)).value().vec();
      TokenSeq out(c.seq_out);
      for (std::size_t j = 0; j < c.seq_out; ++j) {
        auto row = v.begin() + static_cast<std::ptrdiff_t>(j * c.vocab);
        out[j] = static_cast<Token>(std::max_element(row, row + static_cast<std::ptrdiff_t>(c.vocab)) - row);
      }
      return TokenSeqLabel{std::move(out)};
    }
  }
  throw ContractError("unsupported label kind");
}

namespace {

// Shared minibatch loop: `batch_loss` builds the mean negative objective for a
// batch of indices on a tape whose leaves are `trainable`.
template <typename BatchLoss>
void run_adam(ParamVector& trainable, std::size_t n, const TrainConfig& cfg, BatchLoss&& batch_loss) {
  if (cfg.batch == 0) throw ArgumentError("batch size must be positive");
  AdamHyper hp;
  hp.lr = cfg.lr;
  AdamState state = AdamState::init(trainable, hp);
  Rng rng(cfg.seed);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(order);
    for (std::size_t start = 0; start < n; start += cfg.batch) {
      const std::size_t stop = std::min(n, start + cfg.batch);
      std::span<const std::size_t> idx(order.data() + start, stop - start);
      auto vg = ad::value_and_grad(
          [&](ad::Tape& tape, std::span<const ad::Var> leaves) { return batch_loss(tape, leaves, idx); }, trainable);
      adam_step_inplace(state, trainable, vg.grad);
    }
  }
}

void check_training_set(const LabeledSet& data, const SurrogateConfig& c) {
  if (data.empty()) throw ArgumentError("training set is empty");
  (void)data.kind();
  for (const auto& ex : data) {
    validate_tokens(ex.tokens, c.vocab, c.max_len);
    validate_label(ex.label, c.limits());
  }
}

}  // namespace

SurrogateCheckpoint fine_tune_full(const SurrogateCheckpoint& ckpt, const LabeledSet& data, const TrainConfig& cfg) {
  check_training_set(data, ckpt.config);
  if (cfg.epochs == 0) return ckpt;
  ParamVector params = ckpt.params;
  const auto& c = ckpt.config;
  run_adam(params, data.size(), cfg, [&](ad::Tape& tape, std::span<const ad::Var> leaves, std::span<const std::size_t> idx) {
    ad::Var total = log_prob_on_tape(tape, c, leaves, {}, data[idx[0]]);
    for (std::size_t i = 1; i < idx.size(); ++i) total = ad::add(total, log_prob_on_tape(tape, c, leaves, {}, data[idx[i]]));
    return ad::scale(total, -1.0 / static_cast<double>(idx.size()));
  });
  return make_checkpoint(c, std::move(params));
}

PrefixParams initial_prefix(const SurrogateConfig& config, std::size_t prefix_len, std::uint64_t seed, double init_std) {
  if (prefix_len == 0) throw ArgumentError("prefix length must be positive");
  return PrefixParams::random(config.layers, prefix_len, config.width, init_std, Rng::mix(seed, 0x9f1e));
}

PrefixParams fine_tune_prefix(const SurrogateCheckpoint& ckpt, const LabeledSet& data, std::size_t prefix_len,
                              const TrainConfig& cfg, double init_std) {
  PrefixParams init = initial_prefix(ckpt.config, prefix_len, cfg.seed, init_std);
  check_training_set(data, ckpt.config);
  if (cfg.epochs == 0) return init;
  ParamVector trainable = init.params();
  const auto& c = ckpt.config;
  run_adam(trainable, data.size(), cfg, [&](ad::Tape& tape, std::span<const ad::Var> leaves, std::span<const std::size_t> idx) {
    auto backbone = borrow_all(tape, ckpt.params, false);
    ad::Var total = log_prob_on_tape(tape, c, backbone, leaves, data[idx[0]]);
    for (std::size_t i = 1; i < idx.size(); ++i)
      total = ad::add(total, log_prob_on_tape(tape, c, backbone, leaves, data[idx[i]]));
    return ad::scale(total, -1.0 / static_cast<double>(idx.size()));
  });
  return PrefixParams::from_params(std::move(trainable), c.layers, prefix_len);
}

namespace {

struct MaskedText {
  TokenSeq input;
  std::vector<std::size_t> positions;
  std::vector<Token> targets;
};

MaskedText mask_text(const TokenSeq& text, double rate, Rng& rng) {
  MaskedText m{text, {}, {}};
  std::vector<std::size_t> live;
  for (std::size_t i = 0; i < text.size(); ++i)
    if (text[i] != kPadToken) live.push_back(i);
  for (std::size_t i : live)
    if (rng.bernoulli(rate)) m.positions.push_back(i);
  if (m.positions.empty() && !live.empty()) m.positions.push_back(live[rng.below(live.size())]);
  for (std::size_t i : m.positions) {
    m.targets.push_back(text[i]);
    m.input[i] = kMaskToken;
  }
  return m;
}

ad::Var masked_nll_on_tape(ad::Tape& tape, const SurrogateConfig& c, std::span<const ad::Var> p, const MaskedText& m) {
  Encoded e = encode(tape, c, p, {}, m.input, m.input.size());
  ad::Var lsm = sequence_log_softmax(c, p, e.hidden);
  Tensor w({m.input.size(), c.vocab}, 0.0);
  for (std::size_t k = 0; k < m.positions.size(); ++k) w[m.positions[k] * c.vocab + m.targets[k]] = 1.0;
  return ad::scale(ad::dot_const(lsm, w), -1.0 / static_cast<double>(m.positions.size()));
}

}  // namespace

double masked_token_loss(const SurrogateCheckpoint& ckpt, std::span<const TokenSeq> texts, double mask_rate,
                         std::uint64_t seed) {
  if (texts.empty()) throw ArgumentError("no texts to evaluate");
  Rng rng(seed);
  double total = 0.0;
  for (const auto& t : texts) {
    MaskedText m = mask_text(t, mask_rate, rng);
    ad::Tape tape;
    auto p = borrow_all(tape, ckpt.params, false);
    total += masked_nll_on_tape(tape, ckpt.config, p, m).item();
  }
  return total / static_cast<double>(texts.size());
}

SurrogateCheckpoint pretrain_masked(const SurrogateCheckpoint& ckpt, const UnsupervisedPool& pool,
                                    const PretrainConfig& cfg) {
  if (pool.empty()) throw ArgumentError("pretraining pool is empty");
  if (cfg.epochs == 0) return ckpt;
  for (const auto& t : pool.texts) validate_tokens(t, ckpt.config.vocab, ckpt.config.max_len);
  ParamVector params = ckpt.params;
  const auto& c = ckpt.config;
  Rng mask_rng(Rng::mix(cfg.seed, 0x3a5c));
  TrainConfig tc{cfg.epochs, cfg.batch, cfg.lr, cfg.seed};
  run_adam(params, pool.size(), tc, [&](ad::Tape& tape, std::span<const ad::Var> leaves, std::span<const std::size_t> idx) {
    ad::Var total = masked_nll_on_tape(tape, c, leaves, mask_text(pool.texts[idx[0]], cfg.mask_rate, mask_rng));
    for (std::size_t i = 1; i < idx.size(); ++i)
      total = ad::add(total, masked_nll_on_tape(tape, c, leaves, mask_text(pool.texts[idx[i]], cfg.mask_rate, mask_rng)));
    return ad::scale(total, 1.0 / static_cast<double>(idx.size()));
  });
  return make_checkpoint(c, std::move(params));
}

namespace {
constexpr char kMagic[5] = {'T', 'S', 'K', 'V', '1'};

template <typename T>
void write_le(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_le(std::istream& is) {
  T v{};
  if (!is.read(reinterpret_cast<char*>(&v), sizeof(T))) throw Error("truncated checkpoint file");
  return v;
}
}  // namespace

void save_checkpoint(const SurrogateCheckpoint& ckpt, const std::filesystem::path& path) {
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw Error("cannot write checkpoint " + tmp);
    os.write(kMagic, sizeof(kMagic));
    const std::string cfg = ckpt.config.to_json().dump();
    write_le<std::uint32_t>(os, static_cast<std::uint32_t>(cfg.size()));
    os.write(cfg.data(), static_cast<std::streamsize>(cfg.size()));
    const auto flat = ckpt.params.flatten();
    write_le<std::uint64_t>(os, flat.size());
    os.write(reinterpret_cast<const char*>(flat.data()), static_cast<std::streamsize>(flat.size() * sizeof(double)));
    if (!os) throw Error("failed writing checkpoint " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

SurrogateCheckpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("cannot open checkpoint " + path.string());
  char magic[5];
  if (!is.read(magic, 5) || std::memcmp(magic, kMagic, 5) != 0) throw Error("not a checkpoint file: " + path.string());
  const auto len = read_le<std::uint32_t>(is);
  std::string cfg(len, '\0');
  if (!is.read(cfg.data(), len)) throw Error("truncated checkpoint file");
  SurrogateConfig config = SurrogateConfig::from_json(nlohmann::json::parse(cfg));
  const auto count = read_le<std::uint64_t>(is);
  std::vector<double> flat(count);
  if (!is.read(reinterpret_cast<char*>(flat.data()), static_cast<std::streamsize>(count * sizeof(double))))
    throw Error("truncated checkpoint payload");
  // Layout (names and shapes) is a function of the config alone.
  SurrogateCheckpoint shape = init_surrogate(config, 0);
  return make_checkpoint(config, shape.params.unflatten_like(flat));
}

}  // namespace taskspace
