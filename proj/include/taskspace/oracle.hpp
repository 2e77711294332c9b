// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "taskspace/label.hpp"
#include "taskspace/surrogate.hpp"

namespace taskspace {

/// Black-box prediction interface. Implementations may keep whatever state
/// they need, but every reply must be of the declared kind.
class ModelOracle {
 public:
  ModelOracle(std::string id, LabelKind kind) : id_(std::move(id)), kind_(kind) {}
  virtual ~ModelOracle() = default;
  ModelOracle(const ModelOracle&) = delete;
  ModelOracle& operator=(const ModelOracle&) = delete;

  const std::string& id() const { return id_; }
  LabelKind kind() const { return kind_; }
  std::uint64_t invocations() const { return calls_.load(); }

  Label predict(std::span<const Token> input);
  /// One request carrying a prompt next to the input. Only oracles that
  /// accept prompts implement this; others raise ContractError.
  Label predict_prompted(std::span<const Token> prompt, std::span<const Token> input);
  virtual bool accepts_prompt() const { return false; }

 protected:
  virtual Label do_predict(const std::optional<TokenSeq>& prompt, std::span<const Token> input) = 0;

 private:
  Label checked(Label out) const;

  std::string id_;
  LabelKind kind_;
  std::atomic<std::uint64_t> calls_{0};
};

using OraclePtr = std::shared_ptr<ModelOracle>;

/// Labels every text through the oracle (one call per text).
LabeledSet predict_pool(ModelOracle& oracle, std::span<const TokenSeq> texts);

/// In-process oracle backed by a deterministic function.
class FunctionOracle : public ModelOracle {
 public:
  using Fn = std::function<Label(const std::optional<TokenSeq>& prompt, std::span<const Token> input)>;
  FunctionOracle(std::string id, LabelKind kind, Fn fn, bool accepts_prompt = false)
      : ModelOracle(std::move(id), kind), fn_(std::move(fn)), accepts_prompt_(accepts_prompt) {}
  bool accepts_prompt() const override { return accepts_prompt_; }

 protected:
  Label do_predict(const std::optional<TokenSeq>& prompt, std::span<const Token> input) override {
    return fn_(prompt, input);
  }

 private:
  Fn fn_;
  bool accepts_prompt_;
};

/// Class of a token for the majority-token task: token id modulo the class count.
std::uint32_t token_class(Token t, std::size_t classes);
/// Most frequent non-pad token (smallest id on ties).
Token majority_token(std::span<const Token> input);

OraclePtr make_majority_token_oracle(std::string id, std::size_t classes);
OraclePtr make_constant_oracle(std::string id, Label value);

/// Deterministic reference behaviours shared by the in-process echo oracle and
/// the external echo server: tokens -> first `seq_out` input tokens; class ->
/// first token mod classes; distribution -> 0.5 on that class, rest uniform;
/// scalar -> mean token id.
Label echo_behavior(LabelKind kind, std::span<const Token> input, std::size_t classes, std::size_t seq_out);
OraclePtr make_echo_oracle(std::string id, LabelKind kind, std::size_t classes, std::size_t seq_out);

/// A surrogate-architecture checkpoint used as a (zoo) model.
class CheckpointOracle : public ModelOracle {
 public:
  CheckpointOracle(std::string id, SurrogateCheckpoint ckpt, LabelKind kind)
      : ModelOracle(std::move(id), kind), ckpt_(std::move(ckpt)) {}
  const SurrogateCheckpoint& checkpoint() const { return ckpt_; }

 protected:
  Label do_predict(const std::optional<TokenSeq>&, std::span<const Token> input) override {
    return predict_label(ckpt_, input, kind());
  }

 private:
  SurrogateCheckpoint ckpt_;
};

/// Bag-of-tokens linear model: class/regression heads read normalized token
/// counts; the sequence head maps each input position's token through a
/// learned V x V table plus a bag term.
class BagOfTokensModel {
 public:
  BagOfTokensModel(std::size_t vocab, std::size_t classes, std::size_t seq_out, std::uint64_t seed);

  void train(const LabeledSet& data, const TrainConfig& cfg);
  Label predict(std::span<const Token> input, LabelKind kind) const;
  double log_prob(const Example& ex) const;
  const ParamVector& params() const { return params_; }

 private:
  ad::Var log_prob_on_tape(ad::Tape& tape, std::span<const ad::Var> p, const Example& ex) const;
  std::size_t vocab_, classes_, seq_out_;
  ParamVector params_;
};

class BagOfTokensOracle : public ModelOracle {
 public:
  BagOfTokensOracle(std::string id, BagOfTokensModel model, LabelKind kind)
      : ModelOracle(std::move(id), kind), model_(std::move(model)) {}

 protected:
  Label do_predict(const std::optional<TokenSeq>&, std::span<const Token> input) override {
    return model_.predict(input, kind());
  }

 private:
  BagOfTokensModel model_;
};

struct PromptSpec {
  std::string id;
  TokenSeq tokens;
  std::string hint;  // free-form task tag
};

/// prompt, separator, then the input with its tail truncated so the whole
/// request fits in `max_len`.
TokenSeq compose_prompted(std::span<const Token> prompt, std::span<const Token> input, std::size_t max_len);

/// (prompt, llm) as one model. Its id is "<llm id>#<prompt id>". An empty
/// prompt forwards inputs unchanged to the bare model.
OraclePtr as_prompted_model(OraclePtr llm, PromptSpec prompt, std::size_t max_len = 32);

/// Prompt-conditioned simulated language model. A routing table maps exact
/// prompt token sequences to a task behaviour and an accuracy; replies are
/// correct with that probability, otherwise a different label, and then
/// replaced by a uniform label with probability `noise`. Randomness is a pure
/// function of (seed, prompt, input), so replies are repeatable.
class SimulatedLLM : public ModelOracle {
 public:
  using Behavior = std::function<std::uint32_t(std::span<const Token>)>;
  struct Route {
    TokenSeq prompt;
    std::string behavior;
    double accuracy = 1.0;
  };

  SimulatedLLM(std::string id, std::size_t label_count, std::map<std::string, Behavior> behaviors,
               std::vector<Route> routes, std::string default_behavior, double default_accuracy, double noise,
               std::uint64_t seed);
  bool accepts_prompt() const override { return true; }
  const std::vector<Route>& routes() const { return routes_; }

 protected:
  Label do_predict(const std::optional<TokenSeq>& prompt, std::span<const Token> input) override;

 private:
  std::size_t label_count_;
  std::map<std::string, Behavior> behaviors_;
  std::vector<Route> routes_;
  std::string default_behavior_;
  double default_accuracy_;
  double noise_;
  std::uint64_t seed_;
};

/// Bidirectional line transport to an external oracle.
class LineChannel {
 public:
  virtual ~LineChannel() = default;
  /// Send one request line and wait for its reply line.
  virtual std::string exchange(const std::string& line) = 0;
  /// Send a line that has no reply (bye).
  virtual void notify(const std::string& line) = 0;
  virtual std::string describe() const = 0;
};

/// Child process speaking the protocol over stdin/stdout.
class StdioChannel : public LineChannel {
 public:
  StdioChannel(std::vector<std::string> argv, std::chrono::milliseconds timeout);
  ~StdioChannel() override;
  std::string exchange(const std::string& line) override;
  void notify(const std::string& line) override;
  std::string describe() const override;
  /// Send raw bytes (used by conformance checks to inject malformed lines).
  void write_raw(const std::string& bytes);
  std::string read_line();
  /// Close stdin and wait up to `timeout` for exit; returns the exit status or -1.
  int wait_exit(std::chrono::milliseconds timeout);

 private:
  std::vector<std::string> argv_;
  std::chrono::milliseconds timeout_;
  int pid_ = -1;
  int to_child_ = -1;
  int from_child_ = -1;
  std::string buffer_;
  bool exited_ = false;
  int status_ = -1;
};

/// HTTP variant: each message is POSTed as the request body to `url`, the
/// reply line is the response body.
class HttpChannel : public LineChannel {
 public:
  HttpChannel(const std::string& url, std::chrono::milliseconds timeout);
  ~HttpChannel() override;
  std::string exchange(const std::string& line) override;
  void notify(const std::string& line) override;
  std::string describe() const override { return url_; }

 private:
  struct Impl;
  std::string url_;
  std::unique_ptr<Impl> impl_;
};

/// Oracle reached through a LineChannel. The handshake runs in `connect`.
class RemoteOracle : public ModelOracle {
 public:
  static std::shared_ptr<RemoteOracle> connect(std::unique_ptr<LineChannel> channel, std::optional<std::string> id = {});
  ~RemoteOracle() override;
  bool accepts_prompt() const override { return true; }
  const std::string& remote_name() const { return name_; }
  /// Send bye. Later predictions raise TransportError.
  void close();

 protected:
  Label do_predict(const std::optional<TokenSeq>& prompt, std::span<const Token> input) override;

 private:
  RemoteOracle(std::string id, LabelKind kind, std::string name, std::unique_ptr<LineChannel> channel);
  std::string name_;
  std::unique_ptr<LineChannel> channel_;
  std::mutex mu_;
  std::uint64_t next_id_ = 0;
  bool closed_ = false;
};

inline constexpr std::chrono::milliseconds kDefaultOracleTimeout{10000};

std::shared_ptr<RemoteOracle> launch_process_oracle(std::vector<std::string> argv,
                                                    std::chrono::milliseconds timeout = kDefaultOracleTimeout);
std::shared_ptr<RemoteOracle> connect_http_oracle(const std::string& url,
                                                  std::chrono::milliseconds timeout = kDefaultOracleTimeout);

/// Protocol conformance checks driven against a command line.
struct ConformanceCheck {
  std::string name;
  bool passed = false;
  std::string detail;
};
std::vector<ConformanceCheck> run_conformance(const std::vector<std::string>& argv,
                                              std::chrono::milliseconds timeout = kDefaultOracleTimeout);

}  // namespace taskspace
