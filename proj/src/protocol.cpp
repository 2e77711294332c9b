// SPDX-License-Identifier: Apache-2.0
#include "taskspace/protocol.hpp"

#include <cmath>
#include <istream>
#include <ostream>

#include "taskspace/errors.hpp"

namespace taskspace::protocol {

using nlohmann::json;

json label_to_value(const Label& label) {
  return std::visit(
      [](const auto& l) -> json {
        using T = std::decay_t<decltype(l)>;
        if constexpr (std::is_same_v<T, ClassLabel>) return l.index;
        if constexpr (std::is_same_v<T, DistributionLabel>) return l.probs;
        if constexpr (std::is_same_v<T, ScalarLabel>) return l.value;
        if constexpr (std::is_same_v<T, TokenSeqLabel>) return l.tokens;
      },
      label);
}

Label label_from_value(LabelKind kind, const json& v) {
  switch (kind) {
    case LabelKind::Class:
      if (!v.is_number_unsigned()) throw ProtocolError("class value must be an unsigned integer");
      return ClassLabel{v.get<std::uint32_t>()};
    case LabelKind::Distribution: {
      if (!v.is_array() || v.empty()) throw ProtocolError("distribution value must be a non-empty array");
      std::vector<double> p;
      for (const auto& x : v) {
        if (!x.is_number()) throw ProtocolError("distribution entries must be numbers");
        p.push_back(x.get<double>());
      }
      return DistributionLabel{std::move(p)};
    }
    case LabelKind::Scalar:
      if (!v.is_number() || !std::isfinite(v.get<double>())) throw ProtocolError("scalar value must be a finite number");
      return ScalarLabel{v.get<double>()};
    case LabelKind::Tokens: {
      if (!v.is_array()) throw ProtocolError("tokens value must be an array");
      TokenSeq t;
      for (const auto& x : v) {
        if (!x.is_number_unsigned()) throw ProtocolError("token ids must be unsigned integers");
        t.push_back(x.get<Token>());
      }
      return TokenSeqLabel{std::move(t)};
    }
  }
  throw ProtocolError("unknown kind");
}

std::string hello_request() { return json{{"type", "hello"}}.dump(); }
std::string bye_request() { return json{{"type", "bye"}}.dump(); }

std::string predict_request(std::uint64_t id, const std::optional<TokenSeq>& prompt, const TokenSeq& input) {
  json j = {{"type", "predict"}, {"id", id}, {"input", input}};
  j["prompt"] = prompt ? json(*prompt) : json(nullptr);
  return j.dump();
}

namespace {
json parse_line(const std::string& line) {
  try {
    json j = json::parse(line);
    if (!j.is_object()) throw ProtocolError("reply is not a JSON object: " + line);
    return j;
  } catch (const json::exception& e) {
    throw ProtocolError(std::string("malformed reply line: ") + line + " (" + e.what() + ")");
  }
}

std::string type_of(const json& j) {
  if (!j.contains("type") || !j["type"].is_string()) return {};
  return j["type"].get<std::string>();
}
}  // namespace

Hello parse_hello(const std::string& line) {
  json j = parse_line(line);
  if (type_of(j) != "hello" || !j.contains("kind") || !j["kind"].is_string() || !j.contains("name") ||
      !j["name"].is_string())
    throw ProtocolError("bad hello reply: " + line);
  try {
    return {label_kind_from_string(j["kind"].get<std::string>()), j["name"].get<std::string>()};
  } catch (const ArgumentError&) {
    throw ProtocolError("hello reply names an unknown kind: " + line);
  }
}

Label parse_result(const std::string& line, std::uint64_t id, LabelKind kind) {
  json j = parse_line(line);
  const std::string type = type_of(j);
  if (type == "error")
    throw ProtocolError("oracle reported an error: " + line);
  if (type != "result") throw ProtocolError("expected a result reply, got: " + line);
  if (!j.contains("id") || !j["id"].is_number_unsigned() || j["id"].get<std::uint64_t>() != id)
    throw ProtocolError("result id does not match request " + std::to_string(id) + ": " + line);
  if (!j.contains("kind") || !j["kind"].is_string() || j["kind"].get<std::string>() != to_string(kind))
    throw ProtocolError("result kind differs from the declared kind " + std::string(to_string(kind)) + ": " + line);
  if (!j.contains("value")) throw ProtocolError("result without a value: " + line);
  try {
    return label_from_value(kind, j["value"]);
  } catch (const ProtocolError& e) {
    throw ProtocolError(std::string(e.what()) + ": " + line);
  }
}

std::string handle_line(const std::string& line, const std::string& name, LabelKind kind, const Handler& handler,
                        bool& done) {
  done = false;
  json req;
  json id = nullptr;
  auto error = [&](const std::string& msg) { return json{{"type", "error"}, {"id", id}, {"msg", msg}}.dump(); };
  try {
    req = json::parse(line);
  } catch (const json::exception&) {
    return error("malformed JSON");
  }
  if (!req.is_object()) return error("request must be an object");
  if (req.contains("id") && req["id"].is_number_unsigned()) id = req["id"];
  const std::string type = type_of(req);
  if (type == "hello") return json{{"type", "hello"}, {"kind", to_string(kind)}, {"name", name}}.dump();
  if (type == "bye") {
    done = true;
    return {};
  }
  if (type != "predict") return error("unknown request type");
  if (id.is_null()) return error("predict without an unsigned id");
  auto tokens = [](const json& v, TokenSeq& out) {
    if (!v.is_array()) return false;
    for (const auto& x : v) {
      if (!x.is_number_unsigned()) return false;
      out.push_back(x.get<Token>());
    }
    return true;
  };
  TokenSeq input;
  if (!req.contains("input") || !tokens(req["input"], input)) return error("input must be an array of token ids");
  std::optional<TokenSeq> prompt;
  if (req.contains("prompt") && !req["prompt"].is_null()) {
    TokenSeq p;
    if (!tokens(req["prompt"], p)) return error("prompt must be null or an array of token ids");
    prompt = std::move(p);
  }
  try {
    Label out = handler(prompt, input);
    return json{{"type", "result"}, {"id", id}, {"kind", to_string(kind)}, {"value", label_to_value(out)}}.dump();
  } catch (const std::exception& e) {
    return error(e.what());
  }
}

int serve(std::istream& in, std::ostream& out, const std::string& name, LabelKind kind, const Handler& handler) {
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    bool done = false;
    std::string reply = handle_line(line, name, kind, handler, done);
    if (done) return 0;
    out << reply << '\n';
    out.flush();
  }
  return 0;
}

}  // namespace taskspace::protocol
