// SPDX-License-Identifier: Apache-2.0
#include "taskspace/dataset_io.hpp"

#include <set>

#include "taskspace/errors.hpp"
#include "taskspace/file_util.hpp"
#include "taskspace/json_util.hpp"
#include "taskspace/protocol.hpp"

namespace taskspace {

void write_labeled_jsonl(const LabeledSet& data, const std::filesystem::path& path) {
  std::string text;
  for (const auto& ex : data) {
    const nlohmann::json line = {
        {"tokens", ex.tokens}, {"kind", to_string(kind_of(ex.label))}, {"label", protocol::label_to_value(ex.label)}};
    text += line.dump() + "\n";
  }
  write_text_atomic(path, text);
}

LabeledSet read_labeled_jsonl(const std::filesystem::path& path) {
  LabeledSet out;
  std::size_t lineno = 0;
  for (const auto& j : read_jsonl(path)) {
    ++lineno;
    const std::string where = path.string() + " record " + std::to_string(lineno);
    StrictObject o(j, where, {"tokens", "kind", "label"});
    if (!o.has("tokens") || !o.has("kind") || !o.has("label")) throw ConfigError(where + ": needs tokens, kind and label");
    Example ex;
    std::string kind;
    o.get("tokens", ex.tokens);
    o.get("kind", kind);
    try {
      ex.label = protocol::label_from_value(label_kind_from_string(kind), o.at("label"));
    } catch (const Error& e) {
      throw ConfigError(where + ": " + e.what());
    }
    if (!out.empty() && kind_of(ex.label) != out.kind()) throw ConfigError(where + ": mixed label kinds");
    out.push_back(std::move(ex));
  }
  if (out.empty()) throw ConfigError(path.string() + ": no examples");
  return out;
}

namespace {
PromptSpec prompt_from_json(const nlohmann::json& j, const std::string& where) {
  StrictObject o(j, where, {"id", "tokens", "hint"});
  if (!o.has("id") || !o.has("tokens")) throw ConfigError(where + ": prompts need id and tokens");
  PromptSpec p;
  o.get("id", p.id);
  o.get("tokens", p.tokens);
  o.get("hint", p.hint);
  return p;
}
}  // namespace

std::vector<PromptSpec> read_prompts(const std::filesystem::path& path) {
  std::vector<nlohmann::json> items;
  const std::string text = read_text(path);
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && text[first] == '[') {
    try {
      items = nlohmann::json::parse(text).get<std::vector<nlohmann::json>>();
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(path.string() + ": " + e.what());
    }
  } else {
    items = read_jsonl(path);
  }
  std::vector<PromptSpec> out;
  std::set<std::string> ids;
  for (std::size_t i = 0; i < items.size(); ++i) {
    out.push_back(prompt_from_json(items[i], path.string() + " prompt " + std::to_string(i + 1)));
    if (!ids.insert(out.back().id).second) throw ConfigError("duplicate prompt id '" + out.back().id + "'");
  }
  if (out.empty()) throw ConfigError(path.string() + ": no prompts");
  return out;
}

}  // namespace taskspace
