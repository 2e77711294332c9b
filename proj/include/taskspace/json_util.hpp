// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <initializer_list>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "taskspace/errors.hpp"

namespace taskspace {

/// Read-only view of a JSON object that rejects keys outside `known` and
/// turns type mismatches into ConfigError naming the field.
class StrictObject {
 public:
  StrictObject(const nlohmann::json& j, std::string context, std::initializer_list<std::string_view> known)
      : j_(j), context_(std::move(context)) {
    if (!j.is_object()) throw ConfigError(context_ + " must be a JSON object");
    for (auto it = j.begin(); it != j.end(); ++it)
      if (std::find(known.begin(), known.end(), it.key()) == known.end())
        throw ConfigError("unknown key '" + it.key() + "' in " + context_);
  }

  bool has(std::string_view key) const { return j_.contains(std::string(key)); }
  const nlohmann::json& at(std::string_view key) const { return j_.at(std::string(key)); }

  template <typename T>
  void get(std::string_view key, T& dst) const {
    if (!has(key)) return;
    try {
      dst = j_.at(std::string(key)).get<T>();
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(context_ + "." + std::string(key) + ": " + e.what());
    }
  }

 private:
  const nlohmann::json& j_;
  std::string context_;
};

}  // namespace taskspace
