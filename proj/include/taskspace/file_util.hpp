// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace taskspace {

/// Writes `<path>.tmp`, then renames it over `path`.
void write_text_atomic(const std::filesystem::path& path, const std::string& text);

/// Whole file as a string; Error when unreadable.
std::string read_text(const std::filesystem::path& path);

/// One JSON value per non-empty line. Parse failures raise ConfigError with file:line.
std::vector<nlohmann::json> read_jsonl(const std::filesystem::path& path);

}  // namespace taskspace
