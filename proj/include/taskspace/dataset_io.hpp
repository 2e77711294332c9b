// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <vector>

#include "taskspace/label.hpp"
#include "taskspace/oracle.hpp"

namespace taskspace {

/// One `{"tokens":[...],"kind":"class","label":3}` object per line. Label
/// values use the wire encoding of the oracle protocol.
void write_labeled_jsonl(const LabeledSet& data, const std::filesystem::path& path);
LabeledSet read_labeled_jsonl(const std::filesystem::path& path);

/// A JSON array, or one object per line, of `{"id":..,"tokens":[..],"hint":..}`.
/// Ids must be unique.
std::vector<PromptSpec> read_prompts(const std::filesystem::path& path);

}  // namespace taskspace
