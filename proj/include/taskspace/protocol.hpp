// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "taskspace/label.hpp"

namespace taskspace::protocol {

// Newline-delimited JSON, one object per line:
//   {"type":"hello"}                                   -> {"type":"hello","kind":K,"name":S}
//   {"type":"predict","id":N,"prompt":[..]|null,"input":[..]}
//                                                      -> {"type":"result","id":N,"kind":K,"value":V}
//   {"type":"bye"}                                     (server exits 0)
// Servers answer malformed lines with {"type":"error","id":N|null,"msg":S}.

nlohmann::json label_to_value(const Label& label);
/// Throws ProtocolError when `value` does not have the shape `kind` requires.
Label label_from_value(LabelKind kind, const nlohmann::json& value);

std::string hello_request();
std::string bye_request();
std::string predict_request(std::uint64_t id, const std::optional<TokenSeq>& prompt, const TokenSeq& input);

struct Hello {
  LabelKind kind;
  std::string name;
};
/// Parse a hello reply; ProtocolError cites the line on any defect.
Hello parse_hello(const std::string& line);
/// Parse a result reply for request `id` of the declared kind.
Label parse_result(const std::string& line, std::uint64_t id, LabelKind kind);

/// Server-side request handler: (prompt or nullopt, input) -> label.
using Handler = std::function<Label(const std::optional<TokenSeq>& prompt, const TokenSeq& input)>;

/// Serve requests from `in` until "bye" or EOF. Replies go to `out`, flushed
/// per line. Returns the process exit code (0 on bye or EOF).
int serve(std::istream& in, std::ostream& out, const std::string& name, LabelKind kind, const Handler& handler);

/// Dispatch one request line and return the reply line (empty for bye).
/// Sets `done` when the line was a bye request.
std::string handle_line(const std::string& line, const std::string& name, LabelKind kind, const Handler& handler,
                        bool& done);

}  // namespace taskspace::protocol
