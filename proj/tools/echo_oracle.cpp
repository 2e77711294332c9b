// SPDX-License-Identifier: Apache-2.0
// Reference external oracle: answers with echo_behavior over stdio or HTTP.
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <httplib.h>

#include "taskspace/oracle.hpp"
#include "taskspace/protocol.hpp"

using namespace taskspace;

int main(int argc, char** argv) {
  CLI::App app{"echo oracle"};
  std::string kind_name = "class";
  std::size_t classes = 8, seq_out = 8;
  int http_port = -1;
  std::string name = "echo";
  app.add_option("--kind", kind_name, "class|distribution|scalar|tokens");
  app.add_option("--classes", classes);
  app.add_option("--seq-out", seq_out);
  app.add_option("--name", name);
  app.add_option("--http", http_port, "serve HTTP on this port (0 picks one and prints it)");
  CLI11_PARSE(app, argc, argv);

  const LabelKind kind = label_kind_from_string(kind_name);
  protocol::Handler handler = [&](const std::optional<TokenSeq>&, const TokenSeq& in) {
    return echo_behavior(kind, in, classes, seq_out);
  };
  if (http_port < 0) return protocol::serve(std::cin, std::cout, name, kind, handler);

  httplib::Server server;
  server.Post("/", [&](const httplib::Request& req, httplib::Response& res) {
    bool done = false;
    std::string reply = protocol::handle_line(req.body, name, kind, handler, done);
    res.set_content(reply + "\n", "application/x-ndjson");
    if (done) server.stop();
  });
  const int port = http_port == 0 ? server.bind_to_any_port("127.0.0.1") : (server.bind_to_port("127.0.0.1", http_port) ? http_port : -1);
  if (port < 0) {
    std::cerr << "cannot bind port " << http_port << "\n";
    return 4;
  }
  std::cout << port << std::endl;
  return server.listen_after_bind() ? 0 : 4;
}
