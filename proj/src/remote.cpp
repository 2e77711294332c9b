// SPDX-License-Identifier: Apache-2.0
#include <poll.h>
#include <signal.h>
#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <thread>

#include <httplib.h>

#include "taskspace/errors.hpp"
#include "taskspace/oracle.hpp"
#include "taskspace/protocol.hpp"

extern char** environ;

namespace taskspace {

namespace {
void ignore_sigpipe() {
  static const bool once = [] {
    ::signal(SIGPIPE, SIG_IGN);
    return true;
  }();
  (void)once;
}
}  // namespace

StdioChannel::StdioChannel(std::vector<std::string> argv, std::chrono::milliseconds timeout)
    : argv_(std::move(argv)), timeout_(timeout) {
  if (argv_.empty()) throw ArgumentError("oracle command line is empty");
  ignore_sigpipe();
  int in_pipe[2], out_pipe[2];
  if (::pipe(in_pipe) != 0) throw TransportError(std::string("pipe: ") + std::strerror(errno));
  if (::pipe(out_pipe) != 0) {
    ::close(in_pipe[0]);
    ::close(in_pipe[1]);
    throw TransportError(std::string("pipe: ") + std::strerror(errno));
  }
  posix_spawn_file_actions_t fa;
  posix_spawn_file_actions_init(&fa);
  posix_spawn_file_actions_adddup2(&fa, in_pipe[0], STDIN_FILENO);
  posix_spawn_file_actions_adddup2(&fa, out_pipe[1], STDOUT_FILENO);
  for (int fd : {in_pipe[0], in_pipe[1], out_pipe[0], out_pipe[1]}) posix_spawn_file_actions_addclose(&fa, fd);
  std::vector<char*> args;
  for (auto& a : argv_) args.push_back(a.data());
  args.push_back(nullptr);
  pid_t pid = -1;
  const int rc = ::posix_spawnp(&pid, args[0], &fa, nullptr, args.data(), environ);
  posix_spawn_file_actions_destroy(&fa);
  ::close(in_pipe[0]);
  ::close(out_pipe[1]);
  if (rc != 0) {
    ::close(in_pipe[1]);
    ::close(out_pipe[0]);
    throw TransportError("cannot launch oracle '" + argv_[0] + "': " + std::strerror(rc));
  }
  pid_ = pid;
  to_child_ = in_pipe[1];
  from_child_ = out_pipe[0];
}

StdioChannel::~StdioChannel() {
  if (to_child_ >= 0) ::close(to_child_);
  if (from_child_ >= 0) ::close(from_child_);
  if (pid_ > 0 && !exited_) {
    if (wait_exit(std::chrono::milliseconds(500)) < 0) {
      ::kill(pid_, SIGKILL);
      ::waitpid(pid_, nullptr, 0);
    }
  }
}

std::string StdioChannel::describe() const {
  std::string s;
  for (const auto& a : argv_) s += (s.empty() ? "" : " ") + a;
  return s;
}

void StdioChannel::write_raw(const std::string& bytes) {
  if (to_child_ < 0) throw TransportError("oracle stdin already closed");
  std::size_t off = 0;
  while (off < bytes.size()) {
    const ssize_t n = ::write(to_child_, bytes.data() + off, bytes.size() - off);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw TransportError("oracle '" + describe() + "' closed its input: " + std::strerror(errno));
    }
    off += static_cast<std::size_t>(n);
  }
}

std::string StdioChannel::read_line() {
  const auto deadline = std::chrono::steady_clock::now() + timeout_;
  for (;;) {
    const auto nl = buffer_.find('\n');
    if (nl != std::string::npos) {
      std::string line = buffer_.substr(0, nl);
      buffer_.erase(0, nl + 1);
      if (!line.empty() && line.back() == '\r') line.pop_back();
      return line;
    }
    const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now());
    if (left.count() <= 0)
      throw TransportError("oracle '" + describe() + "' did not reply within " + std::to_string(timeout_.count()) + " ms");
    pollfd pfd{from_child_, POLLIN, 0};
    const int r = ::poll(&pfd, 1, static_cast<int>(left.count()));
    if (r < 0) {
      if (errno == EINTR) continue;
      throw TransportError(std::string("poll: ") + std::strerror(errno));
    }
    if (r == 0) continue;
    char buf[4096];
    const ssize_t n = ::read(from_child_, buf, sizeof(buf));
    if (n < 0) {
      if (errno == EINTR) continue;
      throw TransportError(std::string("read: ") + std::strerror(errno));
    }
    if (n == 0) throw TransportError("oracle '" + describe() + "' closed its output");
    buffer_.append(buf, static_cast<std::size_t>(n));
  }
}

std::string StdioChannel::exchange(const std::string& line) {
  write_raw(line + "\n");
  return read_line();
}

void StdioChannel::notify(const std::string& line) { write_raw(line + "\n"); }

int StdioChannel::wait_exit(std::chrono::milliseconds timeout) {
  if (exited_) return status_;
  if (to_child_ >= 0) {
    ::close(to_child_);
    to_child_ = -1;
  }
  const auto deadline = std::chrono::steady_clock::now() + timeout;
  for (;;) {
    int st = 0;
    const pid_t r = ::waitpid(pid_, &st, WNOHANG);
    if (r == pid_) {
      exited_ = true;
      status_ = WIFEXITED(st) ? WEXITSTATUS(st) : 128 + (WIFSIGNALED(st) ? WTERMSIG(st) : 0);
      return status_;
    }
    if (std::chrono::steady_clock::now() >= deadline) return -1;
    std::this_thread::sleep_for(std::chrono::milliseconds(5));
  }
}

// --- HTTP --------------------------------------------------------------------

struct HttpChannel::Impl {
  std::unique_ptr<httplib::Client> client;
  std::string path;
};

HttpChannel::HttpChannel(const std::string& url, std::chrono::milliseconds timeout)
    : url_(url), impl_(std::make_unique<Impl>()) {
  const std::string scheme = "http://";
  if (url.rfind(scheme, 0) != 0) throw ArgumentError("oracle URL must start with http://: " + url);
  const auto slash = url.find('/', scheme.size());
  const std::string base = slash == std::string::npos ? url : url.substr(0, slash);
  impl_->path = slash == std::string::npos ? "/" : url.substr(slash);
  impl_->client = std::make_unique<httplib::Client>(base);
  const auto sec = static_cast<time_t>(timeout.count() / 1000);
  const auto usec = static_cast<time_t>((timeout.count() % 1000) * 1000);
  impl_->client->set_connection_timeout(sec, usec);
  impl_->client->set_read_timeout(sec, usec);
  impl_->client->set_write_timeout(sec, usec);
}

HttpChannel::~HttpChannel() = default;

std::string HttpChannel::exchange(const std::string& line) {
  auto res = impl_->client->Post(impl_->path, line, "application/x-ndjson");
  if (!res) throw TransportError("HTTP oracle " + url_ + ": " + httplib::to_string(res.error()));
  if (res->status != 200) throw TransportError("HTTP oracle " + url_ + " answered status " + std::to_string(res->status));
  std::string body = res->body;
  while (!body.empty() && (body.back() == '\n' || body.back() == '\r')) body.pop_back();
  return body;
}

void HttpChannel::notify(const std::string& line) { (void)impl_->client->Post(impl_->path, line, "application/x-ndjson"); }

// --- remote oracle -------------------------------------------------------------

RemoteOracle::RemoteOracle(std::string id, LabelKind kind, std::string name, std::unique_ptr<LineChannel> channel)
    : ModelOracle(std::move(id), kind), name_(std::move(name)), channel_(std::move(channel)) {}

std::shared_ptr<RemoteOracle> RemoteOracle::connect(std::unique_ptr<LineChannel> channel, std::optional<std::string> id) {
  const protocol::Hello hello = protocol::parse_hello(channel->exchange(protocol::hello_request()));
  std::string oid = id ? *id : hello.name;
  return std::shared_ptr<RemoteOracle>(new RemoteOracle(std::move(oid), hello.kind, hello.name, std::move(channel)));
}

RemoteOracle::~RemoteOracle() {
  try {
    close();
  } catch (const std::exception&) {
  }
}

void RemoteOracle::close() {
  std::lock_guard lock(mu_);
  if (closed_) return;
  closed_ = true;
  channel_->notify(protocol::bye_request());
}

Label RemoteOracle::do_predict(const std::optional<TokenSeq>& prompt, std::span<const Token> input) {
  std::lock_guard lock(mu_);
  if (closed_) throw TransportError("oracle " + id() + " is closed");
  const std::uint64_t rid = next_id_++;
  const std::string reply = channel_->exchange(protocol::predict_request(rid, prompt, TokenSeq(input.begin(), input.end())));
  return protocol::parse_result(reply, rid, kind());
}

std::shared_ptr<RemoteOracle> launch_process_oracle(std::vector<std::string> argv, std::chrono::milliseconds timeout) {
  return RemoteOracle::connect(std::make_unique<StdioChannel>(std::move(argv), timeout));
}

std::shared_ptr<RemoteOracle> connect_http_oracle(const std::string& url, std::chrono::milliseconds timeout) {
  return RemoteOracle::connect(std::make_unique<HttpChannel>(url, timeout));
}

// --- conformance ---------------------------------------------------------------

std::vector<ConformanceCheck> run_conformance(const std::vector<std::string>& argv, std::chrono::milliseconds timeout) {
  std::vector<ConformanceCheck> out;
  auto record = [&](std::string name, auto&& body) {
    ConformanceCheck c{std::move(name), false, {}};
    try {
      body(c);
      c.passed = c.detail.empty();
    } catch (const std::exception& e) {
      c.detail = e.what();
    }
    out.push_back(std::move(c));
    return out.back().passed;
  };

  StdioChannel ch(argv, timeout);
  protocol::Hello hello{LabelKind::Class, {}};
  if (!record("handshake", [&](ConformanceCheck&) { hello = protocol::parse_hello(ch.exchange(protocol::hello_request())); }))
    return out;

  const std::vector<TokenSeq> inputs = {{3}, {5, 6, 7}, {9, 9, 4, 12, 3, 3}, {}};
  record("predict", [&](ConformanceCheck& c) {
    std::uint64_t id = 100;
    for (const auto& in : inputs) {
      const Label l = protocol::parse_result(ch.exchange(protocol::predict_request(id, std::nullopt, in)), id, hello.kind);
      if (kind_of(l) != hello.kind) c.detail = "reply kind differs from hello";
      ++id;
    }
  });
  record("predict-with-prompt", [&](ConformanceCheck&) {
    protocol::parse_result(ch.exchange(protocol::predict_request(7, TokenSeq{4, 5}, {6, 7})), 7, hello.kind);
  });
  auto expect_error = [&](const std::string& line, ConformanceCheck& c) {
    const auto reply = nlohmann::json::parse(ch.exchange(line));
    if (reply.value("type", "") != "error") c.detail = "expected an error frame, got " + reply.dump();
  };
  record("malformed-json", [&](ConformanceCheck& c) { expect_error("{not json", c); });
  record("unknown-type", [&](ConformanceCheck& c) { expect_error(R"({"type":"frobnicate","id":1})", c); });
  record("bad-input", [&](ConformanceCheck& c) { expect_error(R"({"type":"predict","id":2,"input":"abc"})", c); });
  record("alive-after-errors", [&](ConformanceCheck&) {
    protocol::parse_result(ch.exchange(protocol::predict_request(9, std::nullopt, {3, 4})), 9, hello.kind);
  });
  record("bye-exits-zero", [&](ConformanceCheck& c) {
    ch.notify(protocol::bye_request());
    const int st = ch.wait_exit(timeout);
    if (st != 0) c.detail = st < 0 ? "process did not exit after bye" : "exit status " + std::to_string(st);
  });
  return out;
}

}  // namespace taskspace
