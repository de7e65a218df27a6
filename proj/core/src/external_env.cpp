#include <poll.h>
#include <signal.h>
#include <spawn.h>
#include <sys/socket.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cstring>
#include <nlohmann/json.hpp>
#include <thread>

#include "exprag/environment.hpp"
#include "exprag/error.hpp"

extern char** environ;

namespace exprag {

namespace {

std::string errno_text() { return std::strerror(errno); }

}  // namespace

std::unique_ptr<ExternalEnvironment> connect_external(const LaunchSpec& launch) {
  if (launch.argv.empty()) throw HandshakeError("external environment launch command is empty");
  int fds[2];
  if (::socketpair(AF_UNIX, SOCK_STREAM | SOCK_CLOEXEC, 0, fds) != 0) {
    throw HandshakeError("socketpair failed: " + errno_text());
  }
  posix_spawn_file_actions_t actions;
  posix_spawn_file_actions_init(&actions);
  posix_spawn_file_actions_adddup2(&actions, fds[1], STDIN_FILENO);
  posix_spawn_file_actions_adddup2(&actions, fds[1], STDOUT_FILENO);

  std::vector<char*> argv;
  for (const auto& a : launch.argv) argv.push_back(const_cast<char*>(a.c_str()));
  argv.push_back(nullptr);

  pid_t pid = 0;
  const int rc = ::posix_spawnp(&pid, argv[0], &actions, nullptr, argv.data(), environ);
  posix_spawn_file_actions_destroy(&actions);
  ::close(fds[1]);
  if (rc != 0) {
    ::close(fds[0]);
    throw HandshakeError("cannot start '" + launch.argv[0] + "': " + std::strerror(rc));
  }
  return std::unique_ptr<ExternalEnvironment>(new ExternalEnvironment(launch, pid, fds[0]));
}

ExternalEnvironment::ExternalEnvironment(LaunchSpec launch, int pid, int fd)
    : launch_(std::move(launch)), pid_(pid), fd_(fd) {}

ExternalEnvironment::~ExternalEnvironment() {
  ::close(fd_);
  // Give the child a moment to exit on EOF before killing it.
  for (int i = 0; i < 20; ++i) {
    if (::waitpid(pid_, nullptr, WNOHANG) == pid_) return;
    std::this_thread::sleep_for(std::chrono::milliseconds(5));
  }
  ::kill(pid_, SIGKILL);
  ::waitpid(pid_, nullptr, 0);
}

std::string ExternalEnvironment::read_line() {
  using clock = std::chrono::steady_clock;
  const auto deadline = clock::now() + launch_.timeout;
  for (;;) {
    const auto nl = buffer_.find('\n');
    if (nl != std::string::npos) {
      std::string line = buffer_.substr(0, nl);
      buffer_.erase(0, nl + 1);
      return line;
    }
    const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - clock::now());
    if (left.count() <= 0) throw TimeoutError("external environment did not reply within the timeout");
    pollfd p{fd_, POLLIN, 0};
    const int ready = ::poll(&p, 1, static_cast<int>(left.count()));
    if (ready < 0) {
      if (errno == EINTR) continue;
      throw ProtocolError("poll failed: " + errno_text(), "");
    }
    if (ready == 0) continue;
    char chunk[4096];
    const ssize_t n = ::recv(fd_, chunk, sizeof(chunk), 0);
    if (n < 0) {
      if (errno == EINTR) continue;
      // A child that dies with our request unread resets the socket instead of closing it.
      if (!answered_) throw HandshakeError("external environment failed before its first reply: " + errno_text());
      throw ProtocolError("read failed: " + errno_text(), "");
    }
    if (n == 0) {
      if (!answered_) throw HandshakeError("external environment exited before its first reply");
      throw ProtocolError("external environment closed the connection", buffer_);
    }
    buffer_.append(chunk, static_cast<std::size_t>(n));
  }
}

StepResult ExternalEnvironment::exchange(const std::string& cmd, const std::string& payload_json) {
  const std::int64_t id = next_id_++;
  std::string request = "{\"id\": " + std::to_string(id) + ", \"cmd\": \"" + cmd + "\"";
  if (!payload_json.empty()) request += ", " + payload_json;
  request += "}";

  const std::string wire = request + "\n";
  std::size_t sent = 0;
  while (sent < wire.size()) {
    const ssize_t n = ::send(fd_, wire.data() + sent, wire.size() - sent, MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      if (!answered_) throw HandshakeError("cannot write to external environment: " + errno_text());
      throw ProtocolError("cannot write to external environment: " + errno_text(), "");
    }
    sent += static_cast<std::size_t>(n);
  }

  const std::string line = read_line();
  nlohmann::json reply;
  try {
    reply = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception&) {
    throw ProtocolError("reply is not valid JSON", line);
  }
  StepResult result;
  std::int64_t reply_id = 0;
  try {
    reply_id = reply.at("id").get<std::int64_t>();
    result.observation = reply.at("observation").get<std::string>();
    result.done = reply.at("done").get<bool>();
    result.success = reply.at("success").get<bool>();
    result.score = reply.at("score").get<double>();
  } catch (const nlohmann::json::exception&) {
    throw ProtocolError("reply is missing a field or has the wrong type", line);
  }
  if (reply_id != id) {
    throw ProtocolError("reply id " + std::to_string(reply_id) + " does not match request id " + std::to_string(id),
                        line);
  }
  answered_ = true;
  log_.push_back(ProtocolExchange{id, reply_id, std::move(request), line});
  return result;
}

std::string ExternalEnvironment::reset(const TaskSpec& spec) {
  nlohmann::ordered_json s;
  s["task_type"] = spec.task_type;
  s["object"] = spec.object;
  s["receptacle"] = spec.receptacle;
  if (spec.second_object) s["second_object"] = *spec.second_object;
  s["split"] = std::string(to_string(spec.split));
  s["seed"] = spec.seed;
  s["variation_id"] = spec.variation_id;
  const auto result = exchange("reset", "\"spec\": " + s.dump());
  done_ = result.done;
  return result.observation;
}

StepResult ExternalEnvironment::step(std::string_view action) {
  if (done_) throw ContractError("step after the episode is done");
  const auto result = exchange("step", "\"action\": " + nlohmann::json(std::string(action)).dump());
  done_ = result.done;
  return result;
}

}  // namespace exprag
