#include "unishap/external_game.h"

#include <poll.h>
#include <signal.h>
#include <sys/socket.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cstring>
#include <stdexcept>
#include <thread>

#include "unishap/errors.h"

namespace unishap {
namespace {

std::string Trim(std::string s) {
  while (!s.empty() && (s.back() == '\r' || s.back() == ' ')) s.pop_back();
  return s;
}

}  // namespace

ExternalGame::ExternalGame(const std::string& command, int d)
    : ExternalGame(command, d, Options{}) {}

ExternalGame::ExternalGame(const std::string& command, int d,
                           const Options& options)
    : Game(d), command_(command), options_(options) {
  if (command.empty()) throw ConfigError("external game: empty command");
  if (options.timeout_ms <= 0) {
    throw std::invalid_argument("external game: timeout must be positive");
  }
  set_batch_size(options.batch_size);
  Start();
}

ExternalGame::~ExternalGame() { Shutdown(); }

void ExternalGame::Start() {
  int sv[2];
  if (socketpair(AF_UNIX, SOCK_STREAM | SOCK_CLOEXEC, 0, sv) != 0) {
    throw GameError(std::string("external game: socketpair failed: ") +
                    std::strerror(errno));
  }
  pid_t pid = fork();
  if (pid < 0) {
    close(sv[0]);
    close(sv[1]);
    throw GameError(std::string("external game: fork failed: ") +
                    std::strerror(errno));
  }
  if (pid == 0) {
    dup2(sv[1], STDIN_FILENO);
    dup2(sv[1], STDOUT_FILENO);
    execl("/bin/sh", "sh", "-c", command_.c_str(), static_cast<char*>(nullptr));
    _exit(127);
  }
  close(sv[1]);
  pid_ = pid;
  fd_ = sv[0];

  const std::string hello = "HELLO d=" + std::to_string(dimension());
  try {
    WriteAll(hello + "\n");
    const std::string reply = Trim(ReadLine());
    if (reply != hello) {
      throw ProtocolError("external game: bad handshake '" + reply + "'",
                          lines_read_);
    }
  } catch (...) {
    dead_ = true;
    Shutdown();
    throw;
  }
}

void ExternalGame::Shutdown() {
  if (fd_ >= 0) {
    if (!dead_) {
      const char bye[] = "BYE\n";
      send(fd_, bye, sizeof(bye) - 1, MSG_NOSIGNAL);
    }
    shutdown(fd_, SHUT_WR);
    close(fd_);
    fd_ = -1;
  }
  if (pid_ > 0) {
    int status = 0;
    for (int i = 0; i < 100; ++i) {
      if (waitpid(pid_, &status, WNOHANG) != 0) {
        pid_ = -1;
        return;
      }
      std::this_thread::sleep_for(std::chrono::milliseconds(10));
    }
    kill(pid_, SIGKILL);
    waitpid(pid_, &status, 0);
    pid_ = -1;
  }
}

void ExternalGame::WriteAll(const std::string& data) const {
  std::size_t sent = 0;
  while (sent < data.size()) {
    ssize_t n = send(fd_, data.data() + sent, data.size() - sent, MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      RaiseExit("while sending request");
    }
    sent += static_cast<std::size_t>(n);
  }
}

void ExternalGame::RaiseExit(const std::string& context) const {
  dead_ = true;
  std::string status = "exited";
  if (pid_ > 0) {
    int st = 0;
    pid_t r = waitpid(pid_, &st, WNOHANG);
    if (r == 0) {
      std::this_thread::sleep_for(std::chrono::milliseconds(50));
      r = waitpid(pid_, &st, WNOHANG);
    }
    if (r == pid_) {
      const_cast<ExternalGame*>(this)->pid_ = -1;
      if (WIFEXITED(st)) {
        status = "exited with status " + std::to_string(WEXITSTATUS(st));
      } else if (WIFSIGNALED(st)) {
        status = "killed by signal " + std::to_string(WTERMSIG(st));
      }
    }
  }
  throw ProcessExitError("external game subprocess " + status + " " + context);
}

std::string ExternalGame::ReadLine() const {
  using Clock = std::chrono::steady_clock;
  const auto deadline = Clock::now() + std::chrono::milliseconds(options_.timeout_ms);
  for (;;) {
    if (auto pos = buffer_.find('\n'); pos != std::string::npos) {
      std::string line = buffer_.substr(0, pos);
      buffer_.erase(0, pos + 1);
      ++lines_read_;
      return line;
    }
    const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(
        deadline - Clock::now());
    if (left.count() <= 0) {
      dead_ = true;
      throw TimeoutError("external game: no response within " +
                         std::to_string(options_.timeout_ms) + " ms");
    }
    pollfd pfd{fd_, POLLIN, 0};
    int r = poll(&pfd, 1, static_cast<int>(left.count()));
    if (r < 0) {
      if (errno == EINTR) continue;
      throw GameError(std::string("external game: poll failed: ") +
                      std::strerror(errno));
    }
    if (r == 0) continue;
    char chunk[65536];
    ssize_t n = recv(fd_, chunk, sizeof(chunk), 0);
    if (n < 0) {
      if (errno == EINTR || errno == EAGAIN) continue;
      RaiseExit("while reading response");
    }
    if (n == 0) RaiseExit("before completing its response");
    buffer_.append(chunk, static_cast<std::size_t>(n));
  }
}

void ExternalGame::DoEvaluate(const SubsetBatch& batch, std::size_t begin,
                              std::size_t end, double* out) const {
  std::lock_guard<std::mutex> lock(mu_);
  if (dead_) throw GameError("external game: subprocess is no longer usable");
  const std::size_t k = end - begin;
  std::string request = "EVAL " + std::to_string(k) + "\n";
  for (std::size_t i = begin; i < end; ++i) {
    request += batch[i].ToBase64();
    request += '\n';
  }
  WriteAll(request);

  const std::string header = Trim(ReadLine());
  if (header != "VALUES " + std::to_string(k)) {
    dead_ = true;
    throw ProtocolError("external game: expected 'VALUES " + std::to_string(k) +
                            "', got '" + header + "'",
                        lines_read_);
  }
  for (std::size_t i = 0; i < k; ++i) {
    const std::string line = Trim(ReadLine());
    std::size_t used = 0;
    double value = 0.0;
    bool ok = !line.empty();
    if (ok) {
      try {
        value = std::stod(line, &used);
      } catch (const std::exception&) {
        ok = false;
      }
    }
    if (!ok || used != line.size()) {
      dead_ = true;
      throw ProtocolError("external game: malformed value '" + line + "'",
                          lines_read_);
    }
    out[i] = value;
  }
}

}  // namespace unishap
