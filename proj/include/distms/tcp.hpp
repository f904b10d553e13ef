#pragma once

#include <atomic>
#include <chrono>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>

#include "distms/formula.hpp"
#include "distms/orchestration.hpp"

namespace distms::net {

class SocketError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// "host:port"; a bare port means 127.0.0.1.
std::pair<std::string, int> parse_endpoint(const std::string& endpoint);

// Newline-delimited records over a stream socket. send() may be called from
// any thread; read_line() from one reader thread only.
class LineSocket {
 public:
  explicit LineSocket(int fd) : fd_(fd) {}
  LineSocket(LineSocket&& other) noexcept;
  LineSocket& operator=(LineSocket&&) = delete;
  LineSocket(const LineSocket&) = delete;
  ~LineSocket();

  void send(const std::string& record);
  // Includes the trailing newline; nullopt once the peer has closed.
  std::optional<std::string> read_line();
  // Unblocks a pending read_line() in another thread.
  void shutdown();

 private:
  int fd_;
  std::mutex write_mutex_;
  std::string buffer_;
};

class Listener {
 public:
  Listener(const std::string& host, int port);
  ~Listener();
  Listener(const Listener&) = delete;
  Listener& operator=(const Listener&) = delete;

  int port() const { return port_; }
  // nullopt when `timeout` passes without a connection.
  std::optional<LineSocket> accept(std::chrono::milliseconds timeout);

 private:
  int fd_ = -1;
  int port_ = 0;
};

// Retries until the deadline; throws SocketError afterwards.
LineSocket connect_to(const std::string& host, int port, std::chrono::milliseconds retry_for);

}  // namespace distms::net

namespace distms::cluster {

struct MasterStats {
  int connected = 0;
  int lost = 0;
  std::size_t messages = 0;
};

// Waits for `workers` connections, then drives the master until it decides
// or `stop` is raised. Returns the master's verdict.
orch::Verdict run_master(orch::Master& master, net::Listener& listener, const std::atomic<bool>* stop = nullptr,
                         MasterStats* stats = nullptr);

// Serves one worker over a connection until the master terminates it.
void run_worker(const WcnfFormula& f, net::LineSocket& socket);

}  // namespace distms::cluster
