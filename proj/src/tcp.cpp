#include "distms/tcp.hpp"

#include <netdb.h>
#include <netinet/in.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <condition_variable>
#include <cstring>
#include <deque>
#include <memory>
#include <thread>
#include <vector>

#include "distms/message.hpp"

namespace distms::net {

namespace {

std::string errno_text(const std::string& what) { return what + ": " + std::strerror(errno); }

struct AddrInfo {
  addrinfo* head = nullptr;
  ~AddrInfo() {
    if (head) freeaddrinfo(head);
  }
};

void resolve(const std::string& host, int port, bool passive, AddrInfo& out) {
  addrinfo hints{};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_STREAM;
  if (passive) hints.ai_flags = AI_PASSIVE;
  const std::string service = std::to_string(port);
  const int rc = getaddrinfo(host.empty() ? nullptr : host.c_str(), service.c_str(), &hints, &out.head);
  if (rc != 0) throw SocketError("cannot resolve " + host + ": " + gai_strerror(rc));
}

}  // namespace

std::pair<std::string, int> parse_endpoint(const std::string& endpoint) {
  const auto colon = endpoint.rfind(':');
  std::string host = colon == std::string::npos ? "127.0.0.1" : endpoint.substr(0, colon);
  const std::string port_text = colon == std::string::npos ? endpoint : endpoint.substr(colon + 1);
  if (host.empty()) host = "127.0.0.1";
  std::size_t used = 0;
  int port = -1;
  try {
    port = std::stoi(port_text, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != port_text.size() || port < 0 || port > 65535) throw SocketError("bad endpoint '" + endpoint + "'");
  return {host, port};
}

LineSocket::LineSocket(LineSocket&& other) noexcept : fd_(other.fd_), buffer_(std::move(other.buffer_)) {
  other.fd_ = -1;
}

LineSocket::~LineSocket() {
  if (fd_ >= 0) ::close(fd_);
}

void LineSocket::send(const std::string& record) {
  std::lock_guard lock(write_mutex_);
  std::size_t sent = 0;
  while (sent < record.size()) {
    const ssize_t n = ::send(fd_, record.data() + sent, record.size() - sent, MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw SocketError(errno_text("send"));
    }
    sent += static_cast<std::size_t>(n);
  }
}

std::optional<std::string> LineSocket::read_line() {
  char chunk[4096];
  while (true) {
    const auto nl = buffer_.find('\n');
    if (nl != std::string::npos) {
      std::string line = buffer_.substr(0, nl + 1);
      buffer_.erase(0, nl + 1);
      return line;
    }
    const ssize_t n = ::recv(fd_, chunk, sizeof chunk, 0);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) return std::nullopt;
    buffer_.append(chunk, static_cast<std::size_t>(n));
  }
}

void LineSocket::shutdown() {
  if (fd_ >= 0) ::shutdown(fd_, SHUT_RDWR);
}

Listener::Listener(const std::string& host, int port) {
  AddrInfo ai;
  resolve(host, port, true, ai);
  fd_ = ::socket(ai.head->ai_family, ai.head->ai_socktype, ai.head->ai_protocol);
  if (fd_ < 0) throw SocketError(errno_text("socket"));
  const int one = 1;
  ::setsockopt(fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
  if (::bind(fd_, ai.head->ai_addr, ai.head->ai_addrlen) < 0 || ::listen(fd_, 64) < 0) {
    const std::string msg = errno_text("bind " + host + ":" + std::to_string(port));
    ::close(fd_);
    throw SocketError(msg);
  }
  sockaddr_in addr{};
  socklen_t len = sizeof addr;
  ::getsockname(fd_, reinterpret_cast<sockaddr*>(&addr), &len);
  port_ = ntohs(addr.sin_port);
}

Listener::~Listener() {
  if (fd_ >= 0) ::close(fd_);
}

std::optional<LineSocket> Listener::accept(std::chrono::milliseconds timeout) {
  pollfd p{fd_, POLLIN, 0};
  const int rc = ::poll(&p, 1, static_cast<int>(timeout.count()));
  if (rc < 0 && errno != EINTR) throw SocketError(errno_text("poll"));
  if (rc <= 0) return std::nullopt;
  const int fd = ::accept(fd_, nullptr, nullptr);
  if (fd < 0) return std::nullopt;
  return LineSocket(fd);
}

LineSocket connect_to(const std::string& host, int port, std::chrono::milliseconds retry_for) {
  const auto deadline = std::chrono::steady_clock::now() + retry_for;
  AddrInfo ai;
  resolve(host, port, false, ai);
  while (true) {
    const int fd = ::socket(ai.head->ai_family, ai.head->ai_socktype, ai.head->ai_protocol);
    if (fd < 0) throw SocketError(errno_text("socket"));
    if (::connect(fd, ai.head->ai_addr, ai.head->ai_addrlen) == 0) return LineSocket(fd);
    const std::string msg = errno_text("connect " + host + ":" + std::to_string(port));
    ::close(fd);
    if (std::chrono::steady_clock::now() >= deadline) throw SocketError(msg);
    std::this_thread::sleep_for(std::chrono::milliseconds(50));
  }
}

}  // namespace distms::net

namespace distms::cluster {

namespace {

using net::Message;

template <typename T>
class Inbox {
 public:
  void push(T item) {
    {
      std::lock_guard lock(mutex_);
      items_.push_back(std::move(item));
    }
    cv_.notify_one();
  }
  std::optional<T> pop(std::chrono::milliseconds wait) {
    std::unique_lock lock(mutex_);
    if (!cv_.wait_for(lock, wait, [&] { return !items_.empty(); })) return std::nullopt;
    T item = std::move(items_.front());
    items_.pop_front();
    return item;
  }

 private:
  std::mutex mutex_;
  std::condition_variable cv_;
  std::deque<T> items_;
};

struct Event {
  int from = 0;
  std::optional<Message> msg;  // empty: the connection is gone
};

}  // namespace

orch::Verdict run_master(orch::Master& master, net::Listener& listener, const std::atomic<bool>* stop,
                         MasterStats* stats) {
  MasterStats local;
  MasterStats& st = stats ? *stats : local;
  auto stopped = [&] { return stop && stop->load(); };

  std::vector<std::unique_ptr<net::LineSocket>> conns;
  while (static_cast<int>(conns.size()) < master.workers()) {
    if (stopped()) {
      master.stop();
      return master.verdict();
    }
    if (auto s = listener.accept(std::chrono::milliseconds(100))) {
      conns.push_back(std::make_unique<net::LineSocket>(std::move(*s)));
    }
  }
  st.connected = static_cast<int>(conns.size());

  Inbox<Event> events;
  std::vector<std::thread> readers;
  for (std::size_t i = 0; i < conns.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    readers.emplace_back([&events, &conns, id] {
      auto& sock = *conns[static_cast<std::size_t>(id - 1)];
      while (auto line = sock.read_line()) {
        try {
          Message m = net::decode_message(*line);
          m.sender = id;
          events.push({id, std::move(m)});
        } catch (const net::DecodeError&) {
          break;
        }
      }
      events.push({id, std::nullopt});
    });
  }

  std::vector<char> gone(conns.size() + 1, 0);
  int closed = 0;
  std::vector<int> lost;
  auto deliver = [&](std::vector<orch::Envelope> out) {
    while (true) {
      for (const auto& e : out) {
        if (gone[static_cast<std::size_t>(e.to)]) continue;
        try {
          conns[static_cast<std::size_t>(e.to - 1)]->send(net::encode_message(e.msg));
          ++st.messages;
        } catch (const net::SocketError&) {
          lost.push_back(e.to);
        }
      }
      out.clear();
      while (!lost.empty() && out.empty()) {
        const int w = lost.back();
        lost.pop_back();
        if (gone[static_cast<std::size_t>(w)]) continue;
        gone[static_cast<std::size_t>(w)] = 1;
        ++st.lost;
        out = master.worker_lost(w);
      }
      if (out.empty()) return;
    }
  };

  deliver(master.start());
  while (!master.done()) {
    if (stopped()) {
      deliver(master.stop());
      break;
    }
    auto ev = events.pop(std::chrono::milliseconds(50));
    if (!ev) continue;
    if (ev->msg) {
      ++st.messages;
      deliver(master.handle(*ev->msg));
    } else {
      ++closed;
      lost.push_back(ev->from);
      deliver({});
    }
  }

  // Let workers read their Terminate and hang up before forcing the sockets shut.
  const auto deadline = std::chrono::steady_clock::now() + std::chrono::seconds(5);
  while (closed < static_cast<int>(conns.size()) && std::chrono::steady_clock::now() < deadline) {
    auto ev = events.pop(std::chrono::milliseconds(50));
    if (ev && !ev->msg) ++closed;
  }
  for (auto& c : conns) c->shutdown();
  for (auto& t : readers) t.join();
  return master.verdict();
}

void run_worker(const WcnfFormula& f, net::LineSocket& socket) {
  orch::Worker worker(0, f);
  std::atomic<bool> interrupt{false};
  worker.set_interrupt(&interrupt);

  Inbox<std::optional<Message>> inbox;
  std::thread reader([&] {
    while (auto line = socket.read_line()) {
      try {
        Message m = net::decode_message(*line);
        if (m.kind == net::MsgKind::Abort || m.kind == net::MsgKind::Terminate) interrupt = true;
        inbox.push(std::move(m));
      } catch (const net::DecodeError&) {
        break;
      }
    }
    interrupt = true;
    inbox.push(std::nullopt);
  });

  bool open = true;
  try {
    Message hello;
    hello.kind = net::MsgKind::Hello;
    socket.send(net::encode_message(hello));

    while (open && !worker.terminated()) {
      const auto wait = worker.busy() ? std::chrono::milliseconds(0) : std::chrono::milliseconds(200);
      while (auto item = inbox.pop(wait)) {
        if (!*item) {
          open = false;
          break;
        }
        if ((*item)->kind == net::MsgKind::Abort) interrupt = false;
        worker.handle(**item);
        if (worker.terminated()) break;
        if (worker.busy()) break;
      }
      if (!open || worker.terminated()) break;
      if (worker.busy()) {
        for (const auto& m : worker.step()) socket.send(net::encode_message(m));
      }
    }
  } catch (const net::SocketError&) {
  }
  socket.shutdown();
  reader.join();
}

}  // namespace distms::cluster
