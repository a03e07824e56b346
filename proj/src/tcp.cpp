#include "tsv/tcp.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/prctl.h>
#include <sys/socket.h>
#include <unistd.h>

#include <chrono>
#include <cmath>
#include <condition_variable>
#include <cstring>
#include <deque>
#include <map>
#include <mutex>
#include <sstream>
#include <system_error>

namespace tsv {

std::int64_t wall_ns() {
  return std::chrono::duration_cast<std::chrono::nanoseconds>(std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

namespace {

[[noreturn]] void sys_fail(const char* what) { throw std::system_error(errno, std::generic_category(), what); }

void write_all(int fd, std::string_view data) {
  while (!data.empty()) {
    ssize_t n = ::send(fd, data.data(), data.size(), MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      sys_fail("send");
    }
    data.remove_prefix(static_cast<std::size_t>(n));
  }
}

// Appends whatever is readable; false on EOF or error.
bool read_some(int fd, std::string& buffer) {
  char chunk[65536];
  ssize_t n = ::recv(fd, chunk, sizeof chunk, 0);
  if (n <= 0) return false;
  buffer.append(chunk, static_cast<std::size_t>(n));
  return true;
}

void no_delay(int fd) {
  int one = 1;
  ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
}

std::vector<std::string> words(const std::string& s) {
  std::istringstream in(s);
  std::vector<std::string> out;
  for (std::string w; in >> w;) out.push_back(w);
  return out;
}

class TcpPort : public Port {
 public:
  TcpPort(int fd, std::int64_t epoch, std::string buffered) : fd_(fd), epoch_(epoch), buffer_(std::move(buffered)) {
    drain();
    reader_ = std::thread([this] { read_loop(); });
  }

  ~TcpPort() override {
    ::shutdown(fd_, SHUT_RDWR);
    reader_.join();
    ::close(fd_);
  }

  double now() override { return static_cast<double>(wall_ns() - epoch_) / 1e9; }

  void sleep_until(double t) override { std::this_thread::sleep_until(at(t)); }

  void push(ConversationMessage m) override {
    std::lock_guard lock(write_mu_);
    write_all(fd_, frame(encode_body(m)));
  }

  std::optional<ConversationMessage> pop(const std::string& from, std::optional<double> deadline) override {
    std::unique_lock lock(mu_);
    auto ready = [&] { return !queues_[from].empty() || closed_; };
    if (deadline) {
      if (!cv_.wait_until(lock, at(*deadline), ready)) return std::nullopt;
    } else {
      cv_.wait(lock, ready);
    }
    auto& q = queues_[from];
    if (q.empty()) throw std::runtime_error("connection to broker closed");
    ConversationMessage m = std::move(q.front());
    q.pop_front();
    return m;
  }

  double tick() const override { return 1e-6; }

 private:
  std::chrono::steady_clock::time_point at(double t) const {
    return std::chrono::steady_clock::time_point(std::chrono::nanoseconds(epoch_ + std::llround(t * 1e9)));
  }

  // Caller holds no lock; queues are guarded inside.
  void drain() {
    while (auto body = take_frame(buffer_)) {
      ConversationMessage m = decode_body(*body);
      std::lock_guard lock(mu_);
      queues_[m.sender].push_back(std::move(m));
      cv_.notify_all();
    }
  }

  void read_loop() {
    while (read_some(fd_, buffer_)) drain();
    std::lock_guard lock(mu_);
    closed_ = true;
    cv_.notify_all();
  }

  int fd_;
  std::int64_t epoch_;
  std::string buffer_;
  std::mutex mu_, write_mu_;
  std::condition_variable cv_;
  std::map<std::string, std::deque<ConversationMessage>> queues_;
  bool closed_ = false;
  std::thread reader_;
};

}  // namespace

Broker::Broker(std::string conversation, std::vector<std::string> roles, double barrier_window)
    : conversation_(std::move(conversation)), roles_(std::move(roles)), window_(barrier_window) {
  listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
  if (listen_fd_ < 0) sys_fail("socket");
  int one = 1;
  ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  addr.sin_port = 0;
  if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) < 0) sys_fail("bind");
  if (::listen(listen_fd_, 64) < 0) sys_fail("listen");
  socklen_t len = sizeof addr;
  ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len);
  port_ = ntohs(addr.sin_port);
  thread_ = std::thread([this] { serve(); });
}

Broker::~Broker() {
  stop_ = true;
  thread_.join();
  ::close(listen_fd_);
}

void Broker::serve() {
  struct Client {
    int fd;
    std::string buffer;
    std::string role;
  };
  std::vector<Client> clients;
  std::map<std::string, int> by_role;
  const std::int64_t barrier_end = wall_ns() + static_cast<std::int64_t>(window_ * 1e9);
  bool started = false;

  auto close_all = [&] {
    for (auto& c : clients) {
      ::shutdown(c.fd, SHUT_RDWR);
      ::close(c.fd);
    }
  };

  while (!stop_ && !abort_) {
    if (!started && wall_ns() >= barrier_end) {
      for (auto& c : clients) {
        try {
          write_all(c.fd, frame("ABORT"));
        } catch (const std::system_error&) {
        }
      }
      close_all();
      return;
    }
    std::vector<pollfd> fds;
    fds.push_back({listen_fd_, POLLIN, 0});
    for (const auto& c : clients) fds.push_back({c.fd, POLLIN, 0});
    std::vector<std::size_t> gone;
    if (::poll(fds.data(), fds.size(), 20) < 0 && errno != EINTR) break;

    if (fds[0].revents & POLLIN) {
      int fd = ::accept(listen_fd_, nullptr, nullptr);
      if (fd >= 0) {
        no_delay(fd);
        clients.push_back({fd, {}, {}});
      }
    }
    for (std::size_t i = 1; i < fds.size(); ++i) {
      if (!(fds[i].revents & (POLLIN | POLLHUP | POLLERR))) continue;
      Client& c = clients[i - 1];
      if (!read_some(c.fd, c.buffer)) {
        gone.push_back(i - 1);
        continue;
      }
      try {
        while (auto body = take_frame(c.buffer)) {
          if (c.role.empty()) {
            auto w = words(*body);
            if (w.size() == 3 && w[0] == "HELLO" && w[1] == conversation_) {
              c.role = w[2];
              by_role[c.role] = c.fd;
            }
            continue;
          }
          ConversationMessage m = decode_body(*body);
          auto to = by_role.find(m.receiver);
          if (to != by_role.end()) write_all(to->second, frame(*body));
        }
      } catch (const std::exception&) {
        gone.push_back(i - 1);
      }
    }
    for (auto it = gone.rbegin(); it != gone.rend(); ++it) {
      Client& c = clients[*it];
      if (!c.role.empty() && by_role[c.role] == c.fd) by_role.erase(c.role);
      ::close(c.fd);
      clients.erase(clients.begin() + static_cast<std::ptrdiff_t>(*it));
    }
    if (!started) {
      bool all = true;
      for (const auto& r : roles_) all = all && by_role.count(r);
      if (all) {
        std::string start = frame("START " + std::to_string(wall_ns()));
        for (const auto& c : clients)
          if (!c.role.empty()) write_all(c.fd, start);
        started = true;
      }
    }
  }
  close_all();
}

Conversation join(const TcpAddress& broker, EndpointConfig cfg, double barrier_window) {
  int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  if (fd < 0) sys_fail("socket");
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(broker.port);
  if (::inet_pton(AF_INET, broker.host.c_str(), &addr.sin_addr) != 1) {
    ::close(fd);
    throw std::invalid_argument("bad broker address " + broker.host);
  }
  if (::connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr) < 0) {
    ::close(fd);
    sys_fail("connect");
  }
  no_delay(fd);
  write_all(fd, frame("HELLO " + cfg.conversation + " " + cfg.role));

  const std::int64_t until = wall_ns() + static_cast<std::int64_t>(barrier_window * 1e9);
  std::string buffer;
  while (true) {
    if (auto body = take_frame(buffer)) {
      auto w = words(*body);
      if (w.size() == 2 && w[0] == "START") {
        std::int64_t epoch = std::stoll(w[1]);
        return Conversation(std::make_unique<TcpPort>(fd, epoch, std::move(buffer)), std::move(cfg));
      }
      ::close(fd);
      throw BarrierTimeout("session aborted before all roles joined");
    }
    std::int64_t left = until - wall_ns();
    pollfd p{fd, POLLIN, 0};
    if (left <= 0 || ::poll(&p, 1, static_cast<int>(left / 1000000 + 1)) <= 0 || !read_some(fd, buffer)) {
      ::close(fd);
      throw BarrierTimeout("no START within " + format_seconds(barrier_window) + "s");
    }
  }
}

Conversation create(const TcpAddress& broker, EndpointConfig cfg, double barrier_window) {
  return join(broker, std::move(cfg), barrier_window);
}

SessionRun run_wall(std::vector<EndpointProgram> endpoints, double barrier_window) {
  std::vector<std::string> roles;
  for (const auto& e : endpoints) roles.push_back(e.config.role);
  Broker broker(endpoints.empty() ? "" : endpoints.front().config.conversation, roles, barrier_window);
  SessionRun out;
  out.outcomes.resize(endpoints.size());
  std::vector<std::thread> threads;
  for (std::size_t i = 0; i < endpoints.size(); ++i)
    threads.emplace_back([&, i] {
      EndpointOutcome& o = out.outcomes[i];
      o.role = endpoints[i].config.role;
      double now = 0;
      ::prctl(PR_SET_TIMERSLACK, 1UL);
      try {
        Conversation c = join({"127.0.0.1", broker.port()}, endpoints[i].config, barrier_window);
        try {
          endpoints[i].program(c);
          o.completed = true;
        } catch (const std::exception& e) {
          o.error = e.what();
          broker.abort();
        }
        now = c.now();
      } catch (const std::exception& e) {
        o.error = e.what();
      }
      o.finished_at = now;
    });
  for (auto& t : threads) t.join();
  for (const auto& o : out.outcomes) out.end_time = std::max(out.end_time, o.finished_at);
  return out;
}

}  // namespace tsv
