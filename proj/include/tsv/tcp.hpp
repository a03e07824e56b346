#pragma once

#include <atomic>
#include <cstdint>
#include <memory>
#include <string>
#include <thread>
#include <vector>

#include "tsv/runtime.hpp"

namespace tsv {

/// Session coordinator and message router on 127.0.0.1. Waits for
/// `HELLO <conv> <role>` from every role, replies `START <epoch-ns>` to all,
/// then forwards each frame to its receiver. Sends `ABORT` if the roles are
/// not all present within `barrier_window` seconds.
class Broker {
 public:
  Broker(std::string conversation, std::vector<std::string> roles, double barrier_window = 5.0);
  ~Broker();
  Broker(const Broker&) = delete;
  Broker& operator=(const Broker&) = delete;

  std::uint16_t port() const { return port_; }
  /// Closes every connection; blocked endpoints see the session end.
  void abort() { abort_ = true; }

 private:
  void serve();

  std::string conversation_;
  std::vector<std::string> roles_;
  double window_;
  int listen_fd_ = -1;
  std::uint16_t port_ = 0;
  std::atomic<bool> stop_{false};
  std::atomic<bool> abort_{false};
  std::thread thread_;
};

struct TcpAddress {
  std::string host = "127.0.0.1";
  std::uint16_t port = 0;
};

/// Connects and blocks at the session barrier. Throws BarrierTimeout if no
/// START arrives within `barrier_window` seconds.
Conversation join(const TcpAddress& broker, EndpointConfig cfg, double barrier_window = 5.0);
/// Same handshake; the initiating endpoint uses this name.
Conversation create(const TcpAddress& broker, EndpointConfig cfg, double barrier_window = 5.0);

/// Starts a broker and runs each endpoint on its own thread over loopback TCP.
SessionRun run_wall(std::vector<EndpointProgram> endpoints, double barrier_window = 5.0);

/// Monotonic wall clock in nanoseconds, shared by broker and endpoints.
std::int64_t wall_ns();

}  // namespace tsv
