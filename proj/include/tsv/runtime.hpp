#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "tsv/monitor.hpp"

namespace tsv {

struct ConversationMessage {
  std::string conversation;
  std::string protocol;
  std::string sender;
  std::string receiver;
  std::string label;
  std::vector<std::string> sorts;
  std::vector<std::string> values;  // opaque bytes, one per sort
  double send_time = 0;

  friend bool operator==(const ConversationMessage&, const ConversationMessage&) = default;
};

/// Canonical body: one tab-separated header line
/// `conv \t protocol \t sender \t receiver \t label \t s1,s2 \t send_ts \n`
/// followed by each value as a 4-byte big-endian length and its bytes.
std::string encode_body(const ConversationMessage& m);
ConversationMessage decode_body(std::string_view body);  // throws std::invalid_argument

/// 4-byte big-endian length prefix.
std::string frame(std::string_view body);
/// Removes and returns the first complete frame body in `buffer`, if any.
std::optional<std::string> take_frame(std::string& buffer);

class VerdictError : public std::runtime_error {
 public:
  explicit VerdictError(MonitorVerdict v);
  const MonitorVerdict& verdict() const { return verdict_; }
  VerdictKind kind() const { return verdict_.kind; }

 private:
  MonitorVerdict verdict_;
};

class BarrierTimeout : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised inside endpoints still blocked when the virtual network can make no
/// further progress.
class Deadlock : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct LogEntry {
  double ts = 0;
  std::string conversation;
  std::string role;
  ObservedEvent event;
  double clock = 0;
  std::optional<MonitorVerdict> verdict;  // inline monitor
  std::optional<MonitorVerdict> shadow;   // passive observer

  /// Inline verdict if present, else the observer's, else Ok.
  VerdictKind kind() const;
  std::string line() const;
};

class EventLog {
 public:
  void add(LogEntry e);
  std::vector<LogEntry> entries() const;
  std::vector<std::string> lines() const;

 private:
  mutable std::mutex mu_;
  std::vector<LogEntry> entries_;
};

/// One endpoint's view of a transport. Times are session seconds.
class Port {
 public:
  virtual ~Port() = default;
  virtual double now() = 0;
  virtual void sleep_until(double t) = 0;
  virtual void push(ConversationMessage m) = 0;
  /// Head of the (from, self) queue; nullopt once `deadline` is reached.
  virtual std::optional<ConversationMessage> pop(const std::string& from, std::optional<double> deadline) = 0;
  /// Smallest step of this clock, used to land strictly past an open bound.
  virtual double tick() const = 0;
};

struct MonitorConfig {
  std::shared_ptr<const TimedAutomaton> automaton;
  MonitorMode mode = MonitorMode::Detect;
  double epsilon = 0;
};

struct EndpointConfig {
  std::string conversation = "c1";
  std::string protocol;
  std::string role;
  std::optional<MonitorConfig> monitor;  // membrane on the transport path
  std::optional<MonitorConfig> shadow;   // observes network-visible events only
  bool halt_on_shadow_violation = false;  // end the program once the observer objects
  double overhead = 0;                    // synthetic cost of every send and receive
  std::shared_ptr<EventLog> log;
};

template <class T>
struct Budgeted {
  T value;
  bool expired = false;
};

class Conversation {
 public:
  Conversation(std::unique_ptr<Port> port, EndpointConfig cfg);
  Conversation(Conversation&&) noexcept;
  ~Conversation();

  const std::string& role() const { return cfg_.role; }
  const EndpointConfig& config() const { return cfg_; }
  double now();

  /// `values` defaults to one empty value per sort.
  void send(const std::string& to, const std::string& label, std::vector<std::string> sorts = {},
            std::vector<std::string> values = {});
  ConversationMessage receive(const std::string& from, const std::optional<std::string>& label = std::nullopt);
  void delay(double seconds);
  void delay_until(double t);

  /// Runs `step(value)` until it returns true or `budget` seconds pass. A
  /// step interrupted mid-way is discarded, so `value` holds whole steps only.
  template <class T, class Step>
  Budgeted<T> with_timeout(double budget, T value, Step step);

  const std::optional<MonitorState>& monitor() const { return monitor_; }
  const std::optional<MonitorState>& shadow() const { return shadow_; }

 private:
  struct BudgetInterrupt {
    double deadline;
  };
  struct BudgetScope {
    Conversation& c;
    ~BudgetScope() { c.budgets_.pop_back(); }
  };

  void wait_until(double t);
  std::optional<double> limit(bool* is_timeout);
  [[noreturn]] void fire(bool is_timeout, double at);
  void record(const ObservedEvent& e, double clock, std::optional<MonitorVerdict> v);
  [[noreturn]] void reject(const ObservedEvent& e, const MonitorVerdict& v);
  void watch(ObservedEvent e);

  std::unique_ptr<Port> port_;
  EndpointConfig cfg_;
  std::optional<MonitorState> monitor_;
  std::optional<MonitorState> shadow_;
  std::optional<std::pair<int, double>> fired_;  // (state, last reset) whose timeout already fired
  std::vector<double> budgets_;
};

template <class T, class Step>
Budgeted<T> Conversation::with_timeout(double budget, T value, Step step) {
  const double deadline = now() + budget;
  budgets_.push_back(deadline);
  BudgetScope scope{*this};
  try {
    while (true) {
      T next = value;
      bool done = step(next);
      value = std::move(next);
      if (done) return {std::move(value), false};
      if (now() >= deadline) return {std::move(value), true};
    }
  } catch (const BudgetInterrupt& e) {
    if (e.deadline != deadline) throw;
  }
  return {std::move(value), true};
}

struct EndpointProgram {
  EndpointConfig config;
  std::function<void(Conversation&)> program;
};

struct EndpointOutcome {
  std::string role;
  bool completed = false;  // program returned normally
  double finished_at = 0;
  std::string error;
};

struct SessionRun {
  std::vector<EndpointOutcome> outcomes;
  std::uint64_t steps = 0;  // scheduler task activations (virtual only)
  bool deadlock = false;
  double end_time = 0;

  const EndpointOutcome& outcome(const std::string& role) const;
};

}  // namespace tsv
