#pragma once

#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "tsv/automaton.hpp"

namespace tsv {

enum class MonitorMode { Detect, PreventRecover };

/// Default tolerance: generous on wall clocks, exact on virtual time.
constexpr double kWallEpsilon = 0.5;
constexpr double kVirtualEpsilon = 0.0;

struct ObservedEvent {
  Direction dir = Direction::Send;
  std::string partner;
  std::string label;
  std::vector<std::string> sorts;
  /// Seconds since session start.
  double time = 0;
};

/// Delay forwarding (send) or reading (receive). `strict` means the bound is
/// open, so the action must happen strictly after the sleep ends.
struct SleepAction {
  double duration = 0;
  bool strict = false;
  friend bool operator==(const SleepAction&, const SleepAction&) = default;
};

/// Raise TimeoutException if the prescribed action has not happened within
/// `duration` seconds.
struct ArmTimeoutAction {
  double duration = 0;
  friend bool operator==(const ArmTimeoutAction&, const ArmTimeoutAction&) = default;
};

using MonitorAction = std::variant<SleepAction, ArmTimeoutAction>;

struct PlannedActions {
  const TATransition* transition = nullptr;
  std::optional<MonitorAction> pre;
  std::optional<MonitorAction> post;
};

enum class VerdictKind { Ok, OkWithActions, TypeViolation, OrderViolation, TimeException, TimeoutException };

std::string to_string(VerdictKind k);

struct MonitorVerdict {
  VerdictKind kind = VerdictKind::Ok;
  std::vector<MonitorAction> actions;
  /// TypeViolation / OrderViolation: what the automaton allowed and what came.
  std::string expected;
  std::string got;
  /// TimeException: the failed guard and the clock reading.
  std::optional<ClockConstraint> guard;
  double clock = 0;
  /// TimeoutException: absolute deadline, seconds since session start.
  double deadline = 0;

  bool ok() const { return kind == VerdictKind::Ok || kind == VerdictKind::OkWithActions; }
};

struct MonitorState {
  std::shared_ptr<const TimedAutomaton> automaton;
  int current = 0;
  /// Absolute instant of session start on the injected clock.
  double clock_zero = 0;
  /// Seconds since session start of the last reset.
  double last_reset = 0;
  double epsilon = 0;
  MonitorMode mode = MonitorMode::Detect;

  bool accepting() const { return automaton->states[current].accepting; }
  /// Clock value at `time` seconds since session start.
  double clock_at(double time) const { return time - last_reset; }
};

MonitorState start_session(std::shared_ptr<const TimedAutomaton> a, double epsilon, MonitorMode mode,
                           double start_instant = 0);

/// Judges one event. On success the state advances and any reset is applied;
/// on a violation the state is returned unchanged.
std::pair<MonitorState, MonitorVerdict> observe(MonitorState m, const ObservedEvent& e);

/// Recovery actions for each outgoing transition at clock reading `now`
/// (seconds since session start).
std::vector<PlannedActions> plan_actions(const MonitorState& m, double now);

/// Latest instant (seconds since session start) by which some outgoing
/// action can still satisfy its guard; none when a guard is unbounded or the
/// state is accepting.
std::optional<double> state_deadline(const MonitorState& m);

/// Earliest instant at which some outgoing action in direction `dir` becomes
/// allowed, with the strictness of that bound. Used for receive pre-sleeps.
std::optional<SleepAction> earliest(const MonitorState& m, Direction dir, double now);

MonitorVerdict on_timeout(const MonitorState& m, double deadline);

/// `ts=<s> conv=<id> role=<r> dir=<!|?> partner=<p> label=<l> x=<clock> verdict=<V>`
std::string log_line(double ts, const std::string& conv, const std::string& role, const ObservedEvent& e,
                     double clock, const MonitorVerdict& v);

/// Fixed 9-decimal rendering used in logs and on the wire.
std::string format_seconds(double s);

}  // namespace tsv
