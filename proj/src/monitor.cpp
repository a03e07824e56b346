#include "tsv/monitor.hpp"

#include <algorithm>
#include <cstdio>

namespace tsv {
namespace {

std::string describe(Direction dir, const std::string& partner, const std::string& label) {
  return std::string(dir == Direction::Send ? "!" : "?") + " " + partner + ":" + label;
}

std::string describe_sorts(const std::vector<std::string>& sorts) {
  std::string out = "(";
  for (std::size_t i = 0; i < sorts.size(); ++i) out += (i ? "," : "") + sorts[i];
  return out + ")";
}

std::string allowed(const MonitorState& m) {
  if (m.accepting()) return "end of protocol";
  std::string out;
  for (const auto* t : m.automaton->outgoing(m.current)) {
    if (!out.empty()) out += " | ";
    out += describe(t->action.dir, t->action.partner, t->action.label);
  }
  return out;
}

double remaining(const Rational& bound, double x) { return std::max(0.0, to_seconds(bound) - x); }

}  // namespace

std::string to_string(VerdictKind k) {
  switch (k) {
    case VerdictKind::Ok:
      return "Ok";
    case VerdictKind::OkWithActions:
      return "OkWithActions";
    case VerdictKind::TypeViolation:
      return "TypeViolation";
    case VerdictKind::OrderViolation:
      return "OrderViolation";
    case VerdictKind::TimeException:
      return "TimeException";
    case VerdictKind::TimeoutException:
      return "TimeoutException";
  }
  return "?";
}

MonitorState start_session(std::shared_ptr<const TimedAutomaton> a, double epsilon, MonitorMode mode,
                           double start_instant) {
  MonitorState m;
  m.current = a->initial;
  m.automaton = std::move(a);
  m.clock_zero = start_instant;
  m.epsilon = epsilon;
  m.mode = mode;
  return m;
}

std::pair<MonitorState, MonitorVerdict> observe(MonitorState m, const ObservedEvent& e) {
  MonitorVerdict v;
  std::string got = describe(e.dir, e.partner, e.label);
  const TATransition* t = m.accepting() ? nullptr : m.automaton->find(m.current, e.dir, e.partner, e.label);
  if (!t) {
    v.kind = VerdictKind::OrderViolation;
    v.expected = allowed(m);
    v.got = got;
    return {std::move(m), v};
  }
  if (t->action.sorts != e.sorts) {
    v.kind = VerdictKind::TypeViolation;
    v.expected = got + describe_sorts(t->action.sorts);
    v.got = got + describe_sorts(e.sorts);
    return {std::move(m), v};
  }
  double x = m.clock_at(e.time);
  v.clock = x;
  if (!constraint_sat(t->guard, x, m.epsilon)) {
    v.kind = VerdictKind::TimeException;
    v.guard = t->guard;
    return {std::move(m), v};
  }
  m.current = t->to;
  if (t->reset) m.last_reset = e.time;
  if (m.mode == MonitorMode::PreventRecover) {
    for (const auto& p : plan_actions(m, e.time)) {
      if (p.pre) v.actions.push_back(*p.pre);
      if (p.post) v.actions.push_back(*p.post);
    }
    if (!v.actions.empty()) v.kind = VerdictKind::OkWithActions;
  }
  return {std::move(m), v};
}

std::optional<SleepAction> earliest(const MonitorState& m, Direction dir, double now) {
  if (m.accepting()) return std::nullopt;
  std::optional<Bound> lo;
  for (const auto* t : m.automaton->outgoing(m.current)) {
    if (t->action.dir != dir) continue;
    if (!t->guard.has_lower()) return std::nullopt;
    const Bound& b = t->guard.lower;
    if (!lo || b.value < lo->value || (b.value == lo->value && !b.strict)) lo = b;
  }
  if (!lo) return std::nullopt;
  return SleepAction{remaining(lo->value, m.clock_at(now)), lo->strict};
}

std::optional<double> state_deadline(const MonitorState& m) {
  if (m.accepting()) return std::nullopt;
  auto out = m.automaton->outgoing(m.current);
  if (out.empty()) return std::nullopt;
  Rational hi(0);
  for (const auto* t : out) {
    if (!t->guard.has_upper()) return std::nullopt;
    hi = std::max(hi, t->guard.upper.value);
  }
  return m.last_reset + to_seconds(hi);
}

std::vector<PlannedActions> plan_actions(const MonitorState& m, double now) {
  std::vector<PlannedActions> out;
  if (m.accepting()) return out;
  double x = m.clock_at(now);
  std::optional<double> deadline = state_deadline(m);
  std::optional<ArmTimeoutAction> timeout;
  if (deadline) timeout = ArmTimeoutAction{std::max(0.0, *deadline - now)};
  std::optional<SleepAction> read_sleep = earliest(m, Direction::Receive, now);

  for (const auto* t : m.automaton->outgoing(m.current)) {
    PlannedActions p;
    p.transition = t;
    if (t->action.dir == Direction::Send) {
      if (t->guard.has_lower()) p.post = SleepAction{remaining(t->guard.lower.value, x), t->guard.lower.strict};
      if (timeout) p.pre = *timeout;
    } else {
      if (read_sleep) p.pre = *read_sleep;
      if (timeout) p.post = *timeout;
    }
    out.push_back(p);
  }
  return out;
}

MonitorVerdict on_timeout(const MonitorState&, double deadline) {
  MonitorVerdict v;
  v.kind = VerdictKind::TimeoutException;
  v.deadline = deadline;
  return v;
}

std::string format_seconds(double s) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9f", s);
  return buf;
}

std::string log_line(double ts, const std::string& conv, const std::string& role, const ObservedEvent& e,
                     double clock, const MonitorVerdict& v) {
  return "ts=" + format_seconds(ts) + " conv=" + conv + " role=" + role + " dir=" +
         (e.dir == Direction::Send ? "!" : "?") + " partner=" + e.partner + " label=" + e.label +
         " x=" + format_seconds(clock) + " verdict=" + to_string(v.kind);
}

}  // namespace tsv
