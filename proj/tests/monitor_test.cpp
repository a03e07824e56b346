#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "support/fixtures.hpp"
#include "support/generators.hpp"
#include "support/local_traces.hpp"
#include "tsv/automaton.hpp"
#include "tsv/checker.hpp"
#include "tsv/monitor.hpp"
#include "tsv/parser.hpp"
#include "tsv/printer.hpp"
#include "tsv/projector.hpp"

namespace tsv {
namespace {

using testing::read_fixture;

std::shared_ptr<const TimedAutomaton> automaton(const std::string& local) {
  return std::make_shared<const TimedAutomaton>(compile(parse_local(local)));
}

std::shared_ptr<const TimedAutomaton> master() { return automaton(read_fixture("wordcount_M.tscr")); }

ObservedEvent send(std::string to, std::string label, std::vector<std::string> sorts, double t) {
  return {Direction::Send, std::move(to), std::move(label), std::move(sorts), t};
}

ObservedEvent recv(std::string from, std::string label, std::vector<std::string> sorts, double t) {
  return {Direction::Receive, std::move(from), std::move(label), std::move(sorts), t};
}

TEST(Session, StartsAtInitialWithZeroClock) {
  MonitorState m = start_session(master(), 0.01, MonitorMode::Detect);
  EXPECT_EQ(m.current, m.automaton->initial);
  EXPECT_DOUBLE_EQ(m.clock_at(0), 0.0);
  EXPECT_FALSE(m.accepting());
}

TEST(Session, EmptyProtocolIsAccepting) {
  MonitorState m = start_session(automaton("local protocol P at A(role B) {}"), 0, MonitorMode::PreventRecover);
  EXPECT_TRUE(m.accepting());
  EXPECT_TRUE(plan_actions(m, 0).empty());
  EXPECT_FALSE(state_deadline(m));
  auto [after, v] = observe(m, send("B", "m", {}, 1));
  EXPECT_EQ(v.kind, VerdictKind::OrderViolation);
  EXPECT_EQ(v.expected, "end of protocol");
}

TEST(Observe, LateResultIsTimeException) {
  MonitorState m = start_session(master(), 0, MonitorMode::Detect);
  auto [m1, v1] = observe(m, send("W", "task", {"log", "string"}, 0));
  ASSERT_EQ(v1.kind, VerdictKind::Ok);
  auto [m2, v2] = observe(m1, recv("W", "result", {"data"}, 30));
  EXPECT_EQ(v2.kind, VerdictKind::TimeException);
  ASSERT_TRUE(v2.guard);
  EXPECT_EQ(to_string(*v2.guard), "21.5<xm<22");
  EXPECT_DOUBLE_EQ(v2.clock, 30.0);
  EXPECT_EQ(m2.current, m1.current);
}

TEST(Observe, TrueGuardAdvances) {
  MonitorState m = start_session(automaton("local protocol P at A(role B) { [xa@A: true] go() to B; }"), 0,
                                 MonitorMode::Detect);
  auto [after, v] = observe(m, send("B", "go", {}, 1e6));
  EXPECT_EQ(v.kind, VerdictKind::Ok);
  EXPECT_TRUE(after.accepting());
}

TEST(Observe, ResetMovesClockOrigin) {
  MonitorState m = start_session(master(), 0, MonitorMode::Detect);
  auto [m1, v1] = observe(m, send("W", "task", {"log", "string"}, 0.2));
  EXPECT_EQ(v1.kind, VerdictKind::Ok);
  EXPECT_DOUBLE_EQ(m1.last_reset, 0.2);
  EXPECT_DOUBLE_EQ(m1.clock_at(21.9), 21.7);
  // 21.6 on the session clock is only 21.4 on the reset clock.
  EXPECT_EQ(observe(m1, recv("W", "result", {"data"}, 21.6)).second.kind, VerdictKind::TimeException);
  EXPECT_EQ(observe(m1, recv("W", "result", {"data"}, 21.9)).second.kind, VerdictKind::Ok);
}

TEST(Observe, TypeAndOrderViolations) {
  MonitorState m = start_session(master(), 0, MonitorMode::Detect);
  auto [m1, v1] = observe(m, send("W", "task", {"log"}, 0));
  EXPECT_EQ(v1.kind, VerdictKind::TypeViolation);
  EXPECT_EQ(v1.expected, "! W:task(log,string)");
  EXPECT_EQ(v1.got, "! W:task(log)");
  EXPECT_EQ(m1.current, m.current);

  auto [m2, v2] = observe(m, recv("W", "result", {"data"}, 0));
  EXPECT_EQ(v2.kind, VerdictKind::OrderViolation);
  EXPECT_EQ(v2.expected, "! W:task");
  EXPECT_EQ(v2.got, "? W:result");

  // Right label, wrong partner.
  EXPECT_EQ(observe(m, send("A", "task", {"log", "string"}, 0)).second.kind, VerdictKind::OrderViolation);
}

TEST(Observe, PreventModeReturnsNextActions) {
  MonitorState m = start_session(master(), 0, MonitorMode::PreventRecover);
  auto [m1, v] = observe(m, send("W", "task", {"log", "string"}, 0.5));
  EXPECT_EQ(v.kind, VerdictKind::OkWithActions);
  ASSERT_EQ(v.actions.size(), 2u);
  EXPECT_EQ(std::get<SleepAction>(v.actions[0]), (SleepAction{21.5, true}));
  EXPECT_EQ(std::get<ArmTimeoutAction>(v.actions[1]), (ArmTimeoutAction{22}));
}

// Exact oracle: some v' in [v-eps, v+eps] lies in the interval.
bool within(const ClockConstraint& c, Rational v, Rational eps) {
  Rational lo = v - eps, hi = v + eps;
  bool lo_strict = false, hi_strict = false;
  if (c.lower.value > lo || (c.lower.value == lo && c.lower.strict)) lo = c.lower.value, lo_strict = c.lower.strict;
  if (!c.upper.unbounded && (c.upper.value < hi || (c.upper.value == hi && c.upper.strict)))
    hi = c.upper.value, hi_strict = c.upper.strict;
  return lo < hi || (lo == hi && !lo_strict && !hi_strict);
}

TEST(Detection, SoundAcrossStrictnessAndTolerance) {
  const char* guards[] = {"2<=xa<=3", "2<xa<=3", "2<=xa<3", "2<xa<3"};
  const std::pair<double, Rational> tolerances[] = {{0, Rational(0)}, {0.01, Rational(1, 100)}, {0.5, Rational(1, 2)}};
  for (const char* g : guards)
    for (Direction dir : {Direction::Send, Direction::Receive}) {
      std::string stmt = dir == Direction::Send ? "go() to B;" : "go() from B;";
      auto a = automaton(std::string("local protocol P at A(role B) { [xa@A: ") + g + "] " + stmt + " }");
      ClockConstraint c = a->transitions[0].guard;
      for (const auto& [eps, eps_exact] : tolerances) {
        int accepted = 0, rejected = 0;
        for (int i = 0; i <= 4 * 256; ++i) {
          Rational v(i, 256);  // dyadic, so exact in double
          MonitorState m = start_session(a, eps, MonitorMode::Detect);
          auto [after, verdict] = observe(m, {dir, "B", "go", {}, i / 256.0});
          bool expect_ok = within(c, v, eps_exact);
          EXPECT_EQ(verdict.kind, expect_ok ? VerdictKind::Ok : VerdictKind::TimeException)
              << g << " eps=" << eps << " v=" << to_decimal(v);
          EXPECT_EQ(after.accepting(), expect_ok);
          (expect_ok ? accepted : rejected)++;
        }
        EXPECT_GT(accepted, 200);
        EXPECT_GT(rejected, 200);
      }
    }
}

TEST(Detection, ToleranceAcceptsPaperExample) {
  auto a = automaton("local protocol P at A(role B) { [xa@A: xa=18] go() to B; }");
  EXPECT_EQ(observe(start_session(a, kWallEpsilon, MonitorMode::Detect), send("B", "go", {}, 18.35001073)).second.kind,
            VerdictKind::Ok);
  EXPECT_EQ(observe(start_session(a, kVirtualEpsilon, MonitorMode::Detect), send("B", "go", {}, 18.35001073))
                .second.kind,
            VerdictKind::TimeException);
}

// Replays a valid trace, then every swap of two events with distinct keys:
// the first divergent event is rejected on type or order. `siblings` lists
// labels that open alternative branches of one choice.
void check_order_soundness(const std::shared_ptr<const TimedAutomaton>& a, const testing::Trace& trace,
                           std::int64_t ticks, const std::set<std::set<std::string>>& siblings = {}) {
  std::map<ActionKey, std::vector<std::string>> sorts;
  for (const auto& t : a->transitions) sorts[{t.action.dir, t.action.partner, t.action.label}] = t.action.sorts;
  auto to_event = [&](const testing::TimedEvent& e, std::int64_t t) {
    return ObservedEvent{e.dir, e.partner, e.label, sorts.at({e.dir, e.partner, e.label}),
                         static_cast<double>(t) / ticks};
  };
  MonitorState m = start_session(a, 0, MonitorMode::Detect);
  for (const auto& e : trace) {
    auto [next, v] = observe(m, to_event(e, e.t));
    ASSERT_EQ(v.kind, VerdictKind::Ok) << e.label;
    m = next;
  }
  EXPECT_TRUE(m.accepting());

  for (std::size_t i = 0; i < trace.size(); ++i)
    for (std::size_t j = i + 1; j < trace.size(); ++j) {
      auto key = [](const testing::TimedEvent& e) { return std::tie(e.dir, e.partner, e.label); };
      if (key(trace[i]) == key(trace[j])) continue;
      if (siblings.count({trace[i].label, trace[j].label})) continue;
      testing::Trace swapped = trace;
      std::swap(swapped[i], swapped[j]);
      MonitorState s = start_session(a, 0, MonitorMode::Detect);
      for (std::size_t k = 0; k <= i; ++k) {
        auto [next, v] = observe(s, to_event(swapped[k], trace[k].t));
        if (k < i) {
          ASSERT_EQ(v.kind, VerdictKind::Ok);
        } else {
          EXPECT_TRUE(v.kind == VerdictKind::OrderViolation || v.kind == VerdictKind::TypeViolation)
              << "swap " << i << "," << j << " got " << to_string(v.kind);
        }
        s = next;
      }
    }
}

TEST(Order, WordCountMasterPermutations) {
  testing::Trace trace = {
      {Direction::Send, "W", "task", 0},      {Direction::Receive, "W", "result", 2175},
      {Direction::Send, "A", "more", 2200},   {Direction::Send, "W", "more", 2200},
      {Direction::Receive, "W", "result", 4380}, {Direction::Send, "A", "end", 4400},
      {Direction::Send, "W", "end", 4400}};
  check_order_soundness(master(), trace, 100, {{"more", "end"}});
}

TEST(Order, GeneratedLinearProtocols) {
  testing::GenParams params;
  params.max_interactions = 6;
  params.allow_choice = false;
  params.narrow = true;
  testing::ProtocolGen gen(808, params);
  int traces = 0;
  for (int i = 0; i < 300; ++i) {
    GlobalProtocol g = gen.global();
    for (const auto& [role, l] : project_all(g)) {
      auto a = std::make_shared<const TimedAutomaton>(compile(l));
      testing::TraceSets sets = testing::LocalTraceEnumerator(l, {4, 60, 6}).run();
      if (sets.complete.empty()) continue;
      ++traces;
      check_order_soundness(a, *sets.complete.begin(), 4);
    }
  }
  EXPECT_GT(traces, 200);
}

TEST(Plan, SendLowerBoundSleepsAfter) {
  auto a = automaton("local protocol P at A(role B) { [xa@A: xa>=5] go() to B; }");
  auto plan = plan_actions(start_session(a, 0, MonitorMode::PreventRecover), 2);
  ASSERT_EQ(plan.size(), 1u);
  EXPECT_FALSE(plan[0].pre);
  ASSERT_TRUE(plan[0].post);
  EXPECT_EQ(std::get<SleepAction>(*plan[0].post), (SleepAction{3, false}));
}

TEST(Plan, TrueReceiveHasNoActions) {
  auto a = automaton("local protocol P at A(role B) { [xa@A: true] go() from B; }");
  auto plan = plan_actions(start_session(a, 0, MonitorMode::PreventRecover), 0);
  ASSERT_EQ(plan.size(), 1u);
  EXPECT_FALSE(plan[0].pre);
  EXPECT_FALSE(plan[0].post);
}

TEST(Plan, DoubleBoundedReceive) {
  MonitorState m = start_session(master(), 0, MonitorMode::PreventRecover);
  m = observe(m, send("W", "task", {"log", "string"}, 0)).first;
  auto plan = plan_actions(m, 0);
  ASSERT_EQ(plan.size(), 1u);
  EXPECT_EQ(std::get<SleepAction>(*plan[0].pre), (SleepAction{21.5, true}));
  EXPECT_EQ(std::get<ArmTimeoutAction>(*plan[0].post), (ArmTimeoutAction{22}));
}

TEST(Plan, EqualityIsBothBounds) {
  auto a = automaton("local protocol P at A(role B) { [xa@A: xa=4] go() to B; [xa@A: xa=6] back() from B; }");
  MonitorState m = start_session(a, 0, MonitorMode::PreventRecover);
  auto plan = plan_actions(m, 1);
  EXPECT_EQ(std::get<ArmTimeoutAction>(*plan[0].pre), (ArmTimeoutAction{3}));
  EXPECT_EQ(std::get<SleepAction>(*plan[0].post), (SleepAction{3, false}));
  m = observe(m, send("B", "go", {}, 4)).first;
  plan = plan_actions(m, 4.5);
  EXPECT_EQ(std::get<SleepAction>(*plan[0].pre), (SleepAction{1.5, false}));
  EXPECT_EQ(std::get<ArmTimeoutAction>(*plan[0].post), (ArmTimeoutAction{1.5}));
}

TEST(Plan, NegativeRemainderClampsToZero) {
  auto a = automaton("local protocol P at A(role B) { [xa@A: 1<=xa<=2] go() to B; }");
  auto plan = plan_actions(start_session(a, 0, MonitorMode::PreventRecover), 7);
  EXPECT_EQ(std::get<ArmTimeoutAction>(*plan[0].pre), (ArmTimeoutAction{0}));
  EXPECT_EQ(std::get<SleepAction>(*plan[0].post), (SleepAction{0, false}));
}

TEST(Plan, BranchesUseWidestWindow) {
  auto a = automaton(R"(local protocol P at A(role B) {
      choice at B { [xa@A: 1<xa<3] a() from B; } or { [xa@A: 2<=xa<=5] b() from B; }
  })");
  MonitorState m = start_session(a, 0, MonitorMode::PreventRecover);
  auto plan = plan_actions(m, 0.25);
  ASSERT_EQ(plan.size(), 2u);
  for (const auto& p : plan) {
    EXPECT_EQ(std::get<SleepAction>(*p.pre), (SleepAction{0.75, true}));
    EXPECT_EQ(std::get<ArmTimeoutAction>(*p.post), (ArmTimeoutAction{4.75}));
  }
  EXPECT_EQ(state_deadline(m), 5.0);
}

TEST(Plan, UnboundedBranchDisablesTimeout) {
  auto a = automaton(R"(local protocol P at A(role B) {
      choice at B { [xa@A: xa<3] a() from B; } or { [xa@A: xa>=2] b() from B; }
  })");
  MonitorState m = start_session(a, 0, MonitorMode::PreventRecover);
  EXPECT_FALSE(state_deadline(m));
  for (const auto& p : plan_actions(m, 0)) {
    EXPECT_FALSE(p.pre);  // a() has no lower bound
    EXPECT_FALSE(p.post);
  }
}

TEST(Plan, TableAgreesWithGuardsOnRandomConstraints) {
  testing::ProtocolGen gen(21);
  std::mt19937 rng(5);
  std::uniform_int_distribution<int> tick(0, 60);
  for (int i = 0; i < 2000; ++i) {
    ClockConstraint c = gen.constraint("xa");
    bool is_send = i % 2 == 0;
    std::string text = std::string("local protocol P at A(role B) { [xa@A: ") + to_string(c) + "] go() " +
                       (is_send ? "to" : "from") + " B; }";
    auto a = automaton(text);
    double x = tick(rng) / 4.0;
    auto plan = plan_actions(start_session(a, 0, MonitorMode::PreventRecover), x);
    ASSERT_EQ(plan.size(), 1u);
    const auto& sleep = is_send ? plan[0].post : plan[0].pre;
    const auto& timeout = is_send ? plan[0].pre : plan[0].post;
    ASSERT_EQ(sleep.has_value(), c.has_lower()) << text;
    ASSERT_EQ(timeout.has_value(), c.has_upper()) << text;
    if (sleep) {
      SleepAction s = std::get<SleepAction>(*sleep);
      EXPECT_DOUBLE_EQ(s.duration, std::max(0.0, to_seconds(c.lower.value) - x));
      EXPECT_EQ(s.strict, c.lower.strict);
    }
    if (timeout) EXPECT_DOUBLE_EQ(std::get<ArmTimeoutAction>(*timeout).duration,
                                  std::max(0.0, to_seconds(c.upper.value) - x));
  }
}

TEST(Timeout, DeadlineFollowsLastReset) {
  MonitorState m = start_session(master(), 0, MonitorMode::PreventRecover);
  EXPECT_EQ(state_deadline(m), 1.0);
  m = observe(m, send("W", "task", {"log", "string"}, 0.4)).first;
  EXPECT_DOUBLE_EQ(*state_deadline(m), 22.4);
  MonitorVerdict v = on_timeout(m, *state_deadline(m));
  EXPECT_EQ(v.kind, VerdictKind::TimeoutException);
  EXPECT_DOUBLE_EQ(v.deadline, 22.4);
  // The state is untouched, so a late result is still judged.
  EXPECT_TRUE(observe(m, recv("W", "result", {"data"}, 22.3)).second.ok());
}

TEST(Log, LineFormat) {
  MonitorVerdict v;
  v.kind = VerdictKind::TimeException;
  EXPECT_EQ(log_line(30, "c1", "M", recv("W", "result", {"data"}, 30), 29.5, v),
            "ts=30.000000000 conv=c1 role=M dir=? partner=W label=result x=29.500000000 verdict=TimeException");
}

}  // namespace
}  // namespace tsv
