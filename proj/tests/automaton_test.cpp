#include <gtest/gtest.h>

#include "support/fixtures.hpp"
#include "support/generators.hpp"
#include "support/local_traces.hpp"
#include "tsv/automaton.hpp"
#include "tsv/checker.hpp"
#include "tsv/parser.hpp"
#include "tsv/printer.hpp"
#include "tsv/projector.hpp"

namespace tsv {
namespace {

using testing::read_fixture;

TimedAutomaton master() { return compile(parse_local(read_fixture("wordcount_M.tscr"))); }

TEST(Compile, WordCountMasterLoop) {
  TimedAutomaton a = master();
  EXPECT_EQ(a.role, "M");
  EXPECT_EQ(a.clock, "xm");
  EXPECT_EQ(a.states.size(), 6u);
  EXPECT_EQ(a.transitions.size(), 6u);

  const TATransition* task = a.find(a.initial, Direction::Send, "W", "task");
  ASSERT_TRUE(task);
  EXPECT_TRUE(task->reset);
  int loop = task->to;
  const TATransition* result = a.find(loop, Direction::Receive, "W", "result");
  ASSERT_TRUE(result);
  EXPECT_EQ(to_string(result->guard), "21.5<xm<22");
  int branch = result->to;
  EXPECT_EQ(a.outgoing(branch).size(), 2u);
  const TATransition* more_a = a.find(branch, Direction::Send, "A", "more");
  const TATransition* end_a = a.find(branch, Direction::Send, "A", "end");
  ASSERT_TRUE(more_a && end_a);
  const TATransition* more_w = a.find(more_a->to, Direction::Send, "W", "more");
  ASSERT_TRUE(more_w);
  EXPECT_TRUE(more_w->reset);
  EXPECT_EQ(more_w->to, loop);  // back edge after the reset
  const TATransition* end_w = a.find(end_a->to, Direction::Send, "W", "end");
  ASSERT_TRUE(end_w);
  EXPECT_TRUE(a.states[end_w->to].accepting);
  EXPECT_FALSE(a.states[loop].accepting);
}

TEST(Compile, EmptyProtocol) {
  TimedAutomaton a = compile(parse_local("local protocol P at A(role B) {}"));
  ASSERT_EQ(a.states.size(), 1u);
  EXPECT_TRUE(a.states[0].accepting);
  EXPECT_TRUE(a.transitions.empty());
}

TEST(Compile, AcceptingStatesHaveNoOutgoing) {
  for (const auto& [role, l] : project_all(parse_global(read_fixture("wordcount.tscr")))) {
    TimedAutomaton a = compile(l);
    int accepting = 0;
    for (const auto& s : a.states)
      if (s.accepting) {
        ++accepting;
        EXPECT_TRUE(a.outgoing(s.id).empty());
      }
    EXPECT_EQ(accepting, 1) << role;
  }
}

TEST(Compile, UnguardedContinueRejected) {
  EXPECT_THROW(compile(parse_local(R"(local protocol P at A(role B) {
      rec L { continue L; }
  })")),
               CompileError);
}

TEST(Compile, LoopAtChoiceStartGetsOwnHead) {
  TimedAutomaton a = compile(parse_local(R"(local protocol P at A(role B) {
      choice at A {
          rec L { [xa@A: true] tick() to B; continue L; }
      } or {
          [xa@A: true] stop() to B;
      }
  })"));
  // After one tick the stop branch is no longer offered.
  const TATransition* tick = a.find(a.initial, Direction::Send, "B", "tick");
  ASSERT_TRUE(tick);
  EXPECT_TRUE(a.find(a.initial, Direction::Send, "B", "stop"));
  EXPECT_FALSE(a.find(tick->to, Direction::Send, "B", "stop"));
  EXPECT_TRUE(a.find(tick->to, Direction::Send, "B", "tick"));
}

TEST(Compile, DuplicateActionIsNondeterministic) {
  LocalProtocol l = parse_local(R"(local protocol P at A(role B) {
      choice at A { [xa@A: xa<1] go() to B; } or { [xa@A: xa<1] go2() to B; }
  })");
  std::get<Send>(std::get<LocalChoice>(l.body[0].node).branches[1][0].node).label = "go";
  EXPECT_THROW(compile(l), NondeterminismError);
}

TEST(Export, DotEdgeLabels) {
  std::string dot = export_dot(master());
  EXPECT_NE(dot.find("digraph"), std::string::npos);
  EXPECT_NE(dot.find("label=\"! W:task [xm<1]{xm}\""), std::string::npos) << dot;
  EXPECT_NE(dot.find("label=\"? W:result [21.5<xm<22]{}\""), std::string::npos) << dot;
  int edges = 0;
  for (std::size_t p = dot.find("-> s"); p != std::string::npos; p = dot.find("-> s", p + 1)) ++edges;
  EXPECT_EQ(edges, 1 + 6);  // init arrow plus one per transition
}

TEST(Export, StructuredRoundTrip) {
  TimedAutomaton a = master();
  EXPECT_EQ(import_structured(export_structured(a)), a);
  EXPECT_THROW(import_structured("{\"format\": \"other\"}"), std::invalid_argument);
  EXPECT_THROW(import_structured("not json"), std::invalid_argument);
}

TEST(Export, RandomRoundTripAndDeterminism) {
  testing::GenParams params;
  params.max_roles = 4;
  params.max_interactions = 10;
  params.max_depth = 3;
  testing::ProtocolGen gen(404, params);
  int compiled = 0;
  for (int i = 0; i < 500; ++i) {
    GlobalProtocol g = gen.global();
    if (!check_determinism(g).holds) continue;
    for (const auto& [role, l] : project_all(g)) {
      TimedAutomaton a;
      ASSERT_NO_THROW(a = compile(l)) << print_protocol(l);
      ++compiled;
      EXPECT_EQ(import_structured(export_structured(a)), a);
      for (const auto& s : a.states) {
        std::set<ActionKey> keys;
        for (const auto* t : a.outgoing(s.id))
          EXPECT_TRUE(keys.emplace(t->action.dir, t->action.partner, t->action.label).second);
      }
    }
  }
  EXPECT_GT(compiled, 500);
}

// The automaton accepts exactly the timed executions of its local protocol,
// on a quarter-second grid with a bounded number of actions.
std::size_t expect_same_language(const LocalProtocol& l, testing::GridBounds b) {
  TimedAutomaton a = compile(l);
  testing::TraceSets direct = testing::LocalTraceEnumerator(l, b).run();
  testing::TraceSets encoded = testing::automaton_traces(a, b);
  EXPECT_EQ(direct.complete, encoded.complete) << print_protocol(l);
  EXPECT_EQ(direct.prefixes, encoded.prefixes) << print_protocol(l);
  return direct.prefixes.size();
}

TEST(Language, WordCountProjections) {
  for (const auto& [role, l] : project_all(parse_global(read_fixture("wordcount.tscr"))))
    EXPECT_GT(expect_same_language(l, {10, 600, 6}), 5u) << role;
}

TEST(Language, RandomStraightAndBranching) {
  testing::GenParams params;
  params.max_interactions = 6;
  params.allow_rec = false;
  params.narrow = true;
  params.max_const_steps = 12;
  testing::ProtocolGen gen(606, params);
  int n = 0;
  std::size_t traces = 0;
  for (int i = 0; i < 2000 && n < 400; ++i) {
    GlobalProtocol g = gen.global();
    if (!check_determinism(g).holds) continue;
    for (const auto& [role, l] : project_all(g)) {
      traces += expect_same_language(l, {4, 48, 6});
      ++n;
    }
  }
  EXPECT_GE(n, 400);
  EXPECT_GT(traces, 5u * n);
}

TEST(Language, RandomWithLoopsBoundedLength) {
  testing::GenParams params;
  params.max_interactions = 5;
  params.narrow = true;
  params.max_const_steps = 12;
  testing::ProtocolGen gen(607, params);
  int n = 0;
  std::size_t traces = 0;
  for (int i = 0; i < 2000 && n < 300; ++i) {
    GlobalProtocol g = gen.global();
    if (!check_determinism(g).holds) continue;
    for (const auto& [role, l] : project_all(g)) {
      traces += expect_same_language(l, {4, 40, 5});
      ++n;
    }
  }
  EXPECT_GE(n, 300);
  EXPECT_GT(traces, 4u * n);
}

}  // namespace
}  // namespace tsv
