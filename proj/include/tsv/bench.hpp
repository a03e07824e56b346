#pragma once

#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "tsv/ast.hpp"
#include "tsv/automaton.hpp"
#include "tsv/runtime.hpp"

namespace tsv {

/// The distributed word count protocol at full scale.
GlobalProtocol wordcount_protocol();
/// WordCount at benchmark scale (constants divided by 100, result window
/// 0.21<xm<0.22).
GlobalProtocol wordcount_bench_protocol();

/// n pings from C to S; the k-th is sent at xc<k·c and received at xs=k·c.
GlobalProtocol gen_scenario2(const Rational& c, int n);

/// Compiled automaton for every role.
std::map<std::string, std::shared_ptr<const TimedAutomaton>> compile_roles(const GlobalProtocol& g);

/// Endpoint programs for WordCount. Durations are in protocol time units and
/// multiplied by `scale`.
struct WordCountTiming {
  double scale = 1;
  int iterations = 1;             // result rounds before `end`
  double master_wait = 22;        // before each result receive
  double worker_gap = 3;          // after sending a result
  double aggregator_period = 23;  // between aggregator receives after the first
  double crawl_step = 5;

  /// Every role keeps M's 22-unit period, so the schedule stays within 1 unit
  /// of each guard indefinitely.
  static WordCountTiming lock_step(double scale, int iterations);
};

std::map<std::string, std::function<void(Conversation&)>> wordcount_programs(const WordCountTiming& t);

/// Client and server programs for the ping protocol.
std::map<std::string, std::function<void(Conversation&)>> scenario2_programs(double c, int n);

enum class ClockKind { Virtual, Wall };

struct BenchConfig {
  int scenario = 1;
  int iterations = 1;  // scenario 1
  Rational c{1, 100};  // scenario 2
  int n = 200;         // scenario 2
  bool monitored = false;
  ClockKind clock = ClockKind::Virtual;
  int repetitions = 30;
  double epsilon = -1;   // negative: scenario default
  double overhead = 0;   // synthetic cost per action, virtual clock only
};

double default_epsilon(const BenchConfig& cfg);

struct Repetition {
  double value = 0;    // completion time or correct interactions
  int violations = 0;  // non-Ok verdicts
  std::string error;
};

struct BenchResult {
  BenchConfig config;
  std::vector<Repetition> runs;
  double mean = 0;
  double stddev = 0;
};

/// Number of leading interactions whose send and receive both passed.
int correct_interactions(const std::vector<LogEntry>& log, int n);

/// First non-Ok verdict per role, replaying logged events through fresh
/// detect-mode monitors.
int replay_violations(const std::vector<LogEntry>& log,
                      const std::map<std::string, std::shared_ptr<const TimedAutomaton>>& automata, double epsilon);

BenchResult run_scenario1(const BenchConfig& cfg);
BenchResult run_scenario2(const BenchConfig& cfg);
BenchResult run_bench(const BenchConfig& cfg);

/// `scenario clock monitored param mean stddev reps` rows, tab-separated.
std::string tsv_header();
std::string tsv_row(const BenchResult& r);

}  // namespace tsv
