// Acceptance run: one PASS/FAIL line per criterion.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>

#include "support/fixtures.hpp"
#include "tsv/bench.hpp"
#include "tsv/checker.hpp"
#include "tsv/parser.hpp"
#include "tsv/printer.hpp"
#include "tsv/projector.hpp"
#include "tsv/tcp.hpp"
#include "tsv/virtual_net.hpp"

using namespace tsv;
using testing::read_fixture;

namespace {

// Pinned tolerances.
constexpr double kCheckerBudget = 1.0;         // seconds for criterion 1
constexpr double kWakeSlack = 0.02;            // OS wake-up allowance past a wall timeout
constexpr double kSlopeLimit = 0.001;          // seconds per iteration
constexpr double kWallRuntimeLimit = 180;      // seconds for K = 100
constexpr double kRatio = 0.9;
constexpr int kFirstViolationLow = 20, kFirstViolationHigh = 200;
constexpr int kTargetInteractions = 100;
constexpr int kRepetitions = 30;

struct Outcome {
  bool pass = true;
  std::ostringstream detail;
  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << " [failed: " << what << "]";
    }
  }
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", digits, v);
  return buf;
}

void criterion1(Outcome& o) {
  auto t0 = std::chrono::steady_clock::now();
  CheckReport left = check(parse_global(read_fixture("foobar_left.tscr")));
  CheckReport right = check(parse_global(read_fixture("foobar_right.tscr")));
  CheckReport wc = check(parse_global(read_fixture("wordcount.tscr")));
  double took = seconds_since(t0);
  auto is = [](const CheckReport& r, std::optional<int> w, const std::string& label) {
    if (!w) return false;
    const EventNode& n = r.dag.nodes[*w];
    return n.owner == "B" && n.kind == EventKind::Receive && n.label == label;
  };
  o.require(!left.feasible.holds && is(left, left.feasible.witness, "msg"), "left not-feasible at B's receive");
  o.require(right.feasible.holds && !right.wait_free.holds && is(right, right.wait_free.witness, "M1"),
            "right not-wait-free at B's receive of M1");
  o.require(wc.feasible.holds && wc.wait_free.holds && wc.deterministic.holds, "WordCount passes");
  o.require(took < kCheckerBudget, "runtime < 1s");
  o.detail << "checked 3 protocols in " << fmt(took * 1000, 3) << " ms";
}

void criterion2(Outcome& o) {
  LocalProtocol got = project(parse_global(read_fixture("wordcount.tscr")), "M");
  LocalProtocol want = parse_local(read_fixture("wordcount_M.tscr"));
  o.require(got == want, "project(WordCount, M) equals the local listing");
  o.detail << "AST equal: " << (got == want ? "yes" : "no");
}

using ProgramMap = std::map<std::string, std::function<void(Conversation&)>>;

std::vector<EndpointProgram> endpoints(const ProgramMap& programs, const std::shared_ptr<EventLog>& log,
                                       const std::function<void(EndpointConfig&)>& configure) {
  std::vector<EndpointProgram> out;
  for (const auto& [role, p] : programs) {
    EndpointConfig c;
    c.role = role;
    c.protocol = "WordCount";
    c.log = log;
    configure(c);
    out.push_back({c, p});
  }
  return out;
}

void criterion3(Outcome& o) {
  auto automata = compile_roles(wordcount_protocol());
  WordCountTiming t;
  t.master_wait = 30;
  auto log = std::make_shared<EventLog>();
  run_virtual(endpoints(wordcount_programs(t), log, [&](EndpointConfig& c) {
    c.monitor = MonitorConfig{automata.at(c.role), MonitorMode::Detect, 0};
  }));
  std::vector<LogEntry> bad;
  for (const auto& e : log->entries())
    if (e.kind() != VerdictKind::Ok) bad.push_back(e);
  o.require(bad.size() == 1, "exactly one non-Ok verdict");
  if (!bad.empty()) {
    const LogEntry& e = bad.front();
    o.require(e.kind() == VerdictKind::TimeException && e.role == "M" && e.event.label == "result" && e.ts == 30.0,
              "TimeException at M's result receive, t=30");
    o.detail << e.line();
  }
}

void criterion4(Outcome& o) {
  auto automata = compile_roles(wordcount_protocol());
  WordCountTiming t;
  t.master_wait = 0;
  auto log = std::make_shared<EventLog>();
  SessionRun run = run_virtual(endpoints(wordcount_programs(t), log, [&](EndpointConfig& c) {
    if (c.role == "M") c.monitor = MonitorConfig{automata.at(c.role), MonitorMode::PreventRecover, 0};
    c.shadow = MonitorConfig{automata.at(c.role), MonitorMode::Detect, 0};
  }));
  int events = 0, violations = 0;
  for (const auto& e : log->entries()) {
    ++events;
    if (!e.shadow || e.shadow->kind != VerdictKind::Ok) ++violations;
  }
  for (const auto& r : run.outcomes) o.require(r.completed, r.role + " completes");
  o.require(events == 8, "8 network-visible events");
  o.require(violations == 0, "shadow monitor at eps=0 accepts every event");
  o.detail << events << " events, " << violations << " shadow violations";
}

double timeout_instant(bool wall, const std::string& deadline_text, double epsilon) {
  auto a = std::make_shared<const TimedAutomaton>(
      compile(parse_local("local protocol P at A(role B) { [xa@A: xa<" + deadline_text + "] go() to B; }")));
  const double deadline = to_seconds(*parse_decimal(deadline_text));
  double fired = -1;
  std::vector<EndpointProgram> eps(2);
  eps[0].config.role = "A";
  eps[0].config.monitor = MonitorConfig{a, MonitorMode::PreventRecover, epsilon};
  eps[0].program = [&](Conversation& c) {
    try {
      c.delay(deadline * 10);
    } catch (const VerdictError& e) {
      if (e.kind() == VerdictKind::TimeoutException) fired = c.now();
    }
  };
  eps[1].config.role = "B";
  eps[1].program = [](Conversation&) {};
  if (wall)
    run_wall(eps);
  else
    run_virtual(eps);
  return fired;
}

void criterion5(Outcome& o) {
  double v = timeout_instant(false, "10", 0);
  o.require(v == 10.0, "virtual TimeoutException exactly at 10");
  const double deadline = 0.2, eps = 0.05;
  double w = timeout_instant(true, "0.2", eps);
  o.require(w >= deadline && w - deadline <= eps + kWakeSlack, "wall TimeoutException within eps (+wake slack)");
  o.detail << "virtual at " << fmt(v, 9) << "s; wall deadline " << deadline << "s eps " << eps << "s fired at "
           << fmt(w, 6) << "s";
}

void criterion6(Outcome& o) {
  for (int k : {1, 10, 100, 1000}) {
    double arms[2];
    for (bool monitored : {false, true}) {
      BenchConfig cfg;
      cfg.iterations = k;
      cfg.monitored = monitored;
      cfg.repetitions = 1;
      BenchResult r = run_bench(cfg);
      arms[monitored] = r.mean;
      o.require(to_ns(r.mean) == 10'000'000 + 220'000'000LL * k, "virtual K=" + std::to_string(k) + " exact");
      o.require(r.runs[0].violations == 0 && r.runs[0].error.empty(), "virtual K=" + std::to_string(k) + " clean");
    }
    o.require(arms[0] == arms[1], "monitored = unmonitored at K=" + std::to_string(k));
  }
  o.detail << "virtual exact for K in {1,10,100,1000}; wall";
  std::vector<double> ks, deltas;
  double k100_runtime = 0;
  for (int k : {1, 10, 100}) {
    double arms[2];
    for (bool monitored : {false, true}) {
      BenchConfig cfg;
      cfg.iterations = k;
      cfg.monitored = monitored;
      cfg.clock = ClockKind::Wall;
      cfg.repetitions = 1;
      auto t0 = std::chrono::steady_clock::now();
      BenchResult r = run_bench(cfg);
      if (k == 100) k100_runtime = std::max(k100_runtime, seconds_since(t0));
      arms[monitored] = r.mean;
      o.require(r.runs[0].violations == 0 && r.runs[0].error.empty(), "wall K=" + std::to_string(k) + " clean");
    }
    ks.push_back(k);
    deltas.push_back(arms[1] - arms[0]);
    o.detail << " K=" << k << " delta=" << fmt(deltas.back() * 1000, 3) << "ms";
  }
  double mk = 0, md = 0;
  for (std::size_t i = 0; i < ks.size(); ++i) mk += ks[i] / ks.size(), md += deltas[i] / ks.size();
  double num = 0, den = 0;
  for (std::size_t i = 0; i < ks.size(); ++i) num += (ks[i] - mk) * (deltas[i] - md), den += (ks[i] - mk) * (ks[i] - mk);
  double slope = num / den;
  o.require(std::abs(slope) < kSlopeLimit, "|slope| < 1 ms per iteration");
  o.require(k100_runtime < kWallRuntimeLimit, "K=100 wall run within limit");
  o.detail << "; slope " << fmt(slope * 1e6, 3) << " us/iteration; K=100 took " << fmt(k100_runtime, 3) << "s";
}

// Mean per-interaction lag of the server behind k·c in unmonitored wall runs.
double measure_drift(double c, int n) {
  std::vector<double> samples;
  for (int rep = 0; rep < 3; ++rep) {
    auto log = std::make_shared<EventLog>();
    std::vector<EndpointProgram> eps;
    for (auto& [role, p] : scenario2_programs(c, n)) {
      EndpointConfig cfg;
      cfg.role = role;
      cfg.log = log;
      eps.push_back({cfg, p});
    }
    run_wall(eps);
    int k = 0;
    double last = 0;
    for (const auto& e : log->entries())
      if (e.role == "S") ++k, last = e.ts;
    if (k == n) samples.push_back((last - n * c) / n);
  }
  if (samples.empty()) return -1;
  std::sort(samples.begin(), samples.end());
  return samples[samples.size() / 2];
}

int predicted_interactions(std::int64_t c, std::int64_t o, std::int64_t eps, int n) {
  for (int k = 1; k <= n; ++k) {
    std::int64_t send = k * o + (k - 1) * c, recv = k * (c + o), target = k * c;
    if (!(send - eps < target) || !(recv - eps <= target && recv + eps >= target)) return k - 1;
  }
  return n;
}

struct RatioEstimate {
  double mean = 0, base_mean = 0, ratio = 0, upper = 0;
};

// Ratio of means for paired samples, with a one-sided 95% upper bound from
// the delta method.
RatioEstimate paired_ratio(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  RatioEstimate r;
  for (std::size_t i = 0; i < x.size(); ++i) r.mean += x[i] / n, r.base_mean += y[i] / n;
  r.ratio = r.mean / r.base_mean;
  double var = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    double d = (x[i] - r.mean) - r.ratio * (y[i] - r.base_mean);
    var += d * d / (n - 1);
  }
  r.upper = r.ratio + 1.645 * std::sqrt(var / n) / r.base_mean;
  return r;
}

void criterion7(Outcome& o) {
  const std::int64_t ms = 1'000'000;
  int cases = 0;
  for (std::int64_t over : {ms / 4, ms, 3 * ms})
    for (std::int64_t eps : {2 * ms, 20 * ms, 100 * ms})
      for (bool monitored : {false, true}) {
        BenchConfig cfg;
        cfg.scenario = 2;
        cfg.n = 200;
        cfg.overhead = over / 1e9;
        cfg.epsilon = eps / 1e9;
        cfg.monitored = monitored;
        cfg.repetitions = 1;
        int got = static_cast<int>(run_bench(cfg).mean);
        int want = predicted_interactions(10 * ms, over, eps, cfg.n);
        ++cases;
        o.require(got == want, "virtual o=" + std::to_string(over) + "ns eps=" + std::to_string(eps) +
                                   "ns: got " + std::to_string(got) + " want " + std::to_string(want));
      }
  o.detail << "virtual overhead prediction exact in " << cases << " cases;";

  double drift = measure_drift(0.005, 200);
  o.require(drift > 0, "drift calibration");
  if (drift <= 0) return;
  double eps = kTargetInteractions * drift;
  o.detail << " wall drift " << fmt(drift * 1e6, 3) << " us/interaction, eps " << fmt(eps * 1000, 3) << " ms;";
  int below = 0;
  for (const char* c : {"0.002", "0.004", "0.006", "0.008", "0.01"}) {
    // Arms alternate per repetition so slow changes in machine load hit both.
    std::vector<double> off, on;
    for (int rep = 0; rep < kRepetitions; ++rep)
      for (bool monitored : {false, true}) {
        BenchConfig cfg;
        cfg.scenario = 2;
        cfg.n = 200;
        cfg.c = *parse_decimal(c);
        cfg.clock = ClockKind::Wall;
        cfg.epsilon = eps;
        cfg.monitored = monitored;
        cfg.repetitions = 1;
        (monitored ? on : off).push_back(run_bench(cfg).runs[0].value);
      }
    RatioEstimate r = paired_ratio(on, off);
    o.require(r.base_mean >= kFirstViolationLow && r.base_mean <= kFirstViolationHigh,
              std::string("unmonitored first violation in range at c=") + c);
    o.require(r.upper >= kRatio, std::string("monitored not shown below 0.9 at c=") + c);
    o.detail << " c=" << c << " off=" << fmt(r.base_mean) << " on=" << fmt(r.mean) << " ratio=" << fmt(r.ratio, 3)
             << " (95% upper " << fmt(r.upper, 3) << ")";
    if (r.ratio < kRatio) ++below;
  }
  o.detail << "; point ratio below 0.9 at " << below << " of 5 periods";
}

int run_filtered(const char* binary, const char* filter, std::string& output) {
  std::string cmd = std::string(binary) + " --gtest_brief=1 --gtest_filter='" + filter + "' 2>&1";
  FILE* p = popen(cmd.c_str(), "r");
  if (!p) return -1;
  char buf[4096];
  while (std::size_t n = fread(buf, 1, sizeof buf, p)) output.append(buf, n);
  return pclose(p);
}

void criterion8(Outcome& o) {
  const std::pair<const char*, const char*> suites[] = {
      {TSV_AST_TEST, "ConstraintSat.*:Print.RandomGlobalRoundTrip"},
      {TSV_MONITOR_TEST, "Detection.SoundAcrossStrictnessAndTolerance"},
      {TSV_CHECKER_TEST, "Properties.ScalingInvariance"},
      {TSV_AUTOMATON_TEST, "Export.RandomRoundTripAndDeterminism"},
      {TSV_TRACE_TEST, "TraceEquivalence.*"},
  };
  for (const auto& [binary, filter] : suites) {
    std::string output;
    int status = run_filtered(binary, filter, output);
    o.require(status == 0, filter);
    if (status != 0) std::cerr << output;
    o.detail << filter << (status == 0 ? " ok; " : " FAILED; ");
  }
}

}  // namespace

int main(int argc, char** argv) {
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));
  const std::pair<const char*, std::function<void(Outcome&)>> criteria[] = {
      {"checker verdicts", criterion1},         {"projection fidelity", criterion2},
      {"detection", criterion3},                {"recovery transparency", criterion4},
      {"timeout recovery", criterion5},         {"scenario 1 oracle", criterion6},
      {"scenario 2 ratio", criterion7},         {"property suites", criterion8},
  };
  int failed = 0, id = 0;
  for (const auto& [name, run] : criteria) {
    ++id;
    if (!only.empty() && !only.count(id)) continue;
    Outcome o;
    try {
      run(o);
    } catch (const std::exception& e) {
      o.require(false, std::string("exception: ") + e.what());
    }
    std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << id << " (" << name << "): " << o.detail.str() << std::endl;
    if (!o.pass) ++failed;
  }
  return failed == 0 ? 0 : 1;
}
