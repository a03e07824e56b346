#include "tsv/bench.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>

#include "tsv/parser.hpp"
#include "tsv/projector.hpp"
#include "tsv/tcp.hpp"
#include "tsv/virtual_net.hpp"

namespace tsv {
namespace {

constexpr const char* kWordCount = R"(global protocol WordCount at M(role A, role W) {
    [xm@M: xm<1, reset(xm)][xw@W: xw=1, reset(xw)]
    task(log, string) from M to W;
    rec Loop {
        [xw@W: xw=20][xm@M: 21.5<xm<22]
        result(data) from W to M;
        choice at M {
            [xm@M: xm=22][xa@A: 23<=xa, reset(xa)]
            more(data) from M to A;
            [xm@M: xm=22, reset(xm)][xw@W: xw=23, reset(xw)]
            more(log, string) from M to W;
            continue Loop;
        } or {
            [xm@M: xm=22][xa@A: 23<=xa]
            end(data) from M to A;
            [xm@M: xm=22][xw@W: xw=23]
            end() from M to W;
        }
    }
})";

constexpr const char* kWordCountBench = R"(global protocol WordCount at M(role A, role W) {
    [xm@M: xm<0.01, reset(xm)][xw@W: xw=0.01, reset(xw)]
    task(log, string) from M to W;
    rec Loop {
        [xw@W: xw=0.20][xm@M: 0.21<xm<0.22]
        result(data) from W to M;
        choice at M {
            [xm@M: xm=0.22][xa@A: 0.23<=xa, reset(xa)]
            more(data) from M to A;
            [xm@M: xm=0.22, reset(xm)][xw@W: xw=0.23, reset(xw)]
            more(log, string) from M to W;
            continue Loop;
        } or {
            [xm@M: xm=0.22][xa@A: 0.23<=xa]
            end(data) from M to A;
            [xm@M: xm=0.22][xw@W: xw=0.23]
            end() from M to W;
        }
    }
})";

std::string decimal(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

void summarize(BenchResult& r) {
  std::size_t n = r.runs.size();
  if (n == 0) return;
  double sum = 0;
  for (const auto& x : r.runs) sum += x.value;
  r.mean = sum / static_cast<double>(n);
  double sq = 0;
  for (const auto& x : r.runs) sq += (x.value - r.mean) * (x.value - r.mean);
  r.stddev = n > 1 ? std::sqrt(sq / static_cast<double>(n - 1)) : 0;
}

SessionRun run_session(std::vector<EndpointProgram> endpoints, ClockKind clock) {
  return clock == ClockKind::Virtual ? run_virtual(std::move(endpoints)) : run_wall(std::move(endpoints));
}

int count_violations(const std::vector<LogEntry>& log) {
  int n = 0;
  for (const auto& e : log)
    if (e.kind() != VerdictKind::Ok && e.kind() != VerdictKind::OkWithActions) ++n;
  return n;
}

}  // namespace

GlobalProtocol wordcount_protocol() { return parse_global(kWordCount); }

GlobalProtocol wordcount_bench_protocol() { return parse_global(kWordCountBench); }

GlobalProtocol gen_scenario2(const Rational& c, int n) {
  if (c <= 0 || n < 1) throw std::invalid_argument("gen_scenario2 needs c > 0 and n >= 1");
  GlobalProtocol g;
  g.name = "ClientServer";
  g.roles = {"C", "S"};
  for (int k = 1; k <= n; ++k) {
    Rational at = c * k;
    Interaction i;
    i.label = "ping";
    i.sorts = {"data"};
    i.from = "C";
    i.to = "S";
    i.send = {"C", "xc", {"xc", Bound::closed(0), Bound::open(at)}, false};
    i.recv = {"S", "xs", {"xs", Bound::closed(at), Bound::closed(at)}, false};
    g.body.push_back({i, {}});
  }
  return g;
}

std::map<std::string, std::shared_ptr<const TimedAutomaton>> compile_roles(const GlobalProtocol& g) {
  std::map<std::string, std::shared_ptr<const TimedAutomaton>> out;
  for (const auto& [role, l] : project_all(g)) out[role] = std::make_shared<const TimedAutomaton>(compile(l));
  return out;
}

WordCountTiming WordCountTiming::lock_step(double scale, int iterations) {
  WordCountTiming t;
  t.scale = scale;
  t.iterations = iterations;
  t.worker_gap = 2;
  t.aggregator_period = 22;
  return t;
}

std::map<std::string, std::function<void(Conversation&)>> wordcount_programs(const WordCountTiming& t) {
  const double s = t.scale;
  std::map<std::string, std::function<void(Conversation&)>> out;
  out["M"] = [t, s](Conversation& c) {
    c.send("W", "task", {"log", "string"}, {"access.log", "timeout"});
    c.delay(t.master_wait * s);
    c.receive("W");
    for (int i = 1; i < t.iterations; ++i) {
      c.send("A", "more", {"data"});
      c.send("W", "more", {"log", "string"}, {"access.log", "timeout"});
      c.delay(t.master_wait * s);
      c.receive("W");
    }
    c.send("A", "end", {"data"});
    c.send("W", "end");
  };
  out["W"] = [t, s](Conversation& c) {
    c.delay(1 * s);
    ConversationMessage msg = c.receive("M");
    while (msg.label != "end") {
      auto crawl = c.with_timeout(20 * s, 0, [&](int& lines) {
        c.delay(t.crawl_step * s);
        ++lines;
        return false;
      });
      c.send("M", "result", {"data"}, {std::to_string(crawl.value)});
      c.delay(t.worker_gap * s);
      msg = c.receive("M");
    }
  };
  out["A"] = [t, s](Conversation& c) {
    c.delay(23 * s);
    std::string op = c.receive("M").label;
    while (op != "end") {
      c.delay(t.aggregator_period * s);
      op = c.receive("M").label;
    }
  };
  return out;
}

std::map<std::string, std::function<void(Conversation&)>> scenario2_programs(double c, int n) {
  std::map<std::string, std::function<void(Conversation&)>> out;
  out["C"] = [c, n](Conversation& conv) {
    for (int k = 1; k <= n; ++k) {
      conv.send("S", "ping", {"data"});
      if (k < n) conv.delay(c);
    }
  };
  out["S"] = [c, n](Conversation& conv) {
    for (int k = 1; k <= n; ++k) {
      conv.delay(c);
      conv.receive("C");
    }
  };
  return out;
}

double default_epsilon(const BenchConfig& cfg) {
  if (cfg.epsilon >= 0) return cfg.epsilon;
  if (cfg.clock == ClockKind::Wall) return kWallEpsilon;
  // Lock-step endpoints sit up to 0.01 away from W's and A's guards.
  return cfg.scenario == 1 ? 0.015 : kVirtualEpsilon;
}

int correct_interactions(const std::vector<LogEntry>& log, int n) {
  std::map<std::string, int> ok;
  std::map<std::string, bool> broken;
  for (const auto& e : log) {
    if (broken[e.role]) continue;
    if (e.kind() == VerdictKind::Ok || e.kind() == VerdictKind::OkWithActions)
      ++ok[e.role];
    else
      broken[e.role] = true;
  }
  return std::min({ok["C"], ok["S"], n});
}

int replay_violations(const std::vector<LogEntry>& log,
                      const std::map<std::string, std::shared_ptr<const TimedAutomaton>>& automata, double epsilon) {
  std::map<std::string, MonitorState> monitors;
  for (const auto& [role, a] : automata) monitors.emplace(role, start_session(a, epsilon, MonitorMode::Detect));
  std::set<std::string> broken;
  for (const auto& e : log) {
    auto it = monitors.find(e.role);
    if (it == monitors.end() || broken.count(e.role)) continue;
    auto [next, v] = observe(it->second, e.event);
    if (!v.ok()) broken.insert(e.role);
    it->second = std::move(next);
  }
  return static_cast<int>(broken.size());
}

BenchResult run_scenario1(const BenchConfig& cfg) {
  BenchResult r{cfg, {}, 0, 0};
  const double eps = default_epsilon(cfg);
  auto automata = compile_roles(wordcount_bench_protocol());
  for (int rep = 0; rep < cfg.repetitions; ++rep) {
    auto log = std::make_shared<EventLog>();
    std::vector<EndpointProgram> endpoints;
    for (auto& [role, program] : wordcount_programs(WordCountTiming::lock_step(0.01, cfg.iterations))) {
      EndpointConfig ec;
      ec.conversation = "s1-" + std::to_string(rep);
      ec.protocol = "WordCount";
      ec.role = role;
      ec.log = log;
      if (cfg.monitored) ec.monitor = MonitorConfig{automata.at(role), MonitorMode::Detect, eps};
      endpoints.push_back({ec, program});
    }
    SessionRun run = run_session(std::move(endpoints), cfg.clock);
    Repetition out;
    for (const auto& o : run.outcomes) {
      out.value = std::max(out.value, o.finished_at);
      if (!o.completed && out.error.empty()) out.error = o.role + ": " + o.error;
    }
    auto entries = log->entries();
    out.violations = cfg.monitored ? count_violations(entries) : replay_violations(entries, automata, eps);
    r.runs.push_back(out);
  }
  summarize(r);
  return r;
}

BenchResult run_scenario2(const BenchConfig& cfg) {
  BenchResult r{cfg, {}, 0, 0};
  const double eps = default_epsilon(cfg);
  auto automata = compile_roles(gen_scenario2(cfg.c, cfg.n));
  for (int rep = 0; rep < cfg.repetitions; ++rep) {
    auto log = std::make_shared<EventLog>();
    std::vector<EndpointProgram> endpoints;
    for (auto& [role, program] : scenario2_programs(to_seconds(cfg.c), cfg.n)) {
      EndpointConfig ec;
      ec.conversation = "s2-" + std::to_string(rep);
      ec.protocol = "ClientServer";
      ec.role = role;
      ec.log = log;
      MonitorConfig mc{automata.at(role), MonitorMode::PreventRecover, eps};
      if (cfg.monitored) {
        ec.monitor = mc;
      } else {
        mc.mode = MonitorMode::Detect;
        ec.shadow = mc;
        ec.halt_on_shadow_violation = true;
      }
      if (cfg.clock == ClockKind::Virtual) ec.overhead = cfg.overhead;
      endpoints.push_back({ec, program});
    }
    SessionRun run = run_session(std::move(endpoints), cfg.clock);
    auto entries = log->entries();
    Repetition out;
    out.value = correct_interactions(entries, cfg.n);
    out.violations = count_violations(entries);
    for (const auto& o : run.outcomes)
      if (!o.completed && out.error.empty()) out.error = o.role + ": " + o.error;
    r.runs.push_back(out);
  }
  summarize(r);
  return r;
}

BenchResult run_bench(const BenchConfig& cfg) {
  if (cfg.scenario == 1) return run_scenario1(cfg);
  if (cfg.scenario == 2) return run_scenario2(cfg);
  throw std::invalid_argument("scenario must be 1 or 2");
}

std::string tsv_header() { return "scenario\tclock\tmonitored\tparam\tmean\tstddev\treps\tviolations"; }

std::string tsv_row(const BenchResult& r) {
  const BenchConfig& c = r.config;
  int violations = 0;
  for (const auto& x : r.runs) violations += x.violations;
  std::string param = c.scenario == 1 ? std::to_string(c.iterations) : to_decimal(c.c);
  return std::to_string(c.scenario) + '\t' + (c.clock == ClockKind::Virtual ? "virtual" : "wall") + '\t' +
         (c.monitored ? "on" : "off") + '\t' + param + '\t' + decimal(r.mean) + '\t' + decimal(r.stddev) + '\t' +
         std::to_string(r.runs.size()) + '\t' + std::to_string(violations);
}

}  // namespace tsv
