#include <unistd.h>

#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "tsv/automaton.hpp"
#include "tsv/bench.hpp"
#include "tsv/checker.hpp"
#include "tsv/monitor.hpp"
#include "tsv/parser.hpp"
#include "tsv/printer.hpp"
#include "tsv/projector.hpp"

using namespace tsv;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

bool is_local(const std::string& text) {
  std::istringstream in(text);
  std::string word;
  while (in >> word) {
    if (word.rfind("//", 0) == 0) {
      std::getline(in, word);
      continue;
    }
    return word == "local";
  }
  return false;
}

LocalProtocol local_for(const std::string& text, const std::string& role, const ParseOptions& opts) {
  if (is_local(text)) return parse_local(text, opts);
  if (role.empty()) throw std::runtime_error("--role is required for a global protocol");
  return project(parse_global(text, opts), role);
}

void write_out(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << text;
}

std::map<std::string, std::string> fields(const std::string& line) {
  std::map<std::string, std::string> out;
  std::istringstream in(line);
  std::string kv;
  while (in >> kv) {
    auto eq = kv.find('=');
    if (eq != std::string::npos) out[kv.substr(0, eq)] = kv.substr(eq + 1);
  }
  return out;
}

std::string machine_note() {
  char host[256] = "unknown";
  gethostname(host, sizeof host - 1);
  return std::string("# host=") + host + " cpus=" + std::to_string(std::thread::hardware_concurrency()) +
         " compiler=gcc-" + __VERSION__ + "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Timed multiparty protocol toolchain"};
  app.require_subcommand(1);
  bool lenient = false;
  app.add_flag("--lenient-clocks", lenient, "Rewrite mismatched clock names to the role's clock");

  std::string file, role, format = "dot", out;
  int unfold = 1;
  bool json = false;

  auto* check_cmd = app.add_subcommand("check", "Check feasibility, wait-freedom and determinism");
  check_cmd->add_option("file", file, "Global protocol")->required();
  check_cmd->add_option("--unfold", unfold, "Recursion unfoldings")->check(CLI::PositiveNumber);
  check_cmd->add_flag("--json", json, "Machine-readable report");

  auto* project_cmd = app.add_subcommand("project", "Project a global protocol");
  project_cmd->add_option("file", file, "Global protocol")->required();
  project_cmd->add_option("--role", role, "Role (all roles when omitted)");

  auto* compile_cmd = app.add_subcommand("compile", "Compile a local protocol to a timed automaton");
  compile_cmd->add_option("file", file, "Local protocol, or global protocol with --role")->required();
  compile_cmd->add_option("--role", role);
  compile_cmd->add_option("--format", format)->check(CLI::IsMember({"dot", "structured"}));
  compile_cmd->add_option("-o,--out", out);

  std::string log_file;
  double epsilon = 0;
  auto* monitor_cmd = app.add_subcommand("monitor", "Replay a conversation log against a structured automaton");
  monitor_cmd->add_option("automaton", file, "Structured automaton (JSON)")->required();
  monitor_cmd->add_option("log", log_file, "Log lines as written by the runtime")->required();
  monitor_cmd->add_option("--epsilon", epsilon)->check(CLI::NonNegativeNumber);

  int scenario = 1, n = 200, reps = 30;
  std::vector<int> iterations{1};
  std::vector<std::string> periods{"0.01"};
  std::string monitor_flag = "both", clock_name = "virtual";
  double bench_eps = -1, overhead = 0;
  auto* bench_cmd = app.add_subcommand("bench", "Run a benchmark scenario");
  bench_cmd->add_option("--scenario", scenario)->check(CLI::IsMember({1, 2}));
  bench_cmd->add_option("--iterations", iterations, "K values (scenario 1)")->check(CLI::PositiveNumber);
  bench_cmd->add_option("--c", periods, "Periods in seconds (scenario 2)");
  bench_cmd->add_option("--n", n, "Interactions (scenario 2)")->check(CLI::PositiveNumber);
  bench_cmd->add_option("--monitor", monitor_flag)->check(CLI::IsMember({"on", "off", "both"}));
  bench_cmd->add_option("--clock", clock_name)->check(CLI::IsMember({"virtual", "wall"}));
  bench_cmd->add_option("--reps", reps)->check(CLI::PositiveNumber);
  bench_cmd->add_option("--epsilon", bench_eps, "Monitor tolerance in seconds");
  bench_cmd->add_option("--overhead", overhead, "Synthetic cost per action (virtual clock)");
  bench_cmd->add_option("--out", out);

  std::string c_text;
  auto* gen_cmd = app.add_subcommand("gen-scenario2", "Print the ping protocol");
  gen_cmd->add_option("--c", c_text)->required();
  gen_cmd->add_option("--n", n)->check(CLI::PositiveNumber);

  CLI11_PARSE(app, argc, argv);
  ParseOptions opts;
  opts.lenient_clock_names = lenient;

  try {
    if (*check_cmd) {
      CheckReport r = check(parse_global(slurp(file), opts), {unfold});
      std::cout << (json ? to_json(r) : to_text(r)) << "\n";
      return r.ok() ? 0 : 1;
    }
    if (*project_cmd) {
      GlobalProtocol g = parse_global(slurp(file), opts);
      if (!role.empty()) {
        std::cout << print_protocol(project(g, role));
      } else {
        for (const auto& [r, l] : project_all(g)) std::cout << print_protocol(l) << "\n";
      }
      return 0;
    }
    if (*compile_cmd) {
      write_out(out, export_automaton(compile(local_for(slurp(file), role, opts)), format));
      return 0;
    }
    if (*monitor_cmd) {
      auto a = std::make_shared<const TimedAutomaton>(import_structured(slurp(file)));
      MonitorState m = start_session(a, epsilon, MonitorMode::Detect);
      std::ifstream in(log_file);
      if (!in) throw std::runtime_error("cannot open " + log_file);
      int violations = 0;
      std::string line;
      while (std::getline(in, line)) {
        auto f = fields(line);
        if (f["role"] != a->role) continue;
        ObservedEvent e;
        e.dir = f["dir"] == "!" ? Direction::Send : Direction::Receive;
        e.partner = f["partner"];
        e.label = f["label"];
        e.time = std::stod(f["ts"]);
        if (const auto* t = a->find(m.current, e.dir, e.partner, e.label)) e.sorts = t->action.sorts;
        double clock = m.clock_at(e.time);
        auto [next, v] = observe(m, e);
        std::cout << log_line(e.time, f["conv"], a->role, e, clock, v);
        if (!v.ok()) {
          ++violations;
          if (v.guard) std::cout << " guard=" << to_string(*v.guard);
          if (!v.expected.empty()) std::cout << " expected=\"" << v.expected << "\"";
        }
        std::cout << "\n";
        m = std::move(next);
      }
      return violations == 0 ? 0 : 1;
    }
    if (*gen_cmd) {
      auto c = parse_decimal(c_text);
      if (!c) throw std::runtime_error("bad --c " + c_text);
      std::cout << print_protocol(gen_scenario2(*c, n));
      return 0;
    }
    if (*bench_cmd) {
      std::string text;
      ClockKind clock = clock_name == "wall" ? ClockKind::Wall : ClockKind::Virtual;
      if (clock == ClockKind::Wall) text += machine_note();
      text += tsv_header() + "\n";
      std::vector<bool> arms;
      if (monitor_flag != "on") arms.push_back(false);
      if (monitor_flag != "off") arms.push_back(true);
      std::vector<BenchConfig> configs;
      auto base = [&] {
        BenchConfig cfg;
        cfg.scenario = scenario;
        cfg.clock = clock;
        cfg.repetitions = reps;
        cfg.epsilon = bench_eps;
        cfg.overhead = overhead;
        cfg.n = n;
        return cfg;
      };
      if (scenario == 1) {
        for (int k : iterations) {
          BenchConfig cfg = base();
          cfg.iterations = k;
          configs.push_back(cfg);
        }
      } else {
        for (const auto& p : periods) {
          auto c = parse_decimal(p);
          if (!c || *c <= 0) throw std::runtime_error("bad --c " + p);
          BenchConfig cfg = base();
          cfg.c = *c;
          configs.push_back(cfg);
        }
      }
      for (BenchConfig cfg : configs)
        for (bool monitored : arms) {
          cfg.monitored = monitored;
          BenchResult r = run_bench(cfg);
          for (const auto& x : r.runs)
            if (!x.error.empty() && scenario == 1) std::cerr << "warning: " << x.error << "\n";
          std::string row = tsv_row(r);
          if (!out.empty()) std::cerr << row << "\n";
          text += row + "\n";
        }
      write_out(out, text);
      return 0;
    }
  } catch (const ParseError& e) {
    std::cerr << file << ":" << e.pos().line << ":" << e.pos().column << ": " << e.message() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
