#include "tsv/automaton.hpp"

#include <map>
#include <set>
#include <sstream>

#include "json.hpp"
#include "tsv/detail/overloaded.hpp"
#include "tsv/parser.hpp"

namespace tsv {
namespace {

using detail::overloaded;
using Env = std::map<std::string, int>;

class Compiler {
 public:
  TimedAutomaton run(const LocalProtocol& l) {
    clock_ = clock_of(l).value_or("x");
    int init = new_state();
    int end = l.body.empty() ? init : new_state();
    block(l.body, init, end, {}, false);
    accepting_[end] = true;
    return finish(l, init);
  }

 private:
  int new_state() {
    accepting_.push_back(false);
    return static_cast<int>(accepting_.size()) - 1;
  }

  void add(int from, int to, Direction dir, const std::string& partner, const std::string& label,
           const std::vector<std::string>& sorts, const TimeAnnotation& a) {
    TATransition t{from, to, {dir, partner, label, sorts}, a.constraint, a.reset};
    t.guard.clock = clock_;
    raw_.push_back(std::move(t));
  }

  // Compiles `b` so that it starts in `from` and falls through to `to`.
  // `shared` marks a start state that other branches also leave from.
  void block(const LocalBlock& b, int from, int to, const Env& env, bool shared) {
    if (b.empty()) {
      if (from != to) throw CompileError("empty branch needs a silent transition");
      return;
    }
    int cur = from;
    for (std::size_t i = 0; i < b.size(); ++i) {
      if (auto* c = std::get_if<Continue>(&b[i].node))
        throw CompileError("continue " + c->label + " is not preceded by any action");
      bool last = i + 1 == b.size();
      const Continue* next = last ? nullptr : std::get_if<Continue>(&b[i + 1].node);
      int target = next ? env.at(next->label) : last ? to : new_state();
      bool at_shared = shared && cur == from && i == 0;
      std::visit(overloaded{
                     [&](const Send& s) { add(cur, target, Direction::Send, s.to, s.label, s.sorts, s.annot); },
                     [&](const Receive& r) {
                       add(cur, target, Direction::Receive, r.from, r.label, r.sorts, r.annot);
                     },
                     [&](const LocalChoice& c) {
                       for (const auto& br : c.branches) block(br, cur, target, env, true);
                     },
                     [&](const LocalRec& r) {
                       Env inner = env;
                       if (!at_shared) {
                         inner[r.label] = cur;
                         block(r.body, cur, target, inner, false);
                         return;
                       }
                       // The start state has sibling transitions, so the
                       // loop head gets its own copy after the first round.
                       int head = new_state();
                       inner[r.label] = head;
                       block(r.body, cur, target, inner, true);
                       block(r.body, head, target, inner, false);
                     },
                     [](const Continue&) {},
                 },
                 b[i].node);
      cur = target;
      if (next) ++i;
    }
  }

  TimedAutomaton finish(const LocalProtocol& l, int init) {
    std::vector<std::vector<int>> out(accepting_.size());
    for (std::size_t t = 0; t < raw_.size(); ++t) out[raw_[t].from].push_back(static_cast<int>(t));

    // Breadth-first renumbering drops unreachable states.
    std::vector<int> id(accepting_.size(), -1);
    std::vector<int> order{init};
    id[init] = 0;
    for (std::size_t k = 0; k < order.size(); ++k)
      for (int t : out[order[k]]) {
        int to = raw_[t].to;
        if (id[to] < 0) {
          id[to] = static_cast<int>(order.size());
          order.push_back(to);
        }
      }

    TimedAutomaton a;
    a.protocol = l.name;
    a.role = l.role;
    a.clock = clock_;
    a.initial = 0;
    for (std::size_t k = 0; k < order.size(); ++k) {
      a.states.push_back({static_cast<int>(k), accepting_[order[k]]});
      std::set<ActionKey> seen;
      for (int t : out[order[k]]) {
        TATransition tr = raw_[t];
        if (!seen.emplace(tr.action.dir, tr.action.partner, tr.action.label).second)
          throw NondeterminismError("state " + std::to_string(k) + " of " + l.role + " has two transitions for " +
                                    edge_label(tr, clock_));
        tr.from = static_cast<int>(k);
        tr.to = id[tr.to];
        a.transitions.push_back(std::move(tr));
      }
    }
    return a;
  }

  std::string clock_;
  std::vector<bool> accepting_;
  std::vector<TATransition> raw_;
};

std::string dir_name(Direction d) { return d == Direction::Send ? "send" : "receive"; }

std::string quote(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    out += c;
  }
  return out + "\"";
}

}  // namespace

std::vector<const TATransition*> TimedAutomaton::outgoing(int state) const {
  std::vector<const TATransition*> out;
  for (const auto& t : transitions)
    if (t.from == state) out.push_back(&t);
  return out;
}

const TATransition* TimedAutomaton::find(int state, Direction dir, const std::string& partner,
                                         const std::string& label) const {
  for (const auto& t : transitions)
    if (t.from == state && t.action.dir == dir && t.action.partner == partner && t.action.label == label) return &t;
  return nullptr;
}

TimedAutomaton compile(const LocalProtocol& l) { return Compiler().run(l); }

std::string edge_label(const TATransition& t, const std::string& clock) {
  return std::string(t.action.dir == Direction::Send ? "!" : "?") + " " + t.action.partner + ":" + t.action.label +
         " [" + to_string(t.guard) + "]{" + (t.reset ? clock : "") + "}";
}

std::string export_dot(const TimedAutomaton& a) {
  std::ostringstream os;
  os << "digraph " << quote(a.protocol + "_" + a.role) << " {\n";
  os << "  rankdir=LR;\n";
  os << "  init [shape=point];\n";
  for (const auto& s : a.states)
    os << "  s" << s.id << " [shape=" << (s.accepting ? "doublecircle" : "circle") << "];\n";
  os << "  init -> s" << a.initial << ";\n";
  for (const auto& t : a.transitions)
    os << "  s" << t.from << " -> s" << t.to << " [label=" << quote(edge_label(t, a.clock)) << "];\n";
  os << "}\n";
  return os.str();
}

std::string export_structured(const TimedAutomaton& a) {
  nlohmann::json states = nlohmann::json::array();
  for (const auto& s : a.states) states.push_back({{"id", s.id}, {"accepting", s.accepting}});
  nlohmann::json transitions = nlohmann::json::array();
  for (const auto& t : a.transitions)
    transitions.push_back({
        {"from", t.from},
        {"to", t.to},
        {"dir", dir_name(t.action.dir)},
        {"partner", t.action.partner},
        {"label", t.action.label},
        {"sorts", t.action.sorts},
        {"guard", to_string(t.guard)},
        {"reset", t.reset},
    });
  nlohmann::json j{
      {"format", "tsv-automaton"}, {"version", 1},         {"protocol", a.protocol},       {"role", a.role},
      {"clock", a.clock},          {"initial", a.initial}, {"states", std::move(states)}, {"transitions", std::move(transitions)},
  };
  return j.dump(2) + "\n";
}

TimedAutomaton import_structured(std::string_view text) {
  try {
    nlohmann::json j = nlohmann::json::parse(text);
    if (j.at("format") != "tsv-automaton") throw std::invalid_argument("not a tsv automaton document");
    TimedAutomaton a;
    a.protocol = j.at("protocol").get<std::string>();
    a.role = j.at("role").get<std::string>();
    a.clock = j.at("clock").get<std::string>();
    a.initial = j.at("initial").get<int>();
    for (const auto& s : j.at("states")) a.states.push_back({s.at("id").get<int>(), s.at("accepting").get<bool>()});
    for (std::size_t i = 0; i < a.states.size(); ++i)
      if (a.states[i].id != static_cast<int>(i)) throw std::invalid_argument("state ids must be 0..n-1 in order");
    auto valid = [&](int s) { return s >= 0 && s < static_cast<int>(a.states.size()); };
    if (!valid(a.initial)) throw std::invalid_argument("initial state out of range");
    for (const auto& t : j.at("transitions")) {
      TATransition tr;
      tr.from = t.at("from").get<int>();
      tr.to = t.at("to").get<int>();
      if (!valid(tr.from) || !valid(tr.to)) throw std::invalid_argument("transition state out of range");
      std::string dir = t.at("dir").get<std::string>();
      if (dir != "send" && dir != "receive") throw std::invalid_argument("bad direction " + dir);
      tr.action.dir = dir == "send" ? Direction::Send : Direction::Receive;
      tr.action.partner = t.at("partner").get<std::string>();
      tr.action.label = t.at("label").get<std::string>();
      tr.action.sorts = t.at("sorts").get<std::vector<std::string>>();
      tr.guard = parse_constraint(t.at("guard").get<std::string>(), a.clock);
      tr.reset = t.at("reset").get<bool>();
      a.transitions.push_back(std::move(tr));
    }
    return a;
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("malformed automaton document: ") + e.what());
  } catch (const ParseError& e) {
    throw std::invalid_argument("malformed guard: " + e.message());
  }
}

std::string export_automaton(const TimedAutomaton& a, const std::string& format) {
  if (format == "dot") return export_dot(a);
  if (format == "structured") return export_structured(a);
  throw std::invalid_argument("unknown format " + format);
}

}  // namespace tsv
