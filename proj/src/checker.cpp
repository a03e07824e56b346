#include "tsv/checker.hpp"

#include <algorithm>
#include <map>
#include <sstream>

#include "json.hpp"
#include "tsv/detail/overloaded.hpp"
#include "tsv/projector.hpp"

namespace tsv {
namespace {

using detail::overloaded;

// ---------------------------------------------------------------------------
// Bound algebra. Lower bounds are "strict" when open; upper bounds may be
// unbounded.

Bound lower_max(const Bound& a, const Bound& b) {
  if (a.value != b.value) return a.value > b.value ? a : b;
  return a.strict ? a : b;
}

Bound lower_min(const Bound& a, const Bound& b) {
  if (a.value != b.value) return a.value < b.value ? a : b;
  return a.strict ? b : a;
}

Bound upper_max(const Bound& a, const Bound& b) {
  if (a.unbounded) return a;
  if (b.unbounded) return b;
  if (a.value != b.value) return a.value > b.value ? a : b;
  return a.strict ? b : a;
}

Bound add(const Bound& a, const Bound& b) {
  if (a.unbounded || b.unbounded) return Bound::infinity();
  return Bound{a.value + b.value, a.strict || b.strict, false};
}

AbsInterval hull(const AbsInterval& a, const AbsInterval& b) {
  return {lower_min(a.lower, b.lower), upper_max(a.upper, b.upper)};
}

AbsInterval max_join(const AbsInterval& a, const AbsInterval& b) {
  return {lower_max(a.lower, b.lower), upper_max(a.upper, b.upper)};
}

AbsInterval minkowski(const AbsInterval& base, const ClockConstraint& guard) {
  return {add(base.lower, guard.lower), add(base.upper, guard.upper)};
}

const AbsInterval kOrigin{Bound::closed(0), Bound::closed(0)};

// ---------------------------------------------------------------------------
// DAG construction

using Frontier = std::map<std::string, std::vector<int>>;

Frontier merge(const std::vector<Frontier>& fs) {
  Frontier out;
  for (const auto& f : fs)
    for (const auto& [role, ids] : f) {
      auto& dst = out[role];
      dst.insert(dst.end(), ids.begin(), ids.end());
    }
  for (auto& [role, ids] : out) {
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  }
  return out;
}

struct Flow {
  std::optional<Frontier> fall;
  std::map<std::string, std::vector<Frontier>> exits;  // by continue label
};

class DagBuilder {
 public:
  explicit DagBuilder(int unfold) : unfold_(std::max(1, unfold)) {}

  EventDag run(const GlobalProtocol& g) {
    Frontier start;
    for (const auto& r : g.roles) start[r];
    block(g.body, start);
    return std::move(dag_);
  }

 private:
  int add_node(const std::string& owner, EventKind kind, const std::string& label, const std::string& partner,
               const TimeAnnotation& a, std::vector<int> preds, SourcePos pos) {
    EventNode n;
    n.id = static_cast<int>(dag_.nodes.size());
    n.owner = owner;
    n.kind = kind;
    n.label = label;
    n.partner = partner;
    n.guard = a.constraint;
    n.reset = a.reset;
    n.branch_path = path_;
    n.order_preds = std::move(preds);
    n.pos = pos;
    dag_.nodes.push_back(std::move(n));
    return dag_.nodes.back().id;
  }

  Flow block(const GlobalBlock& stmts, Frontier cur) {
    Flow flow;
    for (const auto& stmt : stmts) {
      bool alive = std::visit(
          overloaded{
              [&](const Interaction& i) {
                int s = add_node(i.from, EventKind::Send, i.label, i.to, i.send, cur[i.from], stmt.pos);
                int r = add_node(i.to, EventKind::Receive, i.label, i.from, i.recv, cur[i.to], stmt.pos);
                dag_.nodes[r].message_pred = s;
                cur[i.from] = {s};
                cur[i.to] = {r};
                return true;
              },
              [&](const GlobalChoice& c) {
                int id = choices_++;
                std::vector<Frontier> falls;
                for (std::size_t b = 0; b < c.branches.size(); ++b) {
                  path_.emplace_back(id, static_cast<int>(b));
                  Flow f = block(c.branches[b], cur);
                  path_.pop_back();
                  if (f.fall) falls.push_back(std::move(*f.fall));
                  absorb(flow, f);
                }
                if (falls.empty()) return false;
                cur = merge(falls);
                return true;
              },
              [&](const GlobalRec& r) {
                std::vector<Frontier> falls;
                Frontier in = cur;
                for (int k = 0; k < unfold_; ++k) {
                  Flow f = block(r.body, in);
                  if (f.fall) falls.push_back(std::move(*f.fall));
                  auto again = f.exits.find(r.label);
                  std::vector<Frontier> next;
                  if (again != f.exits.end()) {
                    next = std::move(again->second);
                    f.exits.erase(again);
                  }
                  absorb(flow, f);
                  if (next.empty()) break;
                  in = merge(next);
                }
                if (falls.empty()) return false;
                cur = merge(falls);
                return true;
              },
              [&](const Continue& c) {
                flow.exits[c.label].push_back(cur);
                return false;
              },
          },
          stmt.node);
      if (!alive) return flow;
    }
    flow.fall = std::move(cur);
    return flow;
  }

  static void absorb(Flow& into, Flow& from) {
    for (auto& [label, fs] : from.exits)
      for (auto& f : fs) into.exits[label].push_back(std::move(f));
  }

  int unfold_;
  int choices_ = 0;
  std::vector<std::pair<int, int>> path_;
  EventDag dag_;
};

// ---------------------------------------------------------------------------
// Determinism

std::string where(SourcePos pos) { return "line " + std::to_string(pos.line); }

std::optional<std::string> choice_problem(const GlobalChoice& c, const std::vector<std::string>& roles) {
  for (const auto& role : roles) {
    std::vector<LocalBlock> proj;
    for (const auto& b : c.branches) proj.push_back(project_block(b, role));
    if (role == c.at) {
      std::set<ActionKey> seen;
      for (const auto& b : proj) {
        std::set<ActionKey> first = first_actions(b);
        if (first.empty()) return "chooser " + role + " does not act first in every branch";
        for (const auto& key : first) {
          if (std::get<0>(key) != Direction::Send)
            return "chooser " + role + " starts a branch by receiving " + std::get<2>(key);
          if (!seen.insert(key).second)
            return "chooser " + role + " starts two branches with " + std::get<2>(key) + " to " + std::get<1>(key);
        }
      }
      continue;
    }
    if (std::all_of(proj.begin(), proj.end(), [&](const LocalBlock& b) { return b == proj.front(); })) continue;
    std::set<ActionKey> seen;
    for (const auto& b : proj) {
      std::set<ActionKey> first = first_actions(b);
      if (first.empty()) return "role " + role + " has no first receive in some branch and branches differ";
      for (const auto& key : first) {
        if (std::get<0>(key) != Direction::Receive)
          return "role " + role + " must send " + std::get<2>(key) + " before learning the branch";
        if (!seen.insert(key).second)
          return "role " + role + " receives " + std::get<2>(key) + " from " + std::get<1>(key) +
                 " first in two branches";
      }
    }
  }
  return std::nullopt;
}

std::optional<std::string> block_problem(const GlobalBlock& block, const std::vector<std::string>& roles) {
  for (const auto& stmt : block) {
    std::optional<std::string> p = std::visit(
        overloaded{
            [](const Interaction&) -> std::optional<std::string> { return std::nullopt; },
            [&](const GlobalChoice& c) -> std::optional<std::string> {
              try {
                if (auto p = choice_problem(c, roles)) return "choice at " + c.at + " (" + where(stmt.pos) + "): " + *p;
              } catch (const ProjectError& e) {
                return "choice at " + c.at + " (" + where(e.pos()) + "): " + e.what();
              }
              for (const auto& b : c.branches)
                if (auto p = block_problem(b, roles)) return p;
              return std::nullopt;
            },
            [&](const GlobalRec& r) { return block_problem(r.body, roles); },
            [](const Continue&) -> std::optional<std::string> { return std::nullopt; },
        },
        stmt.node);
    if (p) return p;
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Reports

std::string kind_name(EventKind k) { return k == EventKind::Send ? "send" : "receive"; }

std::string verdict_text(const char* name, const char* negative, const Verdict& v, const EventDag& d) {
  std::string out = std::string(name) + ": ";
  if (v.holds) return out + "yes\n";
  out += negative;
  if (v.witness) out += ", witness " + node_name(d.nodes[*v.witness]);
  if (!v.detail.empty()) out += " (" + v.detail + ")";
  return out + "\n";
}

nlohmann::json verdict_json(const Verdict& v) {
  nlohmann::json j{{"holds", v.holds}};
  j["witness"] = v.witness ? nlohmann::json(*v.witness) : nlohmann::json(nullptr);
  if (!v.detail.empty()) j["detail"] = v.detail;
  return j;
}

std::string sup_text(const Bound& b) {
  if (b.unbounded) return "inf";
  return to_decimal(b.value) + (b.strict ? " open" : " closed");
}

}  // namespace

bool AbsInterval::empty() const {
  if (upper.unbounded) return false;
  if (lower.value != upper.value) return lower.value > upper.value;
  return lower.strict || upper.strict;
}

std::string to_string(const AbsInterval& i) {
  std::string out = (i.lower.strict ? "(" : "[") + to_decimal(i.lower.value) + ",";
  if (i.upper.unbounded) return out + "inf)";
  return out + to_decimal(i.upper.value) + (i.upper.strict ? ")" : "]");
}

std::vector<std::pair<int, int>> EventDag::message_edges() const {
  std::vector<std::pair<int, int>> out;
  for (const auto& n : nodes)
    if (n.message_pred) out.emplace_back(*n.message_pred, n.id);
  return out;
}

std::vector<std::pair<int, int>> EventDag::order_edges() const {
  std::vector<std::pair<int, int>> out;
  for (const auto& n : nodes)
    for (int p : n.order_preds) out.emplace_back(p, n.id);
  return out;
}

EventDag build_dag(const GlobalProtocol& g, int unfold) { return DagBuilder(unfold).run(g); }

std::vector<NodeTiming> compute_dc(const EventDag& d) {
  std::vector<int> order(d.nodes.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  return compute_dc(d, order);
}

std::vector<NodeTiming> compute_dc(const EventDag& d, const std::vector<int>& order) {
  std::vector<NodeTiming> t(d.nodes.size());
  std::vector<AbsInterval> reset_base(d.nodes.size(), kOrigin);
  for (int id : order) {
    const EventNode& n = d.nodes[id];
    std::optional<AbsInterval> base, prog;
    for (int p : n.order_preds) {
      AbsInterval b = d.nodes[p].reset ? t[p].sol : reset_base[p];
      base = base ? hull(*base, b) : b;
      prog = prog ? hull(*prog, t[p].sol) : t[p].sol;
    }
    reset_base[id] = base.value_or(kOrigin);

    AbsInterval dc = kOrigin;
    if (prog && n.message_pred)
      dc = max_join(*prog, t[*n.message_pred].sol);
    else if (prog)
      dc = *prog;
    else if (n.message_pred)
      dc = t[*n.message_pred].sol;

    NodeTiming& nt = t[id];
    nt.dc = dc;
    nt.sol_guard = minkowski(reset_base[id], n.guard);
    nt.sol = nt.sol_guard;
    nt.sol.lower = lower_max(nt.sol_guard.lower, dc.lower);
  }
  return t;
}

bool covers_sup(const AbsInterval& sol, const AbsInterval& dc) {
  if (dc.upper.unbounded) return sol.upper.unbounded;
  if (sol.upper.unbounded) return true;
  if (sol.upper.value != dc.upper.value) return sol.upper.value > dc.upper.value;
  return dc.upper.strict || !sol.upper.strict;
}

bool receive_wait_free(const ClockConstraint& guard, const AbsInterval& sol_guard, const AbsInterval& dc) {
  // A receive without a deadline can always wait for the message.
  if (!guard.has_upper()) return true;
  if (dc.upper.unbounded) return false;
  return sol_guard.lower.value >= dc.upper.value;
}

Verdict check_feasibility(const EventDag& d, const std::vector<NodeTiming>& timing) {
  for (const auto& n : d.nodes) {
    const NodeTiming& t = timing[n.id];
    if (!covers_sup(t.sol, t.dc))
      return {false, n.id, "sup sol " + sup_text(t.sol.upper) + " < sup dc " + sup_text(t.dc.upper)};
  }
  return {};
}

Verdict check_wait_freedom(const EventDag& d, const std::vector<NodeTiming>& timing) {
  for (const auto& n : d.nodes) {
    if (n.kind != EventKind::Receive) continue;
    const NodeTiming& t = timing[n.id];
    if (!receive_wait_free(n.guard, t.sol_guard, t.dc))
      return {false, n.id,
              "inf sol " + to_decimal(t.sol_guard.lower.value) + " < sup dc " + sup_text(t.dc.upper)};
  }
  return {};
}

Verdict check_determinism(const GlobalProtocol& g) {
  if (auto p = block_problem(g.body, g.roles)) return {false, std::nullopt, *p};
  return {};
}

Verdict check_projectable(const GlobalProtocol& g) {
  try {
    project_all(g);
  } catch (const ProjectError& e) {
    return {false, std::nullopt, "role " + e.role() + ", " + where(e.pos()) + ": " + e.what()};
  }
  return {};
}

CheckReport check(const GlobalProtocol& g, const CheckOptions& options) {
  CheckReport r;
  r.protocol = g.name;
  r.unfold = std::max(1, options.unfold);
  r.dag = build_dag(g, r.unfold);
  r.timing = compute_dc(r.dag);
  r.feasible = check_feasibility(r.dag, r.timing);
  r.wait_free = check_wait_freedom(r.dag, r.timing);
  r.deterministic = check_determinism(g);
  r.projectable = check_projectable(g);
  return r;
}

std::string node_name(const EventNode& n) {
  std::string out = "n" + std::to_string(n.id) + " " + n.owner;
  if (n.kind == EventKind::Send) return out + "!" + n.label + " to " + n.partner;
  return out + "?" + n.label + " from " + n.partner;
}

std::string to_text(const CheckReport& r) {
  std::ostringstream os;
  os << "protocol " << r.protocol << " (unfold " << r.unfold << ", " << r.dag.nodes.size() << " nodes)\n";
  os << verdict_text("feasible", "no", r.feasible, r.dag);
  os << verdict_text("wait-free", "no", r.wait_free, r.dag);
  os << verdict_text("deterministic", "no", r.deterministic, r.dag);
  os << verdict_text("projectable", "no", r.projectable, r.dag);
  os << "nodes:\n";
  for (const auto& n : r.dag.nodes) {
    const NodeTiming& t = r.timing[n.id];
    os << "  " << node_name(n) << "  guard " << to_string(n.guard) << (n.reset ? " reset" : "") << "  dc "
       << to_string(t.dc) << "  sol " << to_string(t.sol) << '\n';
  }
  return os.str();
}

std::string to_json(const CheckReport& r) {
  nlohmann::json nodes = nlohmann::json::array();
  for (const auto& n : r.dag.nodes) {
    const NodeTiming& t = r.timing[n.id];
    bool is_witness = r.feasible.witness == n.id || r.wait_free.witness == n.id;
    nlohmann::json path = nlohmann::json::array();
    for (const auto& [choice, branch] : n.branch_path) path.push_back({choice, branch});
    nodes.push_back({
        {"id", n.id},
        {"owner", n.owner},
        {"kind", kind_name(n.kind)},
        {"label", n.label},
        {"partner", n.partner},
        {"guard", to_string(n.guard)},
        {"reset", n.reset},
        {"branch_path", path},
        {"dc", to_string(t.dc)},
        {"sol", to_string(t.sol)},
        {"sol_guard", to_string(t.sol_guard)},
        {"feasible", covers_sup(t.sol, t.dc)},
        {"wait_free", n.kind == EventKind::Send || receive_wait_free(n.guard, t.sol_guard, t.dc)},
        {"witness", is_witness},
    });
  }
  nlohmann::json j{
      {"protocol", r.protocol},
      {"unfold", r.unfold},
      {"ok", r.ok()},
      {"feasible", verdict_json(r.feasible)},
      {"wait_free", verdict_json(r.wait_free)},
      {"deterministic", verdict_json(r.deterministic)},
      {"projectable", verdict_json(r.projectable)},
      {"nodes", nodes},
  };
  return j.dump(2);
}

}  // namespace tsv
