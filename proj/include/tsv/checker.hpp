#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "tsv/ast.hpp"

namespace tsv {

enum class EventKind { Send, Receive };

struct EventNode {
  int id = 0;
  std::string owner;
  EventKind kind = EventKind::Send;
  std::string label;
  std::string partner;
  ClockConstraint guard;
  bool reset = false;
  /// (choice id, branch index) for every enclosing choice, outermost first.
  std::vector<std::pair<int, int>> branch_path;
  /// Program-order predecessors on the owner's timeline (several after a
  /// choice join).
  std::vector<int> order_preds;
  /// The matching send, for receive nodes.
  std::optional<int> message_pred;
  SourcePos pos;
};

/// Event DAG of a global protocol. Node ids are indices and creation order
/// is a topological order.
struct EventDag {
  std::vector<EventNode> nodes;

  std::vector<std::pair<int, int>> message_edges() const;
  std::vector<std::pair<int, int>> order_edges() const;
};

/// Interval of absolute session times. `lower.unbounded` is never set.
struct AbsInterval {
  Bound lower = Bound::closed(0);
  Bound upper = Bound::closed(0);

  bool empty() const;
  friend bool operator==(const AbsInterval&, const AbsInterval&) = default;
};

std::string to_string(const AbsInterval& i);

struct NodeTiming {
  AbsInterval dc;
  /// Owner's last reset time plus the guard, before clipping by dc.
  AbsInterval sol_guard;
  AbsInterval sol;

  friend bool operator==(const NodeTiming&, const NodeTiming&) = default;
};

struct Verdict {
  bool holds = true;
  std::optional<int> witness;
  std::string detail;
};

struct CheckOptions {
  /// How many times each recursion body is unfolded.
  int unfold = 1;
};

/// Unfolds recursion `unfold` times; a `continue` reached on the last
/// unfolding is dropped.
EventDag build_dag(const GlobalProtocol& g, int unfold = 1);

std::vector<NodeTiming> compute_dc(const EventDag& d);
/// Same computation visiting nodes in the given topological order.
std::vector<NodeTiming> compute_dc(const EventDag& d, const std::vector<int>& order);

Verdict check_feasibility(const EventDag& d, const std::vector<NodeTiming>& timing);
Verdict check_wait_freedom(const EventDag& d, const std::vector<NodeTiming>& timing);
Verdict check_determinism(const GlobalProtocol& g);
Verdict check_projectable(const GlobalProtocol& g);

/// Per-node conditions, exposed for tests.
bool covers_sup(const AbsInterval& sol, const AbsInterval& dc);
bool receive_wait_free(const ClockConstraint& guard, const AbsInterval& sol_guard, const AbsInterval& dc);

struct CheckReport {
  std::string protocol;
  int unfold = 1;
  EventDag dag;
  std::vector<NodeTiming> timing;
  Verdict feasible;
  Verdict wait_free;
  Verdict deterministic;
  Verdict projectable;

  bool ok() const { return feasible.holds && wait_free.holds && deterministic.holds && projectable.holds; }
};

CheckReport check(const GlobalProtocol& g, const CheckOptions& options = {});

std::string node_name(const EventNode& n);
std::string to_text(const CheckReport& r);
/// Machine-readable report: one object per node plus the verdicts.
std::string to_json(const CheckReport& r);

}  // namespace tsv
