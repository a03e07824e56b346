#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "tsv/ast.hpp"

namespace tsv {

struct TAAction {
  Direction dir = Direction::Send;
  std::string partner;
  std::string label;
  std::vector<std::string> sorts;

  friend bool operator==(const TAAction&, const TAAction&) = default;
};

struct TAState {
  int id = 0;
  bool accepting = false;

  friend bool operator==(const TAState&, const TAState&) = default;
};

struct TATransition {
  int from = 0;
  int to = 0;
  TAAction action;
  ClockConstraint guard;
  bool reset = false;

  friend bool operator==(const TATransition&, const TATransition&) = default;
};

/// One-clock timed automaton for a single role. State ids are indices into
/// `states`; transitions are grouped by source state in compile order.
struct TimedAutomaton {
  std::string protocol;
  std::string role;
  std::string clock;
  int initial = 0;
  std::vector<TAState> states;
  std::vector<TATransition> transitions;

  std::vector<const TATransition*> outgoing(int state) const;
  /// The transition for (dir, partner, label) out of `state`, or nullptr.
  const TATransition* find(int state, Direction dir, const std::string& partner, const std::string& label) const;

  friend bool operator==(const TimedAutomaton&, const TimedAutomaton&) = default;
};

class CompileError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NondeterminismError : public CompileError {
 public:
  using CompileError::CompileError;
};

TimedAutomaton compile(const LocalProtocol& l);

/// Edges are labelled "dir partner:label [guard]{reset}" with dir `!` or `?`.
std::string export_dot(const TimedAutomaton& a);
std::string export_structured(const TimedAutomaton& a);
/// Throws std::invalid_argument on malformed input.
TimedAutomaton import_structured(std::string_view text);

/// `format` is "dot" or "structured".
std::string export_automaton(const TimedAutomaton& a, const std::string& format);

std::string edge_label(const TATransition& t, const std::string& clock);

}  // namespace tsv
