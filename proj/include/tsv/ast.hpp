#pragma once

#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <variant>
#include <vector>

#include "tsv/constraint.hpp"

namespace tsv {

/// Source location, 1-based. Ignored by AST equality.
struct SourcePos {
  int line = 0;
  int column = 0;
};

/// `[x@R: constraint, reset(x)]`
struct TimeAnnotation {
  std::string owner;
  std::string clock;
  ClockConstraint constraint;
  bool reset = false;

  friend bool operator==(const TimeAnnotation&, const TimeAnnotation&) = default;
};

struct Continue {
  std::string label;
  friend bool operator==(const Continue&, const Continue&) = default;
};

// ---------------------------------------------------------------------------
// Global protocols

struct GlobalStmt;
using GlobalBlock = std::vector<GlobalStmt>;

struct Interaction {
  std::string label;
  std::vector<std::string> sorts;
  std::string from;
  std::string to;
  TimeAnnotation send;  // owner == from
  TimeAnnotation recv;  // owner == to

  friend bool operator==(const Interaction&, const Interaction&) = default;
};

struct GlobalChoice {
  std::string at;
  std::vector<GlobalBlock> branches;

  friend bool operator==(const GlobalChoice&, const GlobalChoice&) = default;
};

struct GlobalRec {
  std::string label;
  GlobalBlock body;

  friend bool operator==(const GlobalRec&, const GlobalRec&) = default;
};

struct GlobalStmt {
  std::variant<Interaction, GlobalChoice, GlobalRec, Continue> node;
  SourcePos pos;

  friend bool operator==(const GlobalStmt& a, const GlobalStmt& b) { return a.node == b.node; }
};

struct GlobalProtocol {
  std::string name;
  /// Role named by the optional `at R` header clause; it is also roles[0].
  std::optional<std::string> at_role;
  std::vector<std::string> roles;
  GlobalBlock body;

  friend bool operator==(const GlobalProtocol&, const GlobalProtocol&) = default;
};

// ---------------------------------------------------------------------------
// Local protocols

struct LocalStmt;
using LocalBlock = std::vector<LocalStmt>;

struct Send {
  std::string label;
  std::vector<std::string> sorts;
  std::string to;
  TimeAnnotation annot;

  friend bool operator==(const Send&, const Send&) = default;
};

struct Receive {
  std::string label;
  std::vector<std::string> sorts;
  std::string from;
  TimeAnnotation annot;

  friend bool operator==(const Receive&, const Receive&) = default;
};

enum class ChoiceKind { Internal, External };

struct LocalChoice {
  ChoiceKind kind = ChoiceKind::Internal;
  /// The deciding role: the projected role itself for internal choices.
  std::string at;
  std::vector<LocalBlock> branches;

  friend bool operator==(const LocalChoice&, const LocalChoice&) = default;
};

struct LocalRec {
  std::string label;
  LocalBlock body;

  friend bool operator==(const LocalRec&, const LocalRec&) = default;
};

struct LocalStmt {
  std::variant<Send, Receive, LocalChoice, LocalRec, Continue> node;
  SourcePos pos;

  friend bool operator==(const LocalStmt& a, const LocalStmt& b) { return a.node == b.node; }
};

struct LocalProtocol {
  std::string name;
  std::string role;
  /// The other roles of the session, in declaration order.
  std::vector<std::string> peers;
  LocalBlock body;

  friend bool operator==(const LocalProtocol&, const LocalProtocol&) = default;
};

// ---------------------------------------------------------------------------
// Helpers shared by the checker, projector and compiler.

enum class Direction { Send, Receive };

/// (direction, partner, label) of a communication action.
using ActionKey = std::tuple<Direction, std::string, std::string>;

/// Actions that can occur first when executing `block`, looking through
/// recursion binders and choices. A leading `continue` contributes nothing.
std::set<ActionKey> first_actions(const LocalBlock& block);

/// True when the block performs no communication at all.
bool is_silent(const LocalBlock& block);

/// Multiplies every constant of every annotation by `factor`.
GlobalProtocol scaled(const GlobalProtocol& g, const Rational& factor);

/// The single clock each role owns, as named in its annotations.
std::optional<std::string> clock_of(const GlobalProtocol& g, const std::string& role);
std::optional<std::string> clock_of(const LocalProtocol& l);

}  // namespace tsv
