#include "tsv/ast.hpp"

#include "tsv/detail/overloaded.hpp"

namespace tsv {
namespace {

using detail::overloaded;

// Collects first actions; returns true when control can fall off the end of
// the block without communicating.
bool collect_first(const LocalBlock& block, std::set<ActionKey>& out) {
  for (const auto& stmt : block) {
    bool passes = std::visit(
        overloaded{
            [&](const Send& s) {
              out.emplace(Direction::Send, s.to, s.label);
              return false;
            },
            [&](const Receive& r) {
              out.emplace(Direction::Receive, r.from, r.label);
              return false;
            },
            [&](const LocalChoice& c) {
              bool any = c.branches.empty();
              for (const auto& b : c.branches) any = collect_first(b, out) || any;
              return any;
            },
            [&](const LocalRec& r) { return collect_first(r.body, out); },
            [&](const Continue&) { return false; },
        },
        stmt.node);
    if (!passes) return false;
  }
  return true;
}

void scale_block(GlobalBlock& block, const Rational& factor) {
  for (auto& stmt : block) {
    std::visit(overloaded{
                   [&](Interaction& i) {
                     i.send.constraint = i.send.constraint.scaled(factor);
                     i.recv.constraint = i.recv.constraint.scaled(factor);
                   },
                   [&](GlobalChoice& c) {
                     for (auto& b : c.branches) scale_block(b, factor);
                   },
                   [&](GlobalRec& r) { scale_block(r.body, factor); },
                   [](Continue&) {},
               },
               stmt.node);
  }
}

std::optional<std::string> find_clock(const GlobalBlock& block, const std::string& role) {
  for (const auto& stmt : block) {
    std::optional<std::string> found = std::visit(
        overloaded{
            [&](const Interaction& i) -> std::optional<std::string> {
              if (i.from == role) return i.send.clock;
              if (i.to == role) return i.recv.clock;
              return std::nullopt;
            },
            [&](const GlobalChoice& c) -> std::optional<std::string> {
              for (const auto& b : c.branches)
                if (auto f = find_clock(b, role)) return f;
              return std::nullopt;
            },
            [&](const GlobalRec& r) { return find_clock(r.body, role); },
            [](const Continue&) -> std::optional<std::string> { return std::nullopt; },
        },
        stmt.node);
    if (found) return found;
  }
  return std::nullopt;
}

std::optional<std::string> find_clock(const LocalBlock& block) {
  for (const auto& stmt : block) {
    std::optional<std::string> found = std::visit(
        overloaded{
            [](const Send& s) -> std::optional<std::string> { return s.annot.clock; },
            [](const Receive& r) -> std::optional<std::string> { return r.annot.clock; },
            [](const LocalChoice& c) -> std::optional<std::string> {
              for (const auto& b : c.branches)
                if (auto f = find_clock(b)) return f;
              return std::nullopt;
            },
            [](const LocalRec& r) { return find_clock(r.body); },
            [](const Continue&) -> std::optional<std::string> { return std::nullopt; },
        },
        stmt.node);
    if (found) return found;
  }
  return std::nullopt;
}

}  // namespace

std::set<ActionKey> first_actions(const LocalBlock& block) {
  std::set<ActionKey> out;
  collect_first(block, out);
  return out;
}

bool is_silent(const LocalBlock& block) {
  for (const auto& stmt : block) {
    bool silent = std::visit(overloaded{
                                 [](const Send&) { return false; },
                                 [](const Receive&) { return false; },
                                 [](const LocalChoice& c) {
                                   for (const auto& b : c.branches)
                                     if (!is_silent(b)) return false;
                                   return true;
                                 },
                                 [](const LocalRec& r) { return is_silent(r.body); },
                                 [](const Continue&) { return true; },
                             },
                             stmt.node);
    if (!silent) return false;
  }
  return true;
}

GlobalProtocol scaled(const GlobalProtocol& g, const Rational& factor) {
  GlobalProtocol out = g;
  scale_block(out.body, factor);
  return out;
}

std::optional<std::string> clock_of(const GlobalProtocol& g, const std::string& role) {
  return find_clock(g.body, role);
}

std::optional<std::string> clock_of(const LocalProtocol& l) { return find_clock(l.body); }

}  // namespace tsv
