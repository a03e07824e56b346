#include "tsv/projector.hpp"

#include <algorithm>

#include "tsv/detail/overloaded.hpp"

namespace tsv {
namespace {

using detail::overloaded;

// Distinguishable for a non-chooser: every branch starts with receives only,
// and no (from, label) pair starts two branches.
bool receives_distinguish(const std::vector<LocalBlock>& branches) {
  std::set<ActionKey> seen;
  for (const auto& b : branches) {
    if (b.empty()) return false;
    std::set<ActionKey> first = first_actions(b);
    if (first.empty()) return false;
    for (const auto& key : first) {
      if (std::get<0>(key) != Direction::Receive) return false;
      if (!seen.insert(key).second) return false;
    }
  }
  return true;
}

bool involves(const std::vector<GlobalBlock>& blocks, const std::string& role) {
  for (const auto& block : blocks)
    for (const auto& stmt : block) {
      bool hit = std::visit(overloaded{
                                [&](const Interaction& i) { return i.from == role || i.to == role; },
                                [&](const GlobalChoice& c) { return c.at == role || involves(c.branches, role); },
                                [&](const GlobalRec& r) { return involves({r.body}, role); },
                                [](const Continue&) { return false; },
                            },
                            stmt.node);
      if (hit) return true;
    }
  return false;
}

// True when the block continues a loop that is not bound inside it.
bool escapes(const GlobalBlock& block, std::vector<std::string> bound) {
  for (const auto& stmt : block) {
    bool hit = std::visit(overloaded{
                              [](const Interaction&) { return false; },
                              [&](const GlobalChoice& c) {
                                return std::any_of(c.branches.begin(), c.branches.end(),
                                                   [&](const GlobalBlock& b) { return escapes(b, bound); });
                              },
                              [&](const GlobalRec& r) {
                                auto inner = bound;
                                inner.push_back(r.label);
                                return escapes(r.body, inner);
                              },
                              [&](const Continue& c) {
                                return std::find(bound.begin(), bound.end(), c.label) == bound.end();
                              },
                          },
                          stmt.node);
    if (hit) return true;
  }
  return false;
}

void project_into(const GlobalBlock& block, const std::string& role, LocalBlock& out) {
  for (const auto& stmt : block) {
    std::visit(
        overloaded{
            [&](const Interaction& i) {
              if (i.from == role)
                out.push_back({Send{i.label, i.sorts, i.to, i.send}, stmt.pos});
              else if (i.to == role)
                out.push_back({Receive{i.label, i.sorts, i.from, i.recv}, stmt.pos});
            },
            [&](const GlobalChoice& c) {
              std::vector<LocalBlock> branches;
              for (const auto& b : c.branches) branches.push_back(project_block(b, role));
              if (c.at == role) {
                out.push_back({LocalChoice{ChoiceKind::Internal, role, std::move(branches)}, stmt.pos});
                return;
              }
              bool identical = std::all_of(branches.begin(), branches.end(),
                                           [&](const LocalBlock& b) { return b == branches.front(); });
              if (identical) {
                for (auto& s : branches.front()) out.push_back(std::move(s));
                return;
              }
              if (receives_distinguish(branches)) {
                out.push_back({LocalChoice{ChoiceKind::External, c.at, std::move(branches)}, stmt.pos});
                return;
              }
              throw ProjectError(role, stmt.pos,
                                 "role " + role + " cannot tell the branches of choice at " + c.at +
                                     " apart: projections differ but do not start with distinct receives");
            },
            [&](const GlobalRec& r) {
              if (!involves({r.body}, role) && !escapes(r.body, {r.label})) return;
              LocalBlock body = project_block(r.body, role);
              if (!is_silent(body)) out.push_back({LocalRec{r.label, std::move(body)}, stmt.pos});
            },
            [&](const Continue& c) { out.push_back({c, stmt.pos}); },
        },
        stmt.node);
  }
}

}  // namespace

LocalBlock project_block(const GlobalBlock& block, const std::string& role) {
  LocalBlock out;
  project_into(block, role, out);
  return out;
}

LocalProtocol project(const GlobalProtocol& g, const std::string& role) {
  if (std::find(g.roles.begin(), g.roles.end(), role) == g.roles.end())
    throw ProjectError(role, {}, "role " + role + " is not declared in protocol " + g.name);
  LocalProtocol l;
  l.name = g.name;
  l.role = role;
  for (const auto& r : g.roles)
    if (r != role) l.peers.push_back(r);
  l.body = project_block(g.body, role);
  return l;
}

std::map<std::string, LocalProtocol> project_all(const GlobalProtocol& g) {
  std::map<std::string, LocalProtocol> out;
  for (const auto& r : g.roles) out.emplace(r, project(g, r));
  return out;
}

}  // namespace tsv
