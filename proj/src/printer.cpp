#include "tsv/printer.hpp"

#include <sstream>

#include "tsv/detail/overloaded.hpp"

namespace tsv {
namespace {

using detail::overloaded;

constexpr int kIndent = 4;

std::string pad(int depth) { return std::string(depth * kIndent, ' '); }

std::string sort_list(const std::vector<std::string>& sorts) {
  std::string out = "(";
  for (std::size_t i = 0; i < sorts.size(); ++i) out += (i ? ", " : "") + sorts[i];
  return out + ")";
}

std::string header_roles(const std::vector<std::string>& roles) {
  std::string out = "(";
  for (std::size_t i = 0; i < roles.size(); ++i) out += (i ? ", role " : "role ") + roles[i];
  return out + ")";
}

void print_block(std::ostream& os, const GlobalBlock& block, int depth);
void print_block(std::ostream& os, const LocalBlock& block, int depth);

template <class Branches>
void print_choice(std::ostream& os, const std::string& at, const Branches& branches, int depth) {
  os << pad(depth) << "choice at " << at << " {\n";
  for (std::size_t i = 0; i < branches.size(); ++i) {
    if (i) os << pad(depth) << "} or {\n";
    print_block(os, branches[i], depth + 1);
  }
  os << pad(depth) << "}\n";
}

void print_block(std::ostream& os, const GlobalBlock& block, int depth) {
  for (const auto& stmt : block) {
    std::visit(overloaded{
                   [&](const Interaction& i) {
                     os << pad(depth) << to_string(i.send) << to_string(i.recv) << '\n'
                        << pad(depth) << i.label << sort_list(i.sorts) << " from " << i.from << " to " << i.to
                        << ";\n";
                   },
                   [&](const GlobalChoice& c) { print_choice(os, c.at, c.branches, depth); },
                   [&](const GlobalRec& r) {
                     os << pad(depth) << "rec " << r.label << " {\n";
                     print_block(os, r.body, depth + 1);
                     os << pad(depth) << "}\n";
                   },
                   [&](const Continue& c) { os << pad(depth) << "continue " << c.label << ";\n"; },
               },
               stmt.node);
  }
}

void print_block(std::ostream& os, const LocalBlock& block, int depth) {
  for (const auto& stmt : block) {
    std::visit(overloaded{
                   [&](const Send& s) {
                     os << pad(depth) << to_string(s.annot) << '\n'
                        << pad(depth) << s.label << sort_list(s.sorts) << " to " << s.to << ";\n";
                   },
                   [&](const Receive& r) {
                     os << pad(depth) << to_string(r.annot) << '\n'
                        << pad(depth) << r.label << sort_list(r.sorts) << " from " << r.from << ";\n";
                   },
                   [&](const LocalChoice& c) { print_choice(os, c.at, c.branches, depth); },
                   [&](const LocalRec& r) {
                     os << pad(depth) << "rec " << r.label << " {\n";
                     print_block(os, r.body, depth + 1);
                     os << pad(depth) << "}\n";
                   },
                   [&](const Continue& c) { os << pad(depth) << "continue " << c.label << ";\n"; },
               },
               stmt.node);
  }
}

}  // namespace

std::string to_string(const TimeAnnotation& a) {
  std::string out = "[" + a.clock + "@" + a.owner + ": " + to_string(a.constraint);
  if (a.reset) out += ", reset(" + a.clock + ")";
  return out + "]";
}

std::string print_protocol(const GlobalProtocol& g) {
  std::ostringstream os;
  os << "global protocol " << g.name;
  std::vector<std::string> declared = g.roles;
  if (g.at_role) {
    os << " at " << *g.at_role;
    declared.erase(declared.begin());
  }
  os << header_roles(declared);
  if (g.body.empty()) {
    os << " {}\n";
    return os.str();
  }
  os << " {\n";
  print_block(os, g.body, 1);
  os << "}\n";
  return os.str();
}

std::string print_protocol(const LocalProtocol& l) {
  std::ostringstream os;
  os << "local protocol " << l.name << " at " << l.role << header_roles(l.peers);
  if (l.body.empty()) {
    os << " {}\n";
    return os.str();
  }
  os << " {\n";
  print_block(os, l.body, 1);
  os << "}\n";
  return os.str();
}

}  // namespace tsv
