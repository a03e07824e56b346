#include "tsv/parser.hpp"

#include <algorithm>
#include <map>
#include <vector>

#include "tsv/detail/overloaded.hpp"

namespace tsv {

ParseError::ParseError(SourcePos pos, const std::string& message)
    : std::runtime_error(std::to_string(pos.line) + ":" + std::to_string(pos.column) + ": " + message),
      pos_(pos),
      message_(message) {}

namespace {

enum class Tok { Ident, Number, Punct, End };

struct Token {
  Tok kind;
  std::string text;
  SourcePos pos;
};

std::vector<Token> lex(std::string_view src) {
  std::vector<Token> out;
  int line = 1, col = 1;
  std::size_t i = 0;
  auto advance = [&](std::size_t n) {
    for (std::size_t k = 0; k < n && i < src.size(); ++k, ++i) {
      if (src[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
  };
  auto is_ident_start = [](char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; };
  auto is_ident_char = [](char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; };

  while (i < src.size()) {
    char c = src[i];
    if (std::isspace(static_cast<unsigned char>(c))) {
      advance(1);
      continue;
    }
    if (c == '/' && i + 1 < src.size() && src[i + 1] == '/') {
      while (i < src.size() && src[i] != '\n') advance(1);
      continue;
    }
    if (c == '/' && i + 1 < src.size() && src[i + 1] == '*') {
      SourcePos start{line, col};
      advance(2);
      while (i + 1 < src.size() && !(src[i] == '*' && src[i + 1] == '/')) advance(1);
      if (i + 1 >= src.size()) throw ParseError(start, "unterminated comment");
      advance(2);
      continue;
    }
    SourcePos pos{line, col};
    if (is_ident_start(c)) {
      std::size_t j = i;
      while (j < src.size() && is_ident_char(src[j])) ++j;
      out.push_back({Tok::Ident, std::string(src.substr(i, j - i)), pos});
      advance(j - i);
      continue;
    }
    if (std::isdigit(static_cast<unsigned char>(c))) {
      std::size_t j = i;
      while (j < src.size() && (std::isdigit(static_cast<unsigned char>(src[j])) || src[j] == '.')) ++j;
      out.push_back({Tok::Number, std::string(src.substr(i, j - i)), pos});
      advance(j - i);
      continue;
    }
    if ((c == '<' || c == '>') && i + 1 < src.size() && src[i + 1] == '=') {
      out.push_back({Tok::Punct, std::string(src.substr(i, 2)), pos});
      advance(2);
      continue;
    }
    static constexpr std::string_view kPunct = "[](){}@:,;<>=";
    if (kPunct.find(c) != std::string_view::npos) {
      out.push_back({Tok::Punct, std::string(1, c), pos});
      advance(1);
      continue;
    }
    throw ParseError(pos, std::string("unexpected character '") + c + "'");
  }
  out.push_back({Tok::End, "", SourcePos{line, col}});
  return out;
}

bool is_cmp(const Token& t) {
  return t.kind == Tok::Punct && (t.text == "<" || t.text == "<=" || t.text == "=" || t.text == ">=" || t.text == ">");
}

// Constraint fragment as written, before clock names are resolved.
struct RawConstraint {
  std::string var;  // empty for `true`
  SourcePos var_pos;
  ClockConstraint constraint;
};

class Parser {
 public:
  Parser(std::string_view text, ParseOptions options) : toks_(lex(text)), options_(options) {}

  GlobalProtocol global() {
    GlobalProtocol g;
    expect_word("global");
    expect_word("protocol");
    g.name = ident("protocol name");
    if (accept_word("at")) {
      SourcePos pos = peek().pos;
      g.at_role = ident("role name");
      declare_role(g.roles, *g.at_role, pos);
    }
    role_list(g.roles);
    roles_ = g.roles;
    g.body = global_block();
    expect_end();
    return g;
  }

  LocalProtocol local() {
    LocalProtocol l;
    expect_word("local");
    expect_word("protocol");
    l.name = ident("protocol name");
    expect_word("at");
    l.role = ident("role name");
    std::vector<std::string> all{l.role};
    role_list(all);
    l.peers.assign(all.begin() + 1, all.end());
    roles_ = all;
    self_ = l.role;
    l.body = local_block();
    expect_end();
    return l;
  }

  ClockConstraint constraint_only(const std::string& default_clock) {
    RawConstraint raw = constraint();
    expect_end();
    raw.constraint.clock = raw.var.empty() ? default_clock : raw.var;
    return raw.constraint;
  }

 private:
  // --- token helpers -------------------------------------------------------

  const Token& peek(std::size_t ahead = 0) const { return toks_[std::min(idx_ + ahead, toks_.size() - 1)]; }
  const Token& next() { return toks_[std::min(idx_++, toks_.size() - 1)]; }

  [[noreturn]] void fail(const Token& t, const std::string& what) const {
    std::string found = t.kind == Tok::End ? "end of input" : "'" + t.text + "'";
    throw ParseError(t.pos, "expected " + what + ", found " + found);
  }

  bool at_punct(std::string_view p) const { return peek().kind == Tok::Punct && peek().text == p; }
  bool at_word(std::string_view w) const { return peek().kind == Tok::Ident && peek().text == w; }

  void expect_punct(std::string_view p) {
    if (!at_punct(p)) fail(peek(), "'" + std::string(p) + "'");
    ++idx_;
  }
  bool accept_punct(std::string_view p) {
    if (!at_punct(p)) return false;
    ++idx_;
    return true;
  }
  void expect_word(std::string_view w) {
    if (!at_word(w)) fail(peek(), "'" + std::string(w) + "'");
    ++idx_;
  }
  bool accept_word(std::string_view w) {
    if (!at_word(w)) return false;
    ++idx_;
    return true;
  }
  std::string ident(const std::string& what) {
    if (peek().kind != Tok::Ident) fail(peek(), what);
    return next().text;
  }
  void expect_end() {
    if (peek().kind != Tok::End) fail(peek(), "end of input");
  }

  // --- shared pieces -------------------------------------------------------

  void declare_role(std::vector<std::string>& roles, const std::string& role, SourcePos pos) {
    if (std::find(roles.begin(), roles.end(), role) != roles.end())
      throw ParseError(pos, "role '" + role + "' declared twice");
    roles.push_back(role);
  }

  void role_list(std::vector<std::string>& roles) {
    expect_punct("(");
    if (!at_punct(")")) {
      do {
        expect_word("role");
        SourcePos pos = peek().pos;
        declare_role(roles, ident("role name"), pos);
      } while (accept_punct(","));
    }
    expect_punct(")");
  }

  void check_role(const std::string& role, SourcePos pos) const {
    if (std::find(roles_.begin(), roles_.end(), role) == roles_.end())
      throw ParseError(pos, "undeclared role '" + role + "'");
  }

  Rational number() {
    const Token& t = peek();
    if (t.kind != Tok::Number) fail(t, "number");
    auto v = parse_decimal(t.text);
    if (!v) throw ParseError(t.pos, "malformed number '" + t.text + "'");
    ++idx_;
    return *v;
  }

  // constr := "true" | IDENT cmp NUM | NUM cmp IDENT [cmp NUM]
  RawConstraint constraint() {
    RawConstraint raw;
    SourcePos start = peek().pos;
    if (accept_word("true")) return raw;
    if (peek().kind == Tok::Ident) {
      raw.var_pos = peek().pos;
      raw.var = next().text;
      if (!is_cmp(peek())) fail(peek(), "comparison operator");
      std::string op = next().text;
      Rational k = number();
      apply_var_op_const(raw.constraint, op, k);
    } else if (peek().kind == Tok::Number) {
      Rational k1 = number();
      if (!is_cmp(peek())) fail(peek(), "comparison operator");
      std::string op1 = next().text;
      raw.var_pos = peek().pos;
      raw.var = ident("clock name");
      apply_const_op_var(raw.constraint, k1, op1);
      if (is_cmp(peek())) {
        const Token& op2_tok = next();
        std::string op2 = op2_tok.text;
        Rational k2 = number();
        bool up1 = op1 == "<" || op1 == "<=";
        bool up2 = op2 == "<" || op2 == "<=";
        bool down1 = op1 == ">" || op1 == ">=";
        bool down2 = op2 == ">" || op2 == ">=";
        if (!((up1 && up2) || (down1 && down2)))
          throw ParseError(op2_tok.pos, "chained comparison must use two '<'-style or two '>'-style operators");
        apply_var_op_const(raw.constraint, op2, k2);
      }
    } else {
      fail(peek(), "constraint");
    }
    if (!raw.constraint.well_formed()) throw ParseError(start, "constraint has no solutions");
    return raw;
  }

  static void apply_var_op_const(ClockConstraint& c, const std::string& op, const Rational& k) {
    if (op == "<") c.upper = Bound::open(k);
    else if (op == "<=") c.upper = Bound::closed(k);
    else if (op == ">") c.lower = Bound::open(k);
    else if (op == ">=") c.lower = Bound::closed(k);
    else {
      c.lower = Bound::closed(k);
      c.upper = Bound::closed(k);
    }
  }

  static void apply_const_op_var(ClockConstraint& c, const Rational& k, const std::string& op) {
    if (op == "<") c.lower = Bound::open(k);
    else if (op == "<=") c.lower = Bound::closed(k);
    else if (op == ">") c.upper = Bound::open(k);
    else if (op == ">=") c.upper = Bound::closed(k);
    else {
      c.lower = Bound::closed(k);
      c.upper = Bound::closed(k);
    }
  }

  // annot := "[" IDENT "@" IDENT ":" constr ["," "reset" "(" IDENT ")"] "]"
  std::pair<TimeAnnotation, SourcePos> annotation() {
    SourcePos start = peek().pos;
    expect_punct("[");
    TimeAnnotation a;
    SourcePos clock_pos = peek().pos;
    std::string binder = ident("clock name");
    expect_punct("@");
    SourcePos owner_pos = peek().pos;
    a.owner = ident("role name");
    check_role(a.owner, owner_pos);
    expect_punct(":");
    RawConstraint raw = constraint();
    std::optional<std::pair<std::string, SourcePos>> reset;
    while (accept_punct(",")) {
      if (at_punct("]")) break;  // tolerate a trailing comma
      expect_word("reset");
      expect_punct("(");
      SourcePos p = peek().pos;
      reset = {ident("clock name"), p};
      expect_punct(")");
    }
    expect_punct("]");

    std::string clock = bind_clock(a.owner, binder, clock_pos);
    if (!raw.var.empty() && raw.var != clock) {
      if (!options_.lenient_clock_names)
        throw ParseError(raw.var_pos, "constraint uses clock '" + raw.var + "' but role '" + a.owner +
                                          "' owns clock '" + clock + "'");
    }
    if (reset && reset->first != clock && !options_.lenient_clock_names)
      throw ParseError(reset->second,
                       "reset of clock '" + reset->first + "' but role '" + a.owner + "' owns clock '" + clock + "'");
    a.clock = clock;
    a.constraint = raw.constraint;
    a.constraint.clock = clock;
    a.reset = reset.has_value();
    return {a, start};
  }

  // One clock per role: the first binder seen wins.
  std::string bind_clock(const std::string& role, const std::string& binder, SourcePos pos) {
    auto [it, inserted] = clocks_.emplace(role, binder);
    if (!inserted && it->second != binder && !options_.lenient_clock_names)
      throw ParseError(pos, "role '" + role + "' already owns clock '" + it->second + "', cannot also use '" +
                                binder + "'");
    return it->second;
  }

  std::vector<std::string> sorts() {
    std::vector<std::string> out;
    expect_punct("(");
    if (!at_punct(")")) {
      do out.push_back(ident("payload sort"));
      while (accept_punct(","));
    }
    expect_punct(")");
    return out;
  }

  void check_continue(const std::string& label, SourcePos pos) const {
    if (std::find(rec_labels_.begin(), rec_labels_.end(), label) == rec_labels_.end())
      throw ParseError(pos, "continue '" + label + "' is not inside 'rec " + label + "'");
  }

  // --- global --------------------------------------------------------------

  GlobalBlock global_block() {
    expect_punct("{");
    GlobalBlock block;
    while (!at_punct("}")) {
      if (peek().kind == Tok::End) fail(peek(), "'}'");
      block.push_back(global_stmt());
    }
    expect_punct("}");
    return block;
  }

  GlobalStmt global_stmt() {
    SourcePos pos = peek().pos;
    if (accept_word("choice")) {
      expect_word("at");
      SourcePos at_pos = peek().pos;
      GlobalChoice c;
      c.at = ident("role name");
      check_role(c.at, at_pos);
      c.branches.push_back(global_block());
      while (accept_word("or")) c.branches.push_back(global_block());
      return {std::move(c), pos};
    }
    if (accept_word("rec")) {
      GlobalRec r;
      r.label = ident("recursion label");
      rec_labels_.push_back(r.label);
      r.body = global_block();
      rec_labels_.pop_back();
      return {std::move(r), pos};
    }
    if (accept_word("continue")) {
      Continue c{ident("recursion label")};
      check_continue(c.label, pos);
      expect_punct(";");
      return {std::move(c), pos};
    }

    std::vector<std::pair<TimeAnnotation, SourcePos>> annots;
    while (at_punct("[")) annots.push_back(annotation());
    SourcePos msg_pos = peek().pos;
    Interaction i;
    i.label = ident("message label");
    i.sorts = sorts();
    expect_word("from");
    SourcePos from_pos = peek().pos;
    i.from = ident("role name");
    check_role(i.from, from_pos);
    expect_word("to");
    SourcePos to_pos = peek().pos;
    i.to = ident("role name");
    check_role(i.to, to_pos);
    expect_punct(";");
    if (i.from == i.to) throw ParseError(to_pos, "message '" + i.label + "' sent by '" + i.from + "' to itself");

    if (annots.size() != 2)
      throw ParseError(annots.empty() ? msg_pos : annots.front().second,
                       "interaction needs one annotation for the sender and one for the receiver");
    bool send_set = false, recv_set = false;
    for (auto& [a, apos] : annots) {
      if (a.owner == i.from && !send_set) {
        i.send = a;
        send_set = true;
      } else if (a.owner == i.to && !recv_set) {
        i.recv = a;
        recv_set = true;
      } else {
        throw ParseError(apos, "annotation owner '" + a.owner + "' must be the sender '" + i.from +
                                   "' or the receiver '" + i.to + "', once each");
      }
    }
    if (!send_set || !recv_set) throw ParseError(msg_pos, "missing annotation for sender or receiver");
    return {std::move(i), pos};
  }

  // --- local ---------------------------------------------------------------

  LocalBlock local_block() {
    expect_punct("{");
    LocalBlock block;
    while (!at_punct("}")) {
      if (peek().kind == Tok::End) fail(peek(), "'}'");
      block.push_back(local_stmt());
    }
    expect_punct("}");
    return block;
  }

  LocalStmt local_stmt() {
    SourcePos pos = peek().pos;
    if (accept_word("choice")) {
      expect_word("at");
      SourcePos at_pos = peek().pos;
      LocalChoice c;
      c.at = ident("role name");
      check_role(c.at, at_pos);
      c.kind = c.at == self_ ? ChoiceKind::Internal : ChoiceKind::External;
      c.branches.push_back(local_block());
      while (accept_word("or")) c.branches.push_back(local_block());
      if (c.kind == ChoiceKind::External) check_external(c, pos);
      return {std::move(c), pos};
    }
    if (accept_word("rec")) {
      LocalRec r;
      r.label = ident("recursion label");
      rec_labels_.push_back(r.label);
      r.body = local_block();
      rec_labels_.pop_back();
      return {std::move(r), pos};
    }
    if (accept_word("continue")) {
      Continue c{ident("recursion label")};
      check_continue(c.label, pos);
      expect_punct(";");
      return {std::move(c), pos};
    }

    if (!at_punct("[")) fail(peek(), "annotation");
    auto [annot, annot_pos] = annotation();
    if (at_punct("[")) throw ParseError(peek().pos, "local action takes exactly one annotation");
    if (annot.owner != self_)
      throw ParseError(annot_pos, "annotation owner '" + annot.owner + "' is not the local role '" + self_ + "'");
    std::string label = ident("message label");
    std::vector<std::string> sort_list = sorts();
    if (accept_word("to")) {
      SourcePos p = peek().pos;
      Send s{label, sort_list, ident("role name"), annot};
      check_peer(s.to, p);
      if (at_word("from")) throw ParseError(peek().pos, "local action cannot have both 'to' and 'from'");
      expect_punct(";");
      return {std::move(s), pos};
    }
    if (accept_word("from")) {
      SourcePos p = peek().pos;
      Receive r{label, sort_list, ident("role name"), annot};
      check_peer(r.from, p);
      if (at_word("to")) throw ParseError(peek().pos, "local action cannot have both 'to' and 'from'");
      expect_punct(";");
      return {std::move(r), pos};
    }
    fail(peek(), "'to' or 'from'");
  }

  void check_peer(const std::string& role, SourcePos pos) const {
    check_role(role, pos);
    if (role == self_) throw ParseError(pos, "role '" + role + "' cannot communicate with itself");
  }

  static void check_external(const LocalChoice& c, SourcePos pos) {
    std::set<ActionKey> seen;
    for (const auto& branch : c.branches) {
      auto first = first_actions(branch);
      if (first.empty()) throw ParseError(pos, "external choice branch must start with a receive");
      for (const auto& key : first) {
        if (std::get<0>(key) != Direction::Receive)
          throw ParseError(pos, "external choice branch must start with a receive");
        if (!seen.insert(key).second)
          throw ParseError(pos, "external choice branches are not distinguished by their first receive");
      }
    }
  }

  std::vector<Token> toks_;
  std::size_t idx_ = 0;
  ParseOptions options_;
  std::vector<std::string> roles_;
  std::string self_;
  std::map<std::string, std::string> clocks_;
  std::vector<std::string> rec_labels_;
};

}  // namespace

GlobalProtocol parse_global(std::string_view text, const ParseOptions& options) {
  return Parser(text, options).global();
}

LocalProtocol parse_local(std::string_view text, const ParseOptions& options) {
  return Parser(text, options).local();
}

ClockConstraint parse_constraint(std::string_view text, const std::string& default_clock) {
  return Parser(text, {}).constraint_only(default_clock);
}

}  // namespace tsv
