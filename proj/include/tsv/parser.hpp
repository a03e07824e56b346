#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

#include "tsv/ast.hpp"

namespace tsv {

/// Syntax or semantic error in protocol text, with a 1-based location.
class ParseError : public std::runtime_error {
 public:
  ParseError(SourcePos pos, const std::string& message);

  SourcePos pos() const { return pos_; }
  const std::string& message() const { return message_; }

 private:
  SourcePos pos_;
  std::string message_;
};

struct ParseOptions {
  /// Accept annotations whose constraint or reset names a different clock
  /// than the binder (`[x@M: xm=22]`, `[mx@M: ...]`) and rewrite them to the
  /// role's clock. Off by default: mismatches are semantic errors.
  bool lenient_clock_names = false;
};

GlobalProtocol parse_global(std::string_view text, const ParseOptions& options = {});
LocalProtocol parse_local(std::string_view text, const ParseOptions& options = {});

/// Parses the body of an annotation constraint, e.g. "21.5<xm<22" or "true".
/// `true` yields a constraint on `default_clock`.
ClockConstraint parse_constraint(std::string_view text, const std::string& default_clock = "x");

}  // namespace tsv
