#pragma once

#include <string>

#include "tsv/ast.hpp"

namespace tsv {

/// Canonical `.tscr` text. Reparsing the output yields an equal AST.
std::string print_protocol(const GlobalProtocol& g);
std::string print_protocol(const LocalProtocol& l);

std::string to_string(const TimeAnnotation& a);

}  // namespace tsv
