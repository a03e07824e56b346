#pragma once

#include <map>
#include <stdexcept>
#include <string>

#include "tsv/ast.hpp"

namespace tsv {

/// A choice whose branches, seen by `role`, are neither identical nor told
/// apart by distinct first receives.
class ProjectError : public std::runtime_error {
 public:
  ProjectError(std::string role, SourcePos pos, const std::string& message)
      : std::runtime_error(message), role_(std::move(role)), pos_(pos) {}

  const std::string& role() const { return role_; }
  SourcePos pos() const { return pos_; }

 private:
  std::string role_;
  SourcePos pos_;
};

LocalProtocol project(const GlobalProtocol& g, const std::string& role);

/// One local protocol per declared role, keyed by role name.
std::map<std::string, LocalProtocol> project_all(const GlobalProtocol& g);

/// Projection of a fragment; used to compare choice branches.
LocalBlock project_block(const GlobalBlock& block, const std::string& role);

}  // namespace tsv
