#pragma once

#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

namespace tsv::testing {

inline std::string read_fixture(const std::string& name) {
  std::ifstream in(std::string(TSV_PROTOCOL_DIR) + "/" + name);
  if (!in) throw std::runtime_error("missing fixture " + name);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace tsv::testing
