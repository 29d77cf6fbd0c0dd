#include "cemflow/error.hpp"

namespace cemflow {

namespace {

std::string join_issues(const std::vector<std::string>& issues) {
  std::string out = "invalid configuration";
  for (const auto& i : issues) out += "\n  " + i;
  return out;
}

}  // namespace

ConfigError::ConfigError(std::vector<std::string> issues) : Error(join_issues(issues)), issues_(std::move(issues)) {}

}  // namespace cemflow
