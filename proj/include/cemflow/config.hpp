#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "cemflow/cem.hpp"
#include "cemflow/problem.hpp"

namespace cemflow {

/// How the coarse list and the layer list are combined in a sweep.
enum class Pairing { zip, product };

struct TimeBlock {
  bool enabled = false;
  double T = 1.0;
  std::vector<double> tau{0.1};
  std::vector<Scheme> schemes{Scheme::cd};
};

struct ReferenceBlock {
  int nx = 0;  ///< 0 means the problem's fine grid
  int ny = 0;
  int steps = 1000;
};

/// A fully validated experiment description.
struct ExperimentConfig {
  ProblemSpec problem;
  std::vector<int> coarse{10};  ///< coarse elements per axis, one entry per level
  std::vector<int> layers{3};   ///< -1 is the global corrector
  Pairing pairing = Pairing::zip;
  bool corrector_errors = false;

  TimeBlock time;
  int ode_substeps = 10;
  ReferenceBlock reference;

  std::string output = "out";
  int threads = 1;
  std::uint64_t seed = 1;

  /// Every (section.key, value) after defaults, in sorted order.
  std::map<std::string, std::string> resolved;
  std::string source_text;

  /// (N, layers) cells of a sweep in execution order.
  std::vector<std::pair<int, int>> cells() const;
};

/// Parses and validates. Throws ConfigError listing every problem found.
ExperimentConfig parse_config(const std::string& path);
ExperimentConfig parse_config_text(const std::string& text);

/// Reapplies the validation after command-line overrides.
void validate_config(const ExperimentConfig& config);

/// Canonical text of the resolved configuration; parses back to the same config.
std::string dump_config(const ExperimentConfig& config);

std::string_view to_string(Scheme scheme);
Scheme scheme_from_string(std::string_view name);

}  // namespace cemflow
