#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cemflow/config.hpp"
#include "cemflow/metrics.hpp"

namespace cemflow {

enum class Command { steady, transient, nonlinear, spectrum, sweep, reference };

Command command_from_string(std::string_view name);
std::string_view to_string(Command command);

/// One row of results.csv. Missing quantities are NaN.
struct ResultRow {
  std::string command;
  double H = 0.0;
  int Nov = 0;
  int lm = 0;
  double contrast = 0.0;
  double cflow = 0.0;
  std::string scheme = "-";
  double tau = 0.0;
  double Lambda = 0.0;
  double LambdaPrime = 0.0;
  double E_a = 0.0;  ///< steady: Acal quasi-norm; transient: time-integrated energy
  double E_L = 0.0;  ///< L2 at the final time
  double D_a = 0.0;  ///< Dirichlet corrector vs the global one, B-norm
  double D_L = 0.0;
  double N_a = 0.0;  ///< Neumann corrector vs the global one, B-norm
  double N_L = 0.0;
  double wall_s = 0.0;
};

inline constexpr std::string_view kResultsHeader =
    "command,H,Nov,lm,contrast,cflow,scheme,tau,Lambda,LambdaPrime,E_a,E_L,D_a,D_L,N_a,N_L,wall_s";

std::string format_row(const ResultRow& row);

struct RunReport {
  std::vector<ResultRow> rows;
  std::map<std::string, double> timings;  ///< seconds per phase, summed over cells
  std::vector<std::string> files;         ///< written artifacts relative to the output directory
  int steps_logged = 0;                   ///< time steps of the last transient cell
};

/// Runs `command` and writes results.csv, convergence.csv, snapshots/ and
/// manifest.json under config.output. Deterministic apart from wall_s.
RunReport run_experiment(Command command, const ExperimentConfig& config);

/// (ny+1) rows of (nx+1) values, bottom row first.
void write_snapshot(const std::string& path, const FineGrid& grid, const Vec& u);
Mat read_snapshot(const std::string& path);

/// 64-bit FNV-1a.
std::uint64_t fnv1a(std::string_view data, std::uint64_t h = 0xcbf29ce484222325ULL);

}  // namespace cemflow
