#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cemflow/assembly.hpp"
#include "cemflow/spectral.hpp"
#include "cemflow/types.hpp"

namespace cemflow {

enum class NormKind { L2, a, Acal, s, B, E };

std::string_view to_string(NormKind kind);
NormKind norm_kind_from_string(std::string_view name);

/// Evaluates norms on one fine grid. B needs the projector; E needs a
/// trajectory and its time step.
class NormEvaluator {
 public:
  explicit NormEvaluator(const AssembledForms& forms, const PiProjector* pi = nullptr);

  double squared(NormKind kind, const Vec& v) const;
  double norm(NormKind kind, const Vec& v) const;
  /// ||v(T)||_L2^2 + sum_{n < N} tau ||v^n||_B^2, square-rooted.
  double trajectory_norm(const std::vector<Vec>& v, double tau) const;

 private:
  const AssembledForms* forms_;
  const PiProjector* pi_;
};

double compute_norm(NormKind kind, const AssembledForms& forms, const Vec& v, const PiProjector* pi = nullptr);

struct RelativeError {
  double value = 0.0;
  bool absolute = false;  ///< true when the reference norm vanished
};

/// ||u_ms - u_ref|| / ||u_ref|| in the given norm (absolute when ||u_ref|| = 0).
RelativeError relative_error(const NormEvaluator& norms, NormKind kind, const Vec& u_ms, const Vec& u_ref);

/// Bilinear interpolation of a nodal field from `from` onto the nodes of `to`.
Vec prolongate(const FineGrid& from, const Vec& u, const FineGrid& to);

struct ConvergenceRow {
  double H = 0.0;
  double error = 0.0;
  std::optional<double> ratio_percent;  ///< error / previous error * 100
};

/// Rows must be sorted by decreasing H.
std::vector<ConvergenceRow> convergence_table(const std::vector<std::pair<double, double>>& H_and_error);

}  // namespace cemflow
