#pragma once

#include <array>
#include <functional>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "cemflow/fields.hpp"
#include "cemflow/grid.hpp"
#include "cemflow/types.hpp"

namespace cemflow {

/// 2x2 tensor Gauss rule on the unit reference cell and 2-point rule on the
/// unit reference edge.
struct QuadratureRule {
  static constexpr int cell_points = 4;
  static constexpr int edge_points = 2;
  static std::array<double, 2> abscissae();  ///< on [0, 1]
};

using ElementMatrix = Eigen::Matrix4d;
using EdgeMatrix = Eigen::Matrix2d;

/// Unit-coefficient Q1 element matrices on an hx-by-hy rectangle, nodes
/// counterclockwise from the lower-left corner.
ElementMatrix q1_stiffness(double hx, double hy);
ElementMatrix q1_mass(double hx, double hy);

enum class FormKind {
  diffusion,      ///< K
  convection,     ///< C
  robin_full,     ///< R_full
  robin_half,     ///< R_half
  mass,           ///< M
  weighted_mass,  ///< S
  boundary_mass,  ///< M_bnd
  acal,           ///< K + C + R_full
  a,              ///< K + R_full
  quasi,          ///< K + R_half
};

struct InflowReport {
  double min_full_weight = 0.0;  ///< min of b - beta.nu over Gamma_N quadrature points
  double min_half_weight = 0.0;  ///< min of b - beta.nu / 2
  double violation = 0.0;        ///< integral over Gamma_N of max(0, beta.nu - b)
  bool satisfied() const { return violation <= 0.0; }
};

/// Everything assembled on the fine grid. Dirichlet dofs are kept; solves
/// eliminate them through masks.
class AssembledForms {
 public:
  SparseOperator K;
  SparseOperator C;
  SparseOperator R_full;
  SparseOperator R_half;
  SparseOperator M;
  SparseOperator S;
  SparseOperator M_bnd;

  SparseOperator acal;   ///< K + C + R_full
  SparseOperator a;      ///< K + R_full
  SparseOperator quasi;  ///< K + R_half

  InflowReport inflow;

  const SparseOperator& get(FormKind kind) const;

  const GridPair& grids() const { return *grids_; }
  const BoundaryPartition& boundary() const { return *boundary_; }
  const MediumField& medium() const { return *medium_; }
  const VelocityField& velocity() const { return velocity_; }
  const RobinCoefficient& robin() const { return robin_; }
  double C_weight() const { return C_weight_; }
  KappaScale kappa_scale() const { return scale_; }

  /// Cell-level contribution of `kind` on cell c.
  ElementMatrix cell_matrix(Index c, FormKind kind) const;
  /// Edge-level contribution of `kind` on boundary edge k (zero on Gamma_D).
  EdgeMatrix edge_matrix(Index k, FormKind kind) const;

  /// Neumann/Robin boundary edges whose cell lies in coarse element e.
  std::span<const Index> element_neumann_edges(Index e) const;

 private:
  friend AssembledForms assemble_forms(const GridPair&, const MediumField&, const VelocityField&,
                                       const BoundaryPartition&, const RobinCoefficient&, double, KappaScale);
  const GridPair* grids_ = nullptr;
  const BoundaryPartition* boundary_ = nullptr;
  const MediumField* medium_ = nullptr;
  VelocityField velocity_ = VelocityField::zero();
  RobinCoefficient robin_;
  double C_weight_ = 24.0;
  KappaScale scale_ = KappaScale::global;
  ElementMatrix k_ref_;
  ElementMatrix m_ref_;
  std::vector<ElementMatrix> conv_;
  std::vector<ElementMatrix> weighted_;
  std::vector<EdgeMatrix> edge_full_;
  std::vector<EdgeMatrix> edge_half_;
  std::vector<EdgeMatrix> edge_mass_;
  std::vector<std::vector<Index>> element_edges_;
};

/// The grids, medium and boundary must outlive the returned forms.
AssembledForms assemble_forms(const GridPair& grids, const MediumField& medium,
                              const VelocityField& velocity, const BoundaryPartition& boundary,
                              const RobinCoefficient& robin, double C = 24.0,
                              KappaScale scale = KappaScale::global);

/// Dense matrix of `kind` restricted to coarse element e, on its closure
/// nodes in CoarseGrid::fine_nodes order. Includes Gamma_N edges of e.
Mat element_matrix(const AssembledForms& forms, Index e, FormKind kind);

/// y = X_{K_e} x, where X is `kind` restricted to element e. `x` is a global
/// fine vector, the result is in closure-node order of e.
Vec apply_element_form(const AssembledForms& forms, Index e, FormKind kind, const Vec& x);

Vec interpolate(const SpaceTimeFunction& fn, const FineGrid& grid, double t = 0.0);
Vec interpolate(const std::function<double(double, double)>& fn, const FineGrid& grid);

/// (q, v)_{Gamma_N} using the per-edge flux constants of the partition.
Vec boundary_load(const FineGrid& grid, const BoundaryPartition& boundary);
/// (q, v)_{Gamma_N} for a flux evaluated pointwise at time t.
Vec boundary_load(const FineGrid& grid, const BoundaryPartition& boundary,
                  const SpaceTimeFunction& q, double t);

/// (f, v) with f evaluated at the cell quadrature points.
Vec source_load(const FineGrid& grid, const SpaceTimeFunction& f, double t = 0.0);

/// Principal submatrix on `dofs`, in the order given.
SparseOperator restrict(const SparseOperator& op, std::span<const Index> dofs);

/// Gathers `dofs` entries of a global vector.
Vec restrict(const Vec& v, std::span<const Index> dofs);

}  // namespace cemflow
