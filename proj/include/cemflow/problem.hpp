#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "cemflow/assembly.hpp"
#include "cemflow/cem.hpp"
#include "cemflow/fields.hpp"
#include "cemflow/grid.hpp"
#include "cemflow/solvers.hpp"
#include "cemflow/spectral.hpp"

namespace cemflow {

/// Physics and discretization choices shared by every coarse level of a run.
struct ProblemSpec {
  DomainSpec domain;
  int nx = 200;
  int ny = 200;

  MediumPattern pattern = MediumPattern::channels;
  double contrast = 1e4;
  std::uint64_t medium_seed = 1;
  std::string medium_file;  ///< overrides the builtin pattern when set

  VelocityMode velocity = VelocityMode::vortex;
  double c_flow = 0.0;
  Eigen::Vector2d custom_velocity = Eigen::Vector2d::Zero();

  /// Intervals are fractions of each side in [0, 1]. Empty means all Dirichlet.
  std::vector<BoundarySegment> segments;
  RobinCoefficient robin;

  std::string g = "x1sq_plus_exp";
  std::string f = "zero";
  std::string u_init = "x1sq_plus_exp";
  std::string reaction = "none";

  int lm = 3;
  double C = 24.0;
  KappaScale kappa_scale = KappaScale::cell;
  bool symmetrize = false;

  TransientData transient_data() const;
};

/// Maps side fractions in [0, 1] to coordinates on the domain.
std::vector<BoundarySegment> segments_on_domain(const DomainSpec& domain, std::vector<BoundarySegment> segments);

/// Every side Dirichlet.
std::vector<BoundarySegment> dirichlet_layout();
/// Left, right and bottom Neumann/Robin with the given fluxes, top Dirichlet.
/// The bottom side is split at x = 1/2 into two segments.
std::vector<BoundarySegment> robin_layout(double q_left = -1.0, double q_right = 1.0, double q_bottom_left = 0.0,
                                          double q_bottom_right = 1.0);

/// Grids, fields, forms and (optionally) the auxiliary space of one
/// (fine grid, coarse grid) pair. Not movable: the forms point into it.
class Instance {
 public:
  static std::unique_ptr<Instance> create(const ProblemSpec& spec, int Nx, int Ny, bool with_aux = true,
                                          int threads = 1);

  Instance(const Instance&) = delete;
  Instance& operator=(const Instance&) = delete;

  const ProblemSpec& spec() const noexcept { return spec_; }
  const GridPair& grids() const noexcept { return grids_; }
  const MediumField& medium() const noexcept { return medium_; }
  const VelocityField& velocity() const noexcept { return velocity_; }
  const BoundaryPartition& boundary() const noexcept { return boundary_; }
  const AssembledForms& forms() const noexcept { return forms_; }
  bool has_aux() const noexcept { return aux_.has_value(); }
  /// Solves the local spectral problems if not done yet.
  void build_aux();
  const AuxSpace& aux() const;
  const PiProjector& pi() const;
  CemInputs inputs() const;
  int threads() const noexcept { return threads_; }

  /// Loads of the steady problem (g, f, q).
  SteadyLoads steady_loads() const;

 private:
  Instance(const ProblemSpec& spec, int Nx, int Ny, int threads);

  ProblemSpec spec_;
  GridPair grids_;
  MediumField medium_;
  VelocityField velocity_;
  BoundaryPartition boundary_;
  AssembledForms forms_;
  std::optional<AuxSpace> aux_;
  std::optional<PiProjector> pi_;
  int threads_;
};

}  // namespace cemflow
