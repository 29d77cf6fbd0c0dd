#pragma once

#include <memory>
#include <vector>

#include <Eigen/Core>
#include <Eigen/LU>
#include <Eigen/QR>

#include "cemflow/assembly.hpp"
#include "cemflow/cem.hpp"
#include "cemflow/fields.hpp"
#include "cemflow/types.hpp"

namespace cemflow {

/// Dense factorization of a reduced multiscale matrix. Falls back to a
/// rank-revealing solve when the matrix is not safely invertible.
class ReducedSystem {
 public:
  explicit ReducedSystem(const Mat& matrix);
  Vec solve(const Vec& rhs) const;
  Index size() const noexcept { return n_; }
  bool rank_revealing() const noexcept { return static_cast<bool>(cod_); }

 private:
  Index n_;
  std::unique_ptr<Eigen::PartialPivLU<Mat>> lu_;
  std::unique_ptr<Eigen::CompleteOrthogonalDecomposition<Mat>> cod_;
};

/// Fine-grid data vectors of a steady problem.
struct SteadyLoads {
  Vec g_tilde;  ///< nodal interpolant of g over the whole domain
  Vec f_load;   ///< (f, v)
  Vec q_load;   ///< (q, v)_{Gamma_N}
};

SteadyLoads steady_loads(const AssembledForms& forms, const SpaceTimeFunction& g, const SpaceTimeFunction& f);

struct SteadySolution {
  Vec coeff;  ///< coordinates of w^m in the multiscale basis
  Vec u;      ///< u_ms = P coeff - D + N + g_tilde
  Vec D;
  Vec N;
};

/// A(w, v) = (f, v) - A(g, v) + (q, v) + A(D, v) - A(N, v) for v in V^m_ms.
SteadySolution steady_solve(const AssembledForms& forms, const MultiscaleSpace& basis, const Vec& D,
                            const Vec& N, const SteadyLoads& loads);

/// Data of a time-dependent problem. `g` must be a closed form on the whole
/// domain; `u_init` is evaluated at t = 0.
struct TransientData {
  SpaceTimeFunction g;
  SpaceTimeFunction f;
  SpaceTimeFunction u_init;
  Reaction reaction;
};

struct SchemeConfig {
  double tau = 0.1;
  int steps = 10;
  Scheme scheme = Scheme::cd;
  int ode_substeps = 10;

  double T() const { return tau * steps; }
};

/// Builds a SchemeConfig, rejecting T that is not an integer number of steps.
SchemeConfig make_scheme(double tau, double T, Scheme scheme, int ode_substeps = 10);

struct TransientState {
  int n = 0;
  double t = 0.0;
  Vec coeff;
  Vec u;
  Vec D;
  Vec N;
};

struct TransientResult {
  std::vector<Vec> u;  ///< u_ms at t_0 ... t_N
  TransientState final;
  double max_abs = 0.0;
};

/// Precomputed pieces shared by every time step of one multiscale run.
class TransientContext {
 public:
  TransientContext(const CemInputs& in, const MultiscaleSpace& basis, int layers, const TransientData& data,
                   const SchemeConfig& config);

  const SchemeConfig& config() const noexcept { return config_; }
  double time(int n) const { return n * config_.tau; }
  const Vec& g_tilde(int n) const { return g_hist_[std::size_t(n)]; }
  Vec g_tilde_t(int n) const;
  const Vec& D(int n) const { return D_hist_[std::size_t(n)]; }
  const Vec& N(int n) const { return N_hist_[std::size_t(n)]; }
  /// z = g_tilde - D + N at level n, and its discrete time derivative.
  Vec z(int n) const;
  Vec z_t(int n) const;

  /// L2 projection of u_init - g + D - N onto V^m_ms at t = 0.
  TransientState init() const;
  /// One Backward Euler step of the configured scheme.
  TransientState step(const TransientState& prev) const;
  /// One Strang step (half nonlinear, full linear, half nonlinear).
  TransientState strang_step(const TransientState& prev) const;

  const MultiscaleSpace& basis() const noexcept { return *basis_; }
  const AssembledForms& forms() const noexcept { return *in_.forms; }

 private:
  Vec assemble(const Vec& coeff, int n) const;

  CemInputs in_;
  const MultiscaleSpace* basis_;
  TransientData data_;
  SchemeConfig config_;
  std::vector<Vec> g_hist_;
  std::vector<Vec> D_hist_;
  std::vector<Vec> N_hist_;
  Vec q_load_;
  Mat G_M_;
  Mat G_X_;
  std::unique_ptr<ReducedSystem> lhs_;
  std::unique_ptr<ReducedSystem> gram_;
};

TransientState transient_init(const TransientContext& ctx);
TransientResult transient_solve(const TransientContext& ctx);
TransientResult strang_solve(const TransientContext& ctx);

/// Integrates dw/dt = f(w + z) - f(z) per node over tau_half with fixed-step RK4.
Vec nonlinear_substep(const Vec& w, const Vec& z, double tau_half, const Reaction& reaction, int substeps = 10);

/// Fine-scale references on the grid of `forms`.
Vec reference_steady(const AssembledForms& forms, const SteadyLoads& loads);
/// Backward Euler with the full convective form; reaction handled implicitly
/// by fixed-point iteration on a fixed factorization. Returns u at every
/// `keep_every`-th step starting with t = 0, or only the final state when
/// keep_every is 0.
std::vector<Vec> reference_transient(const AssembledForms& forms, const TransientData& data, double tau,
                                     int steps, int keep_every = 0);

}  // namespace cemflow
