#include "cemflow/solvers.hpp"

#include <cmath>

#include <Eigen/OrderingMethods>
#include <Eigen/SparseLU>

#include "cemflow/error.hpp"

namespace cemflow {

ReducedSystem::ReducedSystem(const Mat& matrix) : n_(matrix.rows()) {
  CEMFLOW_REQUIRE(matrix.rows() == matrix.cols(), InvalidArgument, "ReducedSystem: matrix must be square");
  CEMFLOW_REQUIRE(matrix.allFinite(), NumericalError, "ReducedSystem: matrix has non-finite entries");
  lu_ = std::make_unique<Eigen::PartialPivLU<Mat>>(matrix);
  if (!(lu_->rcond() > 1e-14)) {
    lu_.reset();
    cod_ = std::make_unique<Eigen::CompleteOrthogonalDecomposition<Mat>>(matrix);
  }
}

Vec ReducedSystem::solve(const Vec& rhs) const {
  CEMFLOW_REQUIRE(rhs.size() == n_, InvalidArgument, "ReducedSystem::solve: size mismatch");
  Vec x = lu_ ? Vec(lu_->solve(rhs)) : Vec(cod_->solve(rhs));
  CEMFLOW_REQUIRE(x.allFinite(), NumericalError, "reduced multiscale system is singular");
  return x;
}

SteadyLoads steady_loads(const AssembledForms& forms, const SpaceTimeFunction& g, const SpaceTimeFunction& f) {
  const auto& grid = forms.grids().fine;
  SteadyLoads loads;
  loads.g_tilde = interpolate(g, grid, 0.0);
  loads.f_load = source_load(grid, f, 0.0);
  loads.q_load = forms.boundary().has_neumann() ? boundary_load(grid, forms.boundary())
                                                : Vec(Vec::Zero(grid.num_nodes()));
  return loads;
}

SteadySolution steady_solve(const AssembledForms& forms, const MultiscaleSpace& basis, const Vec& D,
                            const Vec& N, const SteadyLoads& loads) {
  const Index n = forms.grids().fine.num_nodes();
  CEMFLOW_REQUIRE(D.size() == n && N.size() == n && loads.g_tilde.size() == n && loads.f_load.size() == n &&
                      loads.q_load.size() == n && basis.rows() == n,
                  InvalidArgument, "steady_solve: inconsistent vector sizes");
  const Vec rhs = loads.f_load + loads.q_load + forms.acal * (D - N - loads.g_tilde);
  const ReducedSystem sys(basis.galerkin(forms.acal));
  SteadySolution s;
  s.coeff = sys.solve(basis.apply_transpose(rhs));
  s.D = D;
  s.N = N;
  s.u = basis.apply(s.coeff) - D + N + loads.g_tilde;
  return s;
}

SchemeConfig make_scheme(double tau, double T, Scheme scheme, int ode_substeps) {
  CEMFLOW_REQUIRE(tau > 0.0 && T > 0.0, InvalidArgument, "time step and horizon must be positive");
  const double ratio = T / tau;
  const double steps = std::round(ratio);
  CEMFLOW_REQUIRE(std::abs(ratio - steps) <= 1e-9 * std::max(1.0, ratio), InvalidArgument,
                  "T must be an integer multiple of tau");
  CEMFLOW_REQUIRE(ode_substeps >= 1, InvalidArgument, "ode_substeps must be >= 1");
  return SchemeConfig{tau, int(steps), scheme, ode_substeps};
}

TransientContext::TransientContext(const CemInputs& in, const MultiscaleSpace& basis, int layers,
                                   const TransientData& data, const SchemeConfig& config)
    : in_(in), basis_(&basis), data_(data), config_(config) {
  CEMFLOW_REQUIRE(config.tau > 0.0 && config.steps >= 0, InvalidArgument, "TransientContext: bad scheme");
  const auto& forms = *in.forms;
  const auto& grid = forms.grids().fine;
  for (int n = 0; n <= config.steps; ++n) g_hist_.push_back(interpolate(data.g, grid, time(n)));

  CorrectorData cd;
  cd.g_tilde = [&](double t) { return interpolate(data_.g, grid, t); };
  cd.g_tilde_t = [&](double t) -> Vec {
    if (data_.g.has_dt()) return interpolate(SpaceTimeFunction{"", data_.g.dt, {}}, grid, t);
    return (interpolate(data_.g, grid, t) - interpolate(data_.g, grid, t - config_.tau)) / config_.tau;
  };
  TransientCorrector dc(in, layers, config.scheme, CorrectorKind::dirichlet);
  D_hist_ = dc.march(cd, 0.0, config.tau, config.steps);
  if (forms.boundary().has_neumann()) {
    TransientCorrector nc(in, layers, config.scheme, CorrectorKind::neumann);
    N_hist_ = nc.march(cd, 0.0, config.tau, config.steps);
    q_load_ = boundary_load(grid, forms.boundary());
  } else {
    N_hist_.assign(std::size_t(config.steps) + 1, Vec::Zero(grid.num_nodes()));
    q_load_ = Vec::Zero(grid.num_nodes());
  }

  const SparseOperator& X = config.scheme == Scheme::cd ? forms.acal : forms.a;
  const SparseOperator* ops[] = {&forms.M, &X};
  auto G = basis.galerkin(ops);
  G_M_ = std::move(G[0]);
  G_X_ = std::move(G[1]);
  lhs_ = std::make_unique<ReducedSystem>(G_M_ / config.tau + G_X_);
  gram_ = std::make_unique<ReducedSystem>(G_M_);
}

Vec TransientContext::g_tilde_t(int n) const {
  const auto& grid = in_.forms->grids().fine;
  if (data_.g.has_dt()) return interpolate(SpaceTimeFunction{"", data_.g.dt, {}}, grid, time(n));
  if (n == 0) return (g_hist_[0] - interpolate(data_.g, grid, -config_.tau)) / config_.tau;
  return (g_hist_[std::size_t(n)] - g_hist_[std::size_t(n) - 1]) / config_.tau;
}

Vec TransientContext::z(int n) const { return g_tilde(n) - D(n) + N(n); }

Vec TransientContext::z_t(int n) const {
  Vec zt = g_tilde_t(n);
  if (n > 0) zt += (-(D(n) - D(n - 1)) + (N(n) - N(n - 1))) / config_.tau;
  return zt;
}

Vec TransientContext::assemble(const Vec& coeff, int n) const { return basis_->apply(coeff) + z(n); }

TransientState TransientContext::init() const {
  const auto& forms = *in_.forms;
  const Vec u0 = interpolate(data_.u_init, forms.grids().fine, 0.0);
  TransientState s;
  s.n = 0;
  s.t = 0.0;
  s.coeff = gram_->solve(basis_->apply_transpose(forms.M * (u0 - z(0))));
  s.D = D(0);
  s.N = N(0);
  s.u = assemble(s.coeff, 0);
  return s;
}

TransientState TransientContext::step(const TransientState& prev) const {
  const auto& forms = *in_.forms;
  const int n1 = prev.n + 1;
  CEMFLOW_REQUIRE(n1 <= config_.steps, InvalidArgument, "TransientContext::step: past the final time");
  const double t1 = time(n1);
  const SparseOperator& X = config_.scheme == Scheme::cd ? forms.acal : forms.a;
  Vec rhs = source_load(forms.grids().fine, data_.f, t1) + q_load_ - X * z(n1) - forms.M * z_t(n1);
  if (config_.scheme == Scheme::diffusion) rhs -= forms.C * prev.u;
  TransientState s;
  s.n = n1;
  s.t = t1;
  s.coeff = lhs_->solve(G_M_ * prev.coeff / config_.tau + basis_->apply_transpose(rhs));
  s.D = D(n1);
  s.N = N(n1);
  s.u = assemble(s.coeff, n1);
  return s;
}

TransientState TransientContext::strang_step(const TransientState& prev) const {
  CEMFLOW_REQUIRE(config_.scheme == Scheme::cd, InvalidArgument, "Strang splitting uses the CD scheme");
  const auto& forms = *in_.forms;
  const int n0 = prev.n;
  const int n1 = n0 + 1;
  CEMFLOW_REQUIRE(n1 <= config_.steps, InvalidArgument, "TransientContext::strang_step: past the final time");
  const double half = 0.5 * config_.tau;
  const Vec z0 = z(n0);
  const Vec z1 = z(n1);

  const Vec w_half = nonlinear_substep(prev.u - z0, z0, half, data_.reaction, config_.ode_substeps);

  Vec source = source_load(forms.grids().fine, data_.f, time(n1)) + q_load_ - forms.acal * z1 - forms.M * z_t(n1);
  if (data_.reaction.active()) source += forms.M * z1.unaryExpr(data_.reaction.f);
  const Vec c = lhs_->solve(basis_->apply_transpose(forms.M * w_half / config_.tau + source));

  const Vec w = nonlinear_substep(basis_->apply(c), z1, half, data_.reaction, config_.ode_substeps);
  TransientState s;
  s.n = n1;
  s.t = time(n1);
  s.coeff = c;
  s.D = D(n1);
  s.N = N(n1);
  s.u = w + z1;
  return s;
}

TransientState transient_init(const TransientContext& ctx) { return ctx.init(); }

namespace {

template <class Step>
TransientResult run_steps(const TransientContext& ctx, Step&& step) {
  TransientResult r;
  TransientState s = ctx.init();
  r.u.push_back(s.u);
  r.max_abs = s.u.cwiseAbs().maxCoeff();
  for (int n = 0; n < ctx.config().steps; ++n) {
    s = step(s);
    CEMFLOW_REQUIRE(s.u.allFinite(), NumericalError, "time integration produced non-finite values");
    r.max_abs = std::max(r.max_abs, s.u.cwiseAbs().maxCoeff());
    r.u.push_back(s.u);
  }
  r.final = std::move(s);
  return r;
}

}  // namespace

TransientResult transient_solve(const TransientContext& ctx) {
  return run_steps(ctx, [&](const TransientState& s) { return ctx.step(s); });
}

TransientResult strang_solve(const TransientContext& ctx) {
  return run_steps(ctx, [&](const TransientState& s) { return ctx.strang_step(s); });
}

Vec nonlinear_substep(const Vec& w, const Vec& z, double tau_half, const Reaction& reaction, int substeps) {
  CEMFLOW_REQUIRE(tau_half > 0.0, InvalidArgument, "nonlinear_substep: tau_half must be positive");
  CEMFLOW_REQUIRE(substeps >= 1, InvalidArgument, "nonlinear_substep: substeps must be >= 1");
  CEMFLOW_REQUIRE(w.size() == z.size(), InvalidArgument, "nonlinear_substep: size mismatch");
  if (!reaction.active()) return w;
  const double h = tau_half / substeps;
  Vec out(w.size());
  for (Index k = 0; k < w.size(); ++k) {
    const double zk = z[k];
    const double fz = reaction.f(zk);
    auto rhs = [&](double x) { return reaction.f(x + zk) - fz; };
    double x = w[k];
    for (int s = 0; s < substeps; ++s) {
      const double k1 = rhs(x);
      const double k2 = rhs(x + 0.5 * h * k1);
      const double k3 = rhs(x + 0.5 * h * k2);
      const double k4 = rhs(x + h * k3);
      x += h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4);
    }
    out[k] = x;
  }
  CEMFLOW_REQUIRE(out.allFinite(), NumericalError, "nonlinear substep diverged");
  return out;
}

namespace {

class FreeSolver {
 public:
  FreeSolver(const SparseOperator& op, std::vector<Index> free) : free_(std::move(free)) {
    matrix_ = SparseColMatrix(restrict(op, free_));
    matrix_.makeCompressed();
    lu_.compute(matrix_);
    if (lu_.info() != Eigen::Success) throw NumericalError("fine reference: factorization failed");
  }
  /// Returns lift + x where x solves the free rows of op x = rhs and vanishes elsewhere.
  Vec solve(const Vec& rhs, const Vec& lift) const {
    const Vec x = lu_.solve(restrict(rhs, free_));
    if (!x.allFinite()) throw NumericalError("fine reference: solve failed");
    Vec out = lift;
    for (std::size_t k = 0; k < free_.size(); ++k) out[free_[k]] += x[Index(k)];
    return out;
  }

 private:
  std::vector<Index> free_;
  SparseColMatrix matrix_;
  Eigen::SparseLU<SparseColMatrix, Eigen::COLAMDOrdering<int>> lu_;
};

}  // namespace

Vec reference_steady(const AssembledForms& forms, const SteadyLoads& loads) {
  const FreeSolver solver(forms.acal, forms.boundary().free_dofs());
  return solver.solve(loads.f_load + loads.q_load - forms.acal * loads.g_tilde, loads.g_tilde);
}

std::vector<Vec> reference_transient(const AssembledForms& forms, const TransientData& data, double tau, int steps,
                                     int keep_every) {
  CEMFLOW_REQUIRE(tau > 0.0 && steps >= 0, InvalidArgument, "reference_transient: bad time step data");
  const auto& grid = forms.grids().fine;
  const SparseOperator L = (forms.M / tau + forms.acal).eval();
  const FreeSolver solver(L, forms.boundary().free_dofs());
  const Vec q_load = forms.boundary().has_neumann() ? boundary_load(grid, forms.boundary())
                                                    : Vec(Vec::Zero(grid.num_nodes()));
  std::vector<Vec> out;
  Vec u = interpolate(data.u_init, grid, 0.0);
  if (keep_every > 0) out.push_back(u);
  for (int n = 1; n <= steps; ++n) {
    const double t = n * tau;
    const Vec g1 = interpolate(data.g, grid, t);
    const Vec base = forms.M * u / tau + source_load(grid, data.f, t) + q_load - L * g1;
    Vec next = solver.solve(base, g1);
    if (data.reaction.active()) {
      const double scale = std::max(1.0, next.cwiseAbs().maxCoeff());
      bool converged = false;
      for (int it = 0; it < 200 && !converged; ++it) {
        const Vec trial = solver.solve(base + forms.M * next.unaryExpr(data.reaction.f), g1);
        converged = (trial - next).cwiseAbs().maxCoeff() <= 1e-12 * scale;
        next = trial;
      }
      if (!converged) throw NumericalError("fine reference: reaction iteration did not converge");
    }
    u = std::move(next);
    if ((keep_every > 0 && n % keep_every == 0) || (keep_every <= 0 && n == steps)) out.push_back(u);
  }
  if (out.empty()) out.push_back(u);
  return out;
}

}  // namespace cemflow
