#include <gtest/gtest.h>

#include <boost/numeric/odeint.hpp>
#include <cmath>

#include "cemflow/error.hpp"
#include "cemflow/metrics.hpp"
#include "cemflow/problem.hpp"
#include "support.hpp"

using namespace cemflow;
using namespace cemflow::testing;

namespace {

ProblemSpec zero_spec() {
  auto s = small_spec(16);
  s.velocity = VelocityMode::inflow;
  s.c_flow = 1.0;
  s.segments = robin_layout(0.0, 0.0, 0.0, 0.0);
  s.g = s.f = s.u_init = "zero";
  return s;
}

struct Multiscale {
  std::unique_ptr<Instance> inst;
  OfflineResult off;
  SteadyLoads loads;
};

Multiscale offline(const ProblemSpec& spec, int N, int layers) {
  auto inst = Instance::create(spec, N, N);
  auto loads = inst->steady_loads();
  auto off = build_offline(inst->inputs(), layers, loads.g_tilde, true);
  return {std::move(inst), std::move(off), std::move(loads)};
}

SteadySolution solve(const Multiscale& ms) {
  return steady_solve(ms.inst->forms(), ms.off.basis, ms.off.dirichlet.total, ms.off.neumann.total, ms.loads);
}

double rel_l2(const AssembledForms& forms, const Vec& a, const Vec& b) {
  const NormEvaluator ne(forms);
  return relative_error(ne, NormKind::L2, a, b).value;
}

}  // namespace

TEST(Steady, ZeroData) {
  const auto ms = offline(zero_spec(), 4, 2);
  const auto sol = solve(ms);
  EXPECT_LE(sol.u.cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LE(ms.off.dirichlet.total.cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LE(ms.off.neumann.total.cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Steady, LinearDataReproduced) {
  auto spec = uniform_spec(16, {0.0, 0.0});
  spec.g = "x1";
  const auto ms = offline(spec, 4, 4);
  const Vec exact = interpolate(builtin_function("x1"), ms.inst->grids().fine);
  const Vec ref = reference_steady(ms.inst->forms(), ms.loads);
  EXPECT_LE((ref - exact).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LE(rel_l2(ms.inst->forms(), solve(ms).u, ref), 1e-8);
}

TEST(Steady, AssemblyIdentity) {
  auto spec = small_spec(16);
  spec.segments = robin_layout();
  const auto ms = offline(spec, 4, 1);
  const auto sol = solve(ms);
  const Vec u = ms.off.basis.apply(sol.coeff) - sol.D + sol.N + ms.loads.g_tilde;
  EXPECT_LE((u - sol.u).cwiseAbs().maxCoeff(), 1e-13 * u.cwiseAbs().maxCoeff());
}

TEST(Steady, FullLocalSpaceMatchesReference) {
  auto spec = small_spec(16);
  spec.lm = 25;
  const auto ms = offline(spec, 4, 4);
  const Vec ref = reference_steady(ms.inst->forms(), ms.loads);
  EXPECT_LE(rel_l2(ms.inst->forms(), solve(ms).u, ref), 1e-8);
}

TEST(Reference, ResidualOnFreeDofs) {
  auto spec = small_spec(32);
  spec.segments = robin_layout();
  spec.f = "bump";
  const auto inst = Instance::create(spec, 4, 4, false);
  const auto loads = inst->steady_loads();
  const Vec u = reference_steady(inst->forms(), loads);
  const Vec r = inst->forms().acal * u - loads.f_load - loads.q_load;
  const auto free = inst->boundary().free_dofs();
  const Vec rf = restrict(r, free);
  const Vec bf = restrict(Vec(loads.f_load + loads.q_load), free);
  EXPECT_LE(rf.norm(), 1e-10 * (inst->forms().acal.norm() * u.norm() + bf.norm()));
  for (Index k = 0; k < u.size(); ++k)
    if (inst->boundary().is_dirichlet_node(k)) EXPECT_EQ(u[k], loads.g_tilde[k]);
}

TEST(Reference, ManufacturedSolutionIsSecondOrder) {
  double prev = 0.0;
  for (int n : {8, 16, 32}) {
    auto spec = uniform_spec(n, {1.0, 0.0});
    spec.g = "zero";
    spec.f = "mms_source";
    const auto inst = Instance::create(spec, 1, 1, false);
    const Vec u = reference_steady(inst->forms(), inst->steady_loads());
    const Vec exact = interpolate(builtin_function("sin_sin"), inst->grids().fine);
    const double err = rel_l2(inst->forms(), u, exact);
    if (prev > 0.0) {
      EXPECT_GT(err / prev, 0.2);
      EXPECT_LT(err / prev, 0.3);
    }
    prev = err;
  }
}

TEST(Scheme, IntegerStepsOnly) {
  EXPECT_EQ(make_scheme(0.1, 1.0, Scheme::cd).steps, 10);
  EXPECT_EQ(make_scheme(0.025, 1.0, Scheme::cd).steps, 40);
  EXPECT_THROW(make_scheme(0.3, 1.0, Scheme::cd), InvalidArgument);
  EXPECT_THROW(make_scheme(-0.1, 1.0, Scheme::cd), InvalidArgument);
}

TEST(Transient, ZeroDataTrajectories) {
  auto spec = zero_spec();
  spec.reaction = "allen_cahn";
  const auto ms = offline(spec, 4, 2);
  for (Scheme scheme : {Scheme::cd, Scheme::diffusion}) {
    const TransientContext ctx(ms.inst->inputs(), ms.off.basis, 2, spec.transient_data(),
                               make_scheme(0.1, 0.5, scheme));
    EXPECT_LE(transient_solve(ctx).max_abs, 1e-12);
    if (scheme == Scheme::cd) EXPECT_LE(strang_solve(ctx).max_abs, 1e-12);
    EXPECT_LE(transient_init(ctx).coeff.cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(Transient, InitProjectsTheCorrector) {
  auto spec = small_spec(16);
  spec.u_init = spec.g;
  const auto ms = offline(spec, 4, 2);
  const TransientContext ctx(ms.inst->inputs(), ms.off.basis, 2, spec.transient_data(), make_scheme(0.1, 0.2, Scheme::cd));
  const auto s0 = transient_init(ctx);
  const Mat P(ms.off.basis.to_sparse());
  const Mat G = P.transpose() * ms.inst->forms().M * P;
  const Vec expected = G.ldlt().solve(P.transpose() * (ms.inst->forms().M * ctx.D(0)));
  EXPECT_LE((s0.coeff - expected).norm(), 1e-9 * expected.norm());

  const Vec c = expected;
  const Vec w = P * c;
  const Vec back = G.ldlt().solve(P.transpose() * (ms.inst->forms().M * w));
  EXPECT_LE((back - c).norm(), 1e-10 * c.norm());
}

TEST(Transient, TimeInvariantApproachesSteady) {
  auto spec = small_spec(16);
  spec.u_init = "zero";
  const auto ms = offline(spec, 4, 2);
  const Vec steady = solve(ms).u;
  const TransientContext ctx(ms.inst->inputs(), ms.off.basis, 2, spec.transient_data(), make_scheme(0.1, 2.0, Scheme::cd));
  const auto res = transient_solve(ctx);
  double prev = std::numeric_limits<double>::infinity();
  for (const Vec& u : res.u) {
    const double gap = rel_l2(ms.inst->forms(), u, steady);
    EXPECT_LT(gap, prev);
    prev = gap;
  }
  EXPECT_LT(prev, 1e-6);
}

TEST(Strang, WithoutReactionIsLinearStep) {
  auto spec = small_spec(16);
  spec.g = "decay_exp";
  spec.u_init = "bump";
  const auto ms = offline(spec, 4, 2);
  const TransientContext ctx(ms.inst->inputs(), ms.off.basis, 2, spec.transient_data(), make_scheme(0.1, 0.3, Scheme::cd));
  auto a = transient_init(ctx);
  auto b = a;
  for (int n = 0; n < 3; ++n) {
    a = ctx.step(a);
    b = ctx.strang_step(b);
    EXPECT_LE((a.u - b.u).cwiseAbs().maxCoeff(), 1e-12 * std::max(1.0, a.u.cwiseAbs().maxCoeff()));
  }
}

TEST(NonlinearSubstep, LinearReactionIsExponential) {
  const Vec w0 = Vec::LinSpaced(7, -1.0, 2.0);
  const Vec z = Vec::LinSpaced(7, 0.3, -0.4);
  const Vec w = nonlinear_substep(w0, z, 0.05, builtin_reaction("linear"));
  EXPECT_LE((w - std::exp(0.05) * w0).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(NonlinearSubstep, EquilibriumAtZero) {
  const Vec z = Vec::LinSpaced(5, -2.0, 2.0);
  EXPECT_EQ(nonlinear_substep(Vec::Zero(5), z, 0.05, builtin_reaction("allen_cahn")), Vec::Zero(5));
}

TEST(NonlinearSubstep, GinzburgLandauClosedForm) {
  const Vec w0 = Vec::Constant(3, 2.0);
  const Vec z = Vec::Zero(3);
  const double t = 0.05;
  const double exact = 1.0 / std::sqrt(1.0 + (1.0 / 4.0 - 1.0) * std::exp(-2.0 * t));
  const Vec w = nonlinear_substep(w0, z, t, builtin_reaction("allen_cahn"));
  EXPECT_LE((w.array() - exact).abs().maxCoeff(), 1e-6);
  Vec u = w0;
  for (int k = 0; k < 20; ++k) u = nonlinear_substep(u, z, t, builtin_reaction("allen_cahn"));
  const double exact_1 = 1.0 / std::sqrt(1.0 + (1.0 / 4.0 - 1.0) * std::exp(-2.0 * 20 * t));
  EXPECT_LE((u.array() - exact_1).abs().maxCoeff(), 1e-6);
}

TEST(Strang, PointwiseReactionMatchesOdeOracle) {
  const auto grids = build_grids({}, 8, 8, 2, 2);
  const MediumField medium(8, 8, std::vector<double>(64, 1e-10));
  const auto boundary = all_dirichlet(grids.fine);
  const auto forms = assemble_forms(grids, medium, VelocityField::zero(), boundary, {}, 24.0, KappaScale::cell);
  SpectralOptions opt;
  opt.lm = 25;
  const auto aux = build_aux_space(forms, opt);
  const CemInputs in{&forms, &aux, 1};
  const auto basis = build_ms_basis(in, kGlobalLayers);
  const TransientData data{builtin_function("zero"), builtin_function("zero"), builtin_function("bump"),
                           builtin_reaction("allen_cahn")};
  const TransientContext ctx(in, basis, kGlobalLayers, data, make_scheme(0.1, 1.0, Scheme::cd, 10));
  const auto res = strang_solve(ctx);
  const Vec& u0 = res.u.front();
  namespace ode = boost::numeric::odeint;
  auto rhs = [](const double& u, double& dudt, double) { dudt = u - u * u * u; };
  for (Index k = 0; k < u0.size(); ++k) {
    if (boundary.is_dirichlet_node(k)) continue;
    double u = u0[k];
    ode::integrate_adaptive(ode::make_controlled<ode::runge_kutta_dopri5<double>>(1e-13, 1e-13), rhs, u, 0.0, 1.0, 1e-3);
    EXPECT_NEAR(res.u.back()[k], u, 1e-6) << "node " << k;
  }
}

TEST(Reference, SampledTrajectory) {
  auto spec = small_spec(12);
  spec.g = "decay_exp";
  const auto inst = Instance::create(spec, 3, 3, false);
  const auto data = spec.transient_data();
  const auto all = reference_transient(inst->forms(), data, 0.05, 6, 1);
  const auto sampled = reference_transient(inst->forms(), data, 0.05, 6, 3);
  const auto last = reference_transient(inst->forms(), data, 0.05, 6);
  ASSERT_EQ(all.size(), 7u);
  ASSERT_EQ(sampled.size(), 3u);
  ASSERT_EQ(last.size(), 1u);
  for (std::size_t k = 0; k < sampled.size(); ++k) EXPECT_EQ(sampled[k], all[3 * k]);
  EXPECT_EQ(last[0], all.back());
}
