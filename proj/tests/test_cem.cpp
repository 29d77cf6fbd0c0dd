#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <random>

#include "cemflow/problem.hpp"
#include "support.hpp"

using namespace cemflow;
using namespace cemflow::testing;

namespace {

std::unique_ptr<Instance> saturation_instance(bool mixed) {
  auto spec = small_spec(16);
  spec.velocity = VelocityMode::inflow;
  spec.c_flow = 2.0;
  if (mixed) spec.segments = robin_layout();
  return Instance::create(spec, 4, 4);
}

}  // namespace

TEST(Saturation, BasisMatchesGlobalSolve) {
  const auto inst = saturation_instance(false);
  const GlobalOracle oracle(*inst, inst->forms().acal);
  const auto basis = build_ms_basis(inst->inputs(), 4);
  for (Index k = 0; k < basis.cols(); ++k) {
    const Vec ref = oracle.solve(oracle.Q.col(k));
    EXPECT_LE(rel_b(*inst, oracle.Q, basis.column(k), ref), 1e-10) << "column " << k;
  }
}

TEST(Saturation, CorrectorsMatchGlobalSolve) {
  const auto inst = saturation_instance(true);
  const GlobalOracle oracle(*inst, inst->forms().acal);
  const Vec g = inst->steady_loads().g_tilde;
  const Vec D = dirichlet_corrector(inst->inputs(), 4, g).total;
  EXPECT_LE(rel_b(*inst, oracle.Q, D, oracle.solve(inst->forms().acal * g)), 1e-10);
  const Vec Dg = dirichlet_corrector(inst->inputs(), kGlobalLayers, g).total;
  EXPECT_LE(rel_b(*inst, oracle.Q, Dg, oracle.solve(inst->forms().acal * g)), 1e-10);
  const Vec q = boundary_load(inst->grids().fine, inst->boundary());
  const Vec N = neumann_corrector(inst->inputs(), 4).total;
  EXPECT_LE(rel_b(*inst, oracle.Q, N, oracle.solve(q)), 1e-10);
  const GlobalOracle diff(*inst, inst->forms().a);
  const Vec Da = dirichlet_corrector(inst->inputs(), 4, g, FormKind::a).total;
  EXPECT_LE(rel_b(*inst, diff.Q, Da, diff.solve(inst->forms().a * g)), 1e-10);
}

TEST(Saturation, GlobalSpaceIsOrthogonalToKernelOfPi) {
  const auto inst = saturation_instance(false);
  const GlobalOracle oracle(*inst, inst->forms().acal);
  const auto basis = build_ms_basis(inst->inputs(), kGlobalLayers);
  Mat QF(Index(oracle.free.size()), oracle.Q.cols());
  for (std::size_t k = 0; k < oracle.free.size(); ++k) QF.row(Index(k)) = oracle.Q.row(oracle.free[k]);
  std::mt19937_64 rng(2);
  const Vec r = random_vec(QF.rows(), rng);
  const Vec rF = r - QF * (QF.transpose() * QF).ldlt().solve(QF.transpose() * r);
  Vec v = Vec::Zero(inst->grids().fine.num_nodes());
  for (std::size_t k = 0; k < oracle.free.size(); ++k) v[oracle.free[k]] = rF[Index(k)];
  ASSERT_LE((oracle.Q.transpose() * v).norm(), 1e-10 * v.norm());
  const Mat A(inst->forms().acal);
  for (Index k = 0; k < basis.cols(); ++k) {
    const Vec psi = basis.column(k);
    EXPECT_LE(std::abs(v.dot(A * psi)), 1e-9 * v.norm() * (A * psi).norm());
  }
}

TEST(Basis, SupportAndRank) {
  const auto inst = saturation_instance(true);
  for (int m : {1, 2}) {
    const auto basis = build_ms_basis(inst->inputs(), m);
    const auto& grids = inst->grids();
    for (Index e = 0; e < grids.coarse.num_elements(); ++e) {
      const auto region = corrector_region(grids, e, m);
      const auto mask = local_dof_mask(grids, region, inst->boundary());
      const auto& blk = basis.block(e);
      EXPECT_TRUE(blk.values.allFinite());
      for (Index r = 0; r < blk.size(); ++r) {
        const Index node = grids.fine.node(blk.i0 + int(r % blk.width()), blk.j0 + int(r / blk.width()));
        const bool inside = std::binary_search(mask.free.begin(), mask.free.end(), node);
        if (!inside) EXPECT_EQ(blk.values.row(r).cwiseAbs().maxCoeff(), 0.0);
      }
    }
    const Mat P(basis.to_sparse());
    Eigen::JacobiSVD<Mat> svd(P);
    EXPECT_GT(svd.singularValues().minCoeff(), 1e-8 * svd.singularValues().maxCoeff());
  }
}

TEST(Basis, GalerkinAndApply) {
  const auto inst = saturation_instance(true);
  const auto basis = build_ms_basis(inst->inputs(), 1);
  const Mat P(basis.to_sparse());
  const Mat A(inst->forms().acal);
  EXPECT_LE((basis.galerkin(inst->forms().acal) - P.transpose() * A * P).cwiseAbs().maxCoeff(), 1e-10 * A.cwiseAbs().maxCoeff());
  std::mt19937_64 rng(9);
  const Vec c = random_vec(basis.cols(), rng);
  const Vec v = random_vec(basis.rows(), rng);
  EXPECT_LE((basis.apply(c) - P * c).norm(), 1e-12 * (P * c).norm());
  EXPECT_LE((basis.apply_transpose(v) - P.transpose() * v).norm(), 1e-12 * (P.transpose() * v).norm());
}

TEST(Basis, ConvergesToGlobalInLayers) {
  auto spec = small_spec(40);
  const auto inst = Instance::create(spec, 10, 10);
  const GlobalOracle oracle(*inst, inst->forms().acal);
  const Index k = inst->grids().coarse.element(5, 4) * inst->aux().lm();
  const Vec ref = oracle.solve(oracle.Q.col(k));
  double prev = std::numeric_limits<double>::infinity();
  for (int m = 1; m <= 5; ++m) {
    const double err = rel_b(*inst, oracle.Q, build_ms_basis(inst->inputs(), m).column(k), ref);
    EXPECT_LT(err, prev) << "m " << m;
    prev = err;
  }
}

TEST(Correctors, ZeroDataAndLinearity) {
  const auto inst = saturation_instance(false);
  const Index n = inst->grids().fine.num_nodes();
  EXPECT_EQ(dirichlet_corrector(inst->inputs(), 2, Vec::Zero(n)).total.cwiseAbs().maxCoeff(), 0.0);
  std::mt19937_64 rng(1);
  Vec g = random_vec(n, rng);
  const Vec D = dirichlet_corrector(inst->inputs(), 2, g).total;
  const Vec D3 = dirichlet_corrector(inst->inputs(), 2, Vec(-3.5 * g)).total;
  EXPECT_LE((D3 + 3.5 * D).cwiseAbs().maxCoeff(), 1e-12 * D3.cwiseAbs().maxCoeff());
  for (Index k = 0; k < n; ++k)
    if (inst->boundary().is_dirichlet_node(k)) EXPECT_EQ(D[k], 0.0);

  auto spec = small_spec(16);
  spec.segments = robin_layout(0.0, 0.0, 0.0, 0.0);
  const auto zq = Instance::create(spec, 4, 4);
  EXPECT_EQ(neumann_corrector(zq->inputs(), 2).total.cwiseAbs().maxCoeff(), 0.0);
}

TEST(Correctors, InteriorElementsCarryNoNeumannPart) {
  const auto inst = saturation_instance(true);
  const auto set = neumann_corrector(inst->inputs(), 1, true);
  const auto& coarse = inst->grids().coarse;
  for (Index e = 0; e < coarse.num_elements(); ++e) {
    const auto [I, J] = coarse.element_ij(e);
    const bool touches = I == 0 || I == coarse.nx() - 1 || J == 0;
    const auto& blk = set.locals[std::size_t(e)];
    if (!touches) EXPECT_TRUE(blk.values.size() == 0 || blk.values.cwiseAbs().maxCoeff() == 0.0);
    if (neumann_element_rhs(inst->forms(), e).cwiseAbs().maxCoeff() > 0.0) EXPECT_GT(blk.values.size(), 0);
  }
  for (Index k = 0; k < set.total.size(); ++k)
    if (inst->boundary().is_dirichlet_node(k)) EXPECT_EQ(set.total[k], 0.0);
}

TEST(Correctors, DecayInLayers) {
  auto spec = small_spec(40);
  spec.velocity = VelocityMode::inflow;
  spec.c_flow = 2.0;
  spec.segments = robin_layout();
  const auto inst = Instance::create(spec, 10, 10);
  const Mat Q = global_q(inst->aux(), inst->grids().fine.num_nodes());
  const Vec g = inst->steady_loads().g_tilde;
  const Vec Dg = dirichlet_corrector(inst->inputs(), kGlobalLayers, g).total;
  const Vec Ng = neumann_corrector(inst->inputs(), kGlobalLayers).total;
  double pd = 1.0, pn = 1.0;
  for (int m = 2; m <= 6; ++m) {
    const double ed = rel_b(*inst, Q, dirichlet_corrector(inst->inputs(), m, g).total, Dg);
    const double en = rel_b(*inst, Q, neumann_corrector(inst->inputs(), m).total, Ng);
    if (pd > 1e-10) EXPECT_LE(ed, 0.5 * pd) << "m " << m;
    if (pn > 1e-10) EXPECT_LE(en, 0.5 * pn) << "m " << m;
    pd = ed;
    pn = en;
  }
}

namespace {

CorrectorData constant_data(const Vec& g) {
  const Vec zero = Vec::Zero(g.size());
  return {[g](double) { return g; }, [zero](double) { return zero; }};
}

}  // namespace

TEST(TransientCorrector, StaticFixedPoint) {
  const auto inst = saturation_instance(true);
  const Vec g = inst->steady_loads().g_tilde;
  for (Scheme scheme : {Scheme::cd, Scheme::diffusion}) {
    TransientCorrector tc(inst->inputs(), 2, scheme, CorrectorKind::dirichlet);
    tc.init(constant_data(g), 0.0);
    const FormKind form = scheme == Scheme::cd ? FormKind::acal : FormKind::a;
    const Vec stat = dirichlet_corrector(inst->inputs(), 2, g, form).total;
    EXPECT_LE((tc.total() - stat).cwiseAbs().maxCoeff(), 1e-12 * stat.cwiseAbs().maxCoeff());
    tc.step(constant_data(g), 0.1, 0.1);
    EXPECT_LE((tc.total() - stat).cwiseAbs().maxCoeff(), 1e-10 * stat.cwiseAbs().maxCoeff());
  }
  TransientCorrector tn(inst->inputs(), 2, Scheme::cd, CorrectorKind::neumann);
  tn.init(constant_data(g), 0.0);
  const Vec stat = neumann_corrector(inst->inputs(), 2).total;
  EXPECT_LE((tn.total() - stat).cwiseAbs().maxCoeff(), 1e-12 * stat.cwiseAbs().maxCoeff());
  const auto traj = tn.march(constant_data(g), 0.0, 0.1, 3);
  ASSERT_EQ(traj.size(), 4u);
  for (const Vec& v : traj) EXPECT_LE((v - stat).cwiseAbs().maxCoeff(), 1e-10 * stat.cwiseAbs().maxCoeff());
}

TEST(TransientCorrector, ZeroDataStaysZero) {
  const auto inst = saturation_instance(false);
  const Vec zero = Vec::Zero(inst->grids().fine.num_nodes());
  TransientCorrector tc(inst->inputs(), 2, Scheme::cd, CorrectorKind::dirichlet);
  tc.init(constant_data(zero), 0.0);
  EXPECT_EQ(tc.total().cwiseAbs().maxCoeff(), 0.0);
  tc.step(constant_data(zero), 0.1, 0.1);
  EXPECT_EQ(tc.total().cwiseAbs().maxCoeff(), 0.0);
}

TEST(TransientCorrector, RelaxesGeometricallyToStatic) {
  const auto inst = saturation_instance(false);
  const Vec g = inst->steady_loads().g_tilde;
  const Vec zero = Vec::Zero(g.size());
  const CorrectorData switched{[g, zero](double t) { return t > 0.0 ? g : zero; },
                               [zero](double) { return zero; }};
  const Vec stat = dirichlet_corrector(inst->inputs(), 2, g).total;
  const Mat Q = global_q(inst->aux(), g.size());
  TransientCorrector tc(inst->inputs(), 2, Scheme::cd, CorrectorKind::dirichlet);
  tc.init(switched, 0.0);
  const double tau = 1e-3;
  double prev = 1.0;
  for (int n = 1; n <= 6; ++n) {
    tc.step(switched, tau, n * tau);
    const double err = rel_b(*inst, Q, tc.total(), stat);
    EXPECT_LE(err, 0.99 * prev) << "step " << n;
    prev = err;
  }
}
