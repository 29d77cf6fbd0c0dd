#pragma once

#include <Eigen/LU>
#include <random>

#include "cemflow/problem.hpp"

namespace cemflow::testing {

inline ProblemSpec small_spec(int n = 16) {
  ProblemSpec s;
  s.nx = s.ny = n;
  return s;
}

inline ProblemSpec uniform_spec(int n, Eigen::Vector2d beta) {
  ProblemSpec s = small_spec(n);
  s.pattern = MediumPattern::uniform;
  s.contrast = 1.0;
  s.velocity = VelocityMode::custom;
  s.custom_velocity = beta;
  return s;
}

inline Vec random_vec(Index n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Vec v(n);
  for (Index k = 0; k < n; ++k) v[k] = u(rng);
  return v;
}

inline void zero_dirichlet(const BoundaryPartition& b, Vec& v) {
  for (Index k = 0; k < v.size(); ++k)
    if (b.is_dirichlet_node(k)) v[k] = 0.0;
}

/// Columns s_i(phi_ij, .) scattered to global fine nodes, element-major.
inline Mat global_q(const AuxSpace& aux, Index num_nodes) {
  Mat Q = Mat::Zero(num_nodes, aux.num_elements() * aux.lm());
  for (Index e = 0; e < aux.num_elements(); ++e) {
    const auto& el = aux.element(e);
    for (Index j = 0; j < aux.lm(); ++j)
      for (std::size_t k = 0; k < el.nodes.size(); ++k) Q(el.nodes[k], e * aux.lm() + j) += el.q(Index(k), j);
  }
  return Q;
}

/// Dense matrix of a sparse operator restricted to `dofs`.
inline Mat dense_on(const SparseOperator& op, const std::vector<Index>& dofs) {
  const Mat full = Mat(op);
  Mat out(Index(dofs.size()), Index(dofs.size()));
  for (std::size_t i = 0; i < dofs.size(); ++i)
    for (std::size_t j = 0; j < dofs.size(); ++j) out(Index(i), Index(j)) = full(dofs[i], dofs[j]);
  return out;
}

inline double b_norm(const AssembledForms& forms, const Mat& Q, const Vec& v) {
  const Vec qv = Q.transpose() * v;
  return std::sqrt(std::max(0.0, v.dot(forms.quasi * v)) + qv.squaredNorm());
}

/// Dense solve of (X + Q Q^T) x = rhs on the free dofs of V.
struct GlobalOracle {
  std::vector<Index> free;
  Mat Q;
  Eigen::PartialPivLU<Mat> lu;

  GlobalOracle(const Instance& inst, const SparseOperator& X) {
    free = inst.boundary().free_dofs();
    Q = global_q(inst.aux(), inst.grids().fine.num_nodes());
    Mat QF(Index(free.size()), Q.cols());
    for (std::size_t k = 0; k < free.size(); ++k) QF.row(Index(k)) = Q.row(free[k]);
    lu.compute(dense_on(X, free) + QF * QF.transpose());
  }

  Vec solve(const Vec& rhs_global) const {
    Vec r(Index(free.size()));
    for (std::size_t k = 0; k < free.size(); ++k) r[Index(k)] = rhs_global[free[k]];
    const Vec x = lu.solve(r);
    Vec out = Vec::Zero(rhs_global.size());
    for (std::size_t k = 0; k < free.size(); ++k) out[free[k]] = x[Index(k)];
    return out;
  }
};

inline double rel_b(const Instance& inst, const Mat& Q, const Vec& a, const Vec& ref) {
  return b_norm(inst.forms(), Q, a - ref) / b_norm(inst.forms(), Q, ref);
}

}  // namespace cemflow::testing
