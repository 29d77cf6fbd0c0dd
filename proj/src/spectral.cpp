#include "cemflow/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include "cemflow/error.hpp"
#include "cemflow/parallel.hpp"

namespace cemflow {

namespace {

/// Two passes of modified Gram-Schmidt on the columns of y (Euclidean).
Mat orthonormalize(Mat y, Index element) {
  for (int pass = 0; pass < 2; ++pass) {
    for (Index j = 0; j < y.cols(); ++j) {
      for (Index k = 0; k < j; ++k) y.col(j) -= y.col(k).dot(y.col(j)) * y.col(k);
      const double norm = y.col(j).norm();
      if (!(norm > 1e-12))
        throw NumericalError("spectral: kept eigenvectors are linearly dependent on element " +
                             std::to_string(element));
      y.col(j) /= norm;
    }
  }
  return y;
}

}  // namespace

AuxSpace::AuxSpace(int lm, std::vector<ElementEigen> elements) : lm_(lm), elements_(std::move(elements)) {
  for (const auto& e : elements_) {
    if (e.complex_pair) ++complex_count_;
    for (Index k = 0; k < e.lambda_re.size(); ++k) {
      const double mag = std::hypot(e.lambda_re[k], e.lambda_im[k]);
      if (mag > 0.0) max_imag_ratio_ = std::max(max_imag_ratio_, std::abs(e.lambda_im[k]) / mag);
    }
  }
}

ElementEigen solve_local_spectral(const AssembledForms& forms, Index element,
                                  const SpectralOptions& options) {
  const auto& coarse = forms.grids().coarse;
  CEMFLOW_REQUIRE(element >= 0 && element < coarse.num_elements(), InvalidArgument,
                  "solve_local_spectral: element index out of range");
  const Index n = coarse.local_node_count();
  CEMFLOW_REQUIRE(options.lm >= 1 && options.lm <= n, InvalidArgument,
                  "solve_local_spectral: lm must lie in [1, local dof count]");
  const Index keep = std::min<Index>(options.lm + 1, n);

  Mat A = element_matrix(forms, element, FormKind::acal);
  const Mat S = element_matrix(forms, element, FormKind::weighted_mass);
  if (options.symmetrize) A = 0.5 * (A + A.transpose()).eval();

  Eigen::LLT<Mat> llt(S);
  if (llt.info() != Eigen::Success)
    throw NumericalError("spectral: s-form is not positive definite on element " + std::to_string(element));
  // B = L^-1 A L^-T; eigenvectors y of B map to phi = L^-T y with phi^T S phi = y^T y.
  Mat B = llt.matrixL().solve(A);
  B = llt.matrixL().solve(B.transpose()).transpose();

  ElementEigen out;
  out.element = element;
  out.nodes = coarse.fine_nodes(element);
  out.lambda_re.resize(keep);
  out.lambda_im.resize(keep);

  Eigen::MatrixXcd y(n, keep);
  if (options.symmetrize) {
    Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (B + B.transpose()));
    if (es.info() != Eigen::Success)
      throw NumericalError("spectral: eigensolver failed on element " + std::to_string(element));
    for (Index k = 0; k < keep; ++k) {
      out.lambda_re[k] = es.eigenvalues()[k];
      out.lambda_im[k] = 0.0;
      y.col(k) = es.eigenvectors().col(k).cast<std::complex<double>>();
    }
  } else {
    Eigen::EigenSolver<Mat> es(B, true);
    if (es.info() != Eigen::Success)
      throw NumericalError("spectral: eigensolver failed on element " + std::to_string(element));
    const auto& ev = es.eigenvalues();
    std::vector<Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Index(0));
    std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) {
      if (ev[a].real() != ev[b].real()) return ev[a].real() < ev[b].real();
      return ev[a].imag() > ev[b].imag();
    });
    for (Index k = 0; k < keep; ++k) {
      const Index src = order[std::size_t(k)];
      out.lambda_re[k] = ev[src].real();
      out.lambda_im[k] = ev[src].imag();
      y.col(k) = es.eigenvectors().col(src).normalized();
    }
  }

  // Real basis of the kept span: a conjugate pair contributes Re and Im.
  std::vector<Vec> cols;
  for (Index k = 0; k < options.lm; ++k) {
    const double mag = std::hypot(out.lambda_re[k], out.lambda_im[k]);
    const bool complex = std::abs(out.lambda_im[k]) > options.imag_tol * std::max(mag, 1e-300);
    if (complex) out.complex_pair = true;
    cols.push_back(y.col(k).real());
    if (out.lambda_im[k] > 0.0 && k + 1 < options.lm) {
      cols.push_back(y.col(k).imag());
      ++k;
    }
  }
  Mat yr(n, Index(cols.size()));
  for (std::size_t k = 0; k < cols.size(); ++k) yr.col(Index(k)) = cols[k];
  yr = orthonormalize(std::move(yr), element);

  const auto LT = llt.matrixU();
  out.basis = LT.solve(yr);
  out.q = S * out.basis;
  out.raw.resize(n, keep);
  for (Index k = 0; k < keep; ++k) {
    out.raw.col(k).real() = LT.solve(y.col(k).real().eval());
    out.raw.col(k).imag() = LT.solve(y.col(k).imag().eval());
  }
  return out;
}

AuxSpace build_aux_space(const AssembledForms& forms, const SpectralOptions& options, int threads) {
  const Index ne = forms.grids().coarse.num_elements();
  std::vector<ElementEigen> elements(static_cast<std::size_t>(ne));
  parallel_for(ne, threads, [&](Index e) { elements[std::size_t(e)] = solve_local_spectral(forms, e, options); });
  return AuxSpace(options.lm, std::move(elements));
}

LambdaStats lambda_stats(const AuxSpace& aux) {
  LambdaStats stats{std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
  const Index lm = aux.lm();
  for (const auto& e : aux.elements()) {
    if (e.lambda_re.size() > lm) stats.Lambda = std::min(stats.Lambda, e.lambda_re[lm]);
    stats.Lambda_prime = std::max(stats.Lambda_prime, e.lambda_re[lm - 1]);
  }
  return stats;
}

PiProjector::PiProjector(const AssembledForms& forms, const AuxSpace& aux) : forms_(&forms), aux_(&aux) {
  CEMFLOW_REQUIRE(aux.num_elements() == forms.grids().coarse.num_elements(), InvalidArgument,
                  "PiProjector: auxiliary space does not match the coarse grid");
}

BrokenField PiProjector::restrict_to_elements(const Vec& v) const {
  CEMFLOW_REQUIRE(v.size() == forms_->grids().fine.num_nodes(), InvalidArgument,
                  "PiProjector: vector size does not match the fine grid");
  BrokenField out;
  out.parts.reserve(std::size_t(aux_->num_elements()));
  for (const auto& e : aux_->elements()) out.parts.push_back(restrict(v, e.nodes));
  return out;
}

Vec PiProjector::coefficients(const BrokenField& v) const {
  const Index lm = aux_->lm();
  Vec c(aux_->num_elements() * lm);
  for (Index e = 0; e < aux_->num_elements(); ++e)
    c.segment(e * lm, lm) = aux_->element(e).q.transpose() * v.parts[std::size_t(e)];
  return c;
}

Vec PiProjector::coefficients(const Vec& v) const {
  CEMFLOW_REQUIRE(v.size() == forms_->grids().fine.num_nodes(), InvalidArgument,
                  "PiProjector: vector size does not match the fine grid");
  const Index lm = aux_->lm();
  Vec c(aux_->num_elements() * lm);
  for (Index e = 0; e < aux_->num_elements(); ++e) {
    const auto& el = aux_->element(e);
    for (Index j = 0; j < lm; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < el.nodes.size(); ++k) s += el.q(Index(k), j) * v[el.nodes[k]];
      c[e * lm + j] = s;
    }
  }
  return c;
}

BrokenField PiProjector::from_coefficients(const Vec& c) const {
  const Index lm = aux_->lm();
  CEMFLOW_REQUIRE(c.size() == aux_->num_elements() * lm, InvalidArgument,
                  "PiProjector: coefficient vector has the wrong size");
  BrokenField out;
  out.parts.reserve(std::size_t(aux_->num_elements()));
  for (Index e = 0; e < aux_->num_elements(); ++e)
    out.parts.push_back(aux_->element(e).basis * c.segment(e * lm, lm));
  return out;
}

BrokenField PiProjector::apply(const Vec& v) const { return from_coefficients(coefficients(v)); }

BrokenField PiProjector::apply(const BrokenField& v) const { return from_coefficients(coefficients(v)); }

double PiProjector::s_norm_squared(const BrokenField& v) const {
  double total = 0.0;
  for (Index e = 0; e < aux_->num_elements(); ++e) {
    const Mat S = element_matrix(*forms_, e, FormKind::weighted_mass);
    const Vec& x = v.parts[std::size_t(e)];
    total += x.dot(S * x);
  }
  return total;
}

double PiProjector::s_norm_squared(const Vec& v) const { return v.dot(forms_->S * v); }

}  // namespace cemflow
