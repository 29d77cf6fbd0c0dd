#pragma once

#include <vector>

#include <Eigen/Core>

#include "cemflow/assembly.hpp"
#include "cemflow/types.hpp"

namespace cemflow {

struct SpectralOptions {
  int lm = 3;               ///< eigenfunctions kept per element
  bool symmetrize = false;  ///< use (A + A^T) / 2 instead of the convective form
  double imag_tol = 1e-8;   ///< |Im lambda| / |lambda| above this is counted as complex
};

/// Eigen-data of one coarse element. Local vectors live on the closure
/// nodes of the element in CoarseGrid::fine_nodes order.
struct ElementEigen {
  Index element = 0;
  std::vector<Index> nodes;
  Vec lambda_re;  ///< lm + 1 smallest eigenvalues by real part
  Vec lambda_im;
  /// Raw eigenvectors for lambda_re/lambda_im, normalized so phi^H S phi = 1.
  Eigen::MatrixXcd raw;
  /// Real s-orthonormal basis of the span of the kept eigenvectors (local x lm).
  Mat basis;
  /// S_i * basis, so s_i(basis_j, v) = q_j^T v on closure nodes.
  Mat q;
  bool complex_pair = false;
};

class AuxSpace {
 public:
  AuxSpace(int lm, std::vector<ElementEigen> elements);

  int lm() const noexcept { return lm_; }
  Index num_elements() const noexcept { return Index(elements_.size()); }
  const ElementEigen& element(Index e) const { return elements_[std::size_t(e)]; }
  const std::vector<ElementEigen>& elements() const noexcept { return elements_; }
  /// Number of elements whose kept spectrum contains a complex pair.
  int complex_count() const noexcept { return complex_count_; }
  /// Largest |Im lambda| / |lambda| over all retained eigenvalues.
  double max_imag_ratio() const noexcept { return max_imag_ratio_; }

 private:
  int lm_;
  std::vector<ElementEigen> elements_;
  int complex_count_ = 0;
  double max_imag_ratio_ = 0.0;
};

ElementEigen solve_local_spectral(const AssembledForms& forms, Index element,
                                  const SpectralOptions& options);

AuxSpace build_aux_space(const AssembledForms& forms, const SpectralOptions& options,
                         int threads = 1);

struct LambdaStats {
  double Lambda = 0.0;        ///< min over elements of the (lm+1)-th eigenvalue
  double Lambda_prime = 0.0;  ///< max over elements of the lm-th eigenvalue
};

LambdaStats lambda_stats(const AuxSpace& aux);

/// A field that is smooth inside each coarse element but may jump across
/// element boundaries, stored per element on closure nodes.
struct BrokenField {
  std::vector<Vec> parts;
};

/// The s-orthogonal projection onto V^aux.
class PiProjector {
 public:
  PiProjector(const AssembledForms& forms, const AuxSpace& aux);

  const AuxSpace& aux() const noexcept { return *aux_; }
  /// Coefficients s_i(phi_ij, v) stacked element-major (size N * lm).
  Vec coefficients(const Vec& v) const;
  Vec coefficients(const BrokenField& v) const;
  BrokenField apply(const Vec& v) const;
  BrokenField apply(const BrokenField& v) const;
  BrokenField from_coefficients(const Vec& c) const;
  BrokenField restrict_to_elements(const Vec& v) const;

  /// sum_i v_i^T S_i v_i.
  double s_norm_squared(const BrokenField& v) const;
  /// s-norm of a global fine vector (equals v^T S v).
  double s_norm_squared(const Vec& v) const;

 private:
  const AssembledForms* forms_;
  const AuxSpace* aux_;
};

}  // namespace cemflow
