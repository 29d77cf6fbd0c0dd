#pragma once

#include <functional>
#include <memory>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "cemflow/assembly.hpp"
#include "cemflow/grid.hpp"
#include "cemflow/spectral.hpp"
#include "cemflow/types.hpp"

namespace cemflow {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Layer count meaning "the whole domain" (the m = infinity limit).
inline constexpr int kGlobalLayers = -1;

/// Closure rectangle of fine nodes [i0, i1] x [j0, j1] and column values on
/// it, node-major (row k is node (i0 + k % width, j0 + k / width)).
struct LocalBlock {
  int i0 = 0;
  int i1 = -1;
  int j0 = 0;
  int j1 = -1;
  RowMat values;

  int width() const noexcept { return i1 - i0 + 1; }
  int height() const noexcept { return j1 - j0 + 1; }
  Index size() const noexcept { return Index(width()) * height(); }
};

/// V^m_ms: column (i, j) is psi_i^{j,m}, stored as one LocalBlock per element.
class MultiscaleSpace {
 public:
  MultiscaleSpace(const FineGrid& grid, int layers, int lm, std::vector<LocalBlock> blocks);

  int layers() const noexcept { return layers_; }
  int lm() const noexcept { return lm_; }
  Index rows() const noexcept { return rows_; }
  Index cols() const noexcept { return Index(blocks_.size()) * lm_; }
  const LocalBlock& block(Index e) const { return blocks_[std::size_t(e)]; }
  Index nonzeros() const;

  Vec apply(const Vec& c) const;            ///< P c
  Vec apply_transpose(const Vec& v) const;  ///< P^T v
  Vec column(Index k) const;

  /// P^T X P for each operator, computed in one pass over overlapping blocks.
  std::vector<Mat> galerkin(std::span<const SparseOperator* const> ops) const;
  Mat galerkin(const SparseOperator& op) const;

  SparseColMatrix to_sparse() const;

 private:
  const FineGrid* grid_;
  int layers_;
  int lm_;
  Index rows_;
  std::vector<LocalBlock> blocks_;
};

struct CemInputs {
  const AssembledForms* forms = nullptr;
  const AuxSpace* aux = nullptr;
  int threads = 1;
};

/// Factorized local system (X + Q Q^T) on the free dofs of one oversampled
/// region, solved through the augmented form [X_FF, Q_F; Q_F^T, -I].
class PatchSystem {
 public:
  PatchSystem(const CemInputs& in, const OversampleRegion& region, const SparseOperator& X);
  ~PatchSystem();
  PatchSystem(const PatchSystem&) = delete;
  PatchSystem& operator=(const PatchSystem&) = delete;

  const std::vector<Index>& free() const noexcept { return free_; }
  /// Solves for right sides given on the free dofs (one per column).
  Mat solve(const Mat& rhs) const;
  /// Scatters free-dof values into a block on the region's closure rectangle.
  LocalBlock scatter(const Mat& values) const;
  /// Gathers a block's values on the free dofs.
  Mat gather(const LocalBlock& block) const;

  int i0() const noexcept { return i0_; }
  int i1() const noexcept { return i1_; }
  int j0() const noexcept { return j0_; }
  int j1() const noexcept { return j1_; }

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  std::vector<Index> free_;
  const FineGrid* grid_;
  int i0_, i1_, j0_, j1_;
};

/// Region of element e with `layers` rings, or the whole domain for kGlobalLayers.
OversampleRegion corrector_region(const GridPair& grids, Index e, int layers);

MultiscaleSpace build_ms_basis(const CemInputs& in, int layers);

/// Right side of the Dirichlet corrector on element e, on closure nodes:
/// X_{K_i}(g, .) with X the convective (acal) or diffusive (a) form.
Vec dirichlet_element_rhs(const AssembledForms& forms, Index e, const Vec& g_tilde, FormKind form);
/// Right side of the Neumann corrector on element e: (q, v) over the Gamma_N
/// edges of K_i, with the partition's flux constants.
Vec neumann_element_rhs(const AssembledForms& forms, Index e);

struct CorrectorSet {
  Vec total;                       ///< sum over elements
  std::vector<LocalBlock> locals;  ///< per element (empty blocks for zero right sides)
};

/// sum_i D_i with (X + s(pi, pi))(D_i, v) = X_{K_i}(g, v) on V^m_i.
CorrectorSet dirichlet_corrector(const CemInputs& in, int layers, const Vec& g_tilde,
                                 FormKind form = FormKind::acal, bool keep_locals = false);
/// sum_i N_i with (A + s(pi, pi))(N_i, v) = (q, v)_{dK_i cap Gamma_N} on V^m_i.
CorrectorSet neumann_corrector(const CemInputs& in, int layers, bool keep_locals = false);

/// Basis plus static correctors sharing one factorization per region.
struct OfflineResult {
  MultiscaleSpace basis;
  CorrectorSet dirichlet;
  CorrectorSet neumann;
};

OfflineResult build_offline(const CemInputs& in, int layers, const Vec& g_tilde, bool with_neumann);

enum class Scheme { cd, diffusion };
enum class CorrectorKind { dirichlet, neumann };

/// Time-dependent data of a corrector: g_tilde(t) and its time derivative,
/// or the Neumann flux load per element (ignored for the other kind).
struct CorrectorData {
  std::function<Vec(double)> g_tilde;
  std::function<Vec(double)> g_tilde_t;
};

/// Backward Euler evolution of per-element correctors,
/// (D_i^{n+1} - D_i^n, v)/tau + B(D_i^{n+1}, v) = X_{K_i}(g^{n+1}, v) + (g_t^{n+1}, v)_{K_i}.
class TransientCorrector {
 public:
  TransientCorrector(const CemInputs& in, int layers, Scheme scheme, CorrectorKind kind);

  /// Static solve at time t: B(D_i, v) = X_{K_i}(g(t), v).
  void init(const CorrectorData& data, double t);
  /// One step to t_next; factorizes every region system anew.
  void step(const CorrectorData& data, double tau, double t_next);
  /// Init at t0 followed by `steps` steps of size tau; returns the totals at
  /// t0, t0 + tau, ..., one factorization pair per region group.
  std::vector<Vec> march(const CorrectorData& data, double t0, double tau, int steps);

  Vec total() const;
  const std::vector<LocalBlock>& locals() const noexcept { return locals_; }

 private:
  Vec element_rhs(const CorrectorData& data, Index e, double t, bool with_mass) const;
  SparseOperator form_operator() const;

  CemInputs in_;
  int layers_;
  Scheme scheme_;
  CorrectorKind kind_;
  std::vector<LocalBlock> locals_;
};

/// Adds a block's column `col` into a global fine vector.
void scatter_add(const FineGrid& grid, const LocalBlock& block, Index col, Vec& out);

}  // namespace cemflow
