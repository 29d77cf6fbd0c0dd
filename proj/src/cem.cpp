#include "cemflow/cem.hpp"

#include <map>
#include <tuple>

#include <Eigen/OrderingMethods>
#include <Eigen/SparseLU>

#include "cemflow/error.hpp"
#include "cemflow/parallel.hpp"

namespace cemflow {

namespace {

bool overlap(const LocalBlock& a, const LocalBlock& b) {
  return a.i0 <= b.i1 && b.i0 <= a.i1 && a.j0 <= b.j1 && b.j0 <= a.j1;
}

Index block_row(const LocalBlock& b, int i, int j) { return Index(j - b.j0) * b.width() + (i - b.i0); }

/// Elements grouped by identical region rectangle, in order of first appearance.
std::vector<std::pair<OversampleRegion, std::vector<Index>>> region_groups(const GridPair& grids, int layers) {
  std::map<std::tuple<int, int, int, int>, std::size_t> index;
  std::vector<std::pair<OversampleRegion, std::vector<Index>>> groups;
  for (Index e = 0; e < grids.coarse.num_elements(); ++e) {
    OversampleRegion r = corrector_region(grids, e, layers);
    const auto key = std::make_tuple(r.elem_x0, r.elem_x1, r.elem_y0, r.elem_y1);
    auto it = index.find(key);
    if (it == index.end()) {
      index.emplace(key, groups.size());
      groups.push_back({std::move(r), {e}});
    } else {
      groups[it->second].second.push_back(e);
    }
  }
  return groups;
}

/// Puts a closure-node vector of element e onto the free dofs of a patch.
Vec element_to_free(const GridPair& grids, const PatchSystem& sys, Index e, const Vec& local,
                    std::vector<int>& map) {
  const auto& free = sys.free();
  for (std::size_t k = 0; k < free.size(); ++k) map[std::size_t(free[k])] = int(k);
  Vec out = Vec::Zero(Index(free.size()));
  const auto nodes = grids.coarse.fine_nodes(e);
  for (std::size_t p = 0; p < nodes.size(); ++p) {
    const int k = map[std::size_t(nodes[p])];
    if (k >= 0) out[k] += local[Index(p)];
  }
  for (Index n : free) map[std::size_t(n)] = -1;
  return out;
}

Vec sum_locals(const FineGrid& grid, const std::vector<LocalBlock>& locals) {
  Vec total = Vec::Zero(grid.num_nodes());
  for (const auto& b : locals)
    if (b.values.size() > 0) scatter_add(grid, b, 0, total);
  return total;
}

}  // namespace

void scatter_add(const FineGrid& grid, const LocalBlock& block, Index col, Vec& out) {
  const int w = block.width();
  for (Index r = 0; r < block.size(); ++r) {
    const double v = block.values(r, col);
    if (v != 0.0) out[grid.node(block.i0 + int(r % w), block.j0 + int(r / w))] += v;
  }
}

MultiscaleSpace::MultiscaleSpace(const FineGrid& grid, int layers, int lm, std::vector<LocalBlock> blocks)
    : grid_(&grid), layers_(layers), lm_(lm), rows_(grid.num_nodes()), blocks_(std::move(blocks)) {
  for (const auto& b : blocks_)
    CEMFLOW_REQUIRE(b.values.rows() == b.size() && b.values.cols() == lm, InvalidArgument,
                    "MultiscaleSpace: block shape mismatch");
}

Index MultiscaleSpace::nonzeros() const {
  Index nnz = 0;
  for (const auto& b : blocks_) nnz += (b.values.array() != 0.0).count();
  return nnz;
}

Vec MultiscaleSpace::apply(const Vec& c) const {
  CEMFLOW_REQUIRE(c.size() == cols(), InvalidArgument, "MultiscaleSpace::apply: size mismatch");
  Vec out = Vec::Zero(rows_);
  for (std::size_t e = 0; e < blocks_.size(); ++e) {
    const auto& b = blocks_[e];
    const Vec local = b.values * c.segment(Index(e) * lm_, lm_);
    const int w = b.width();
    for (Index r = 0; r < b.size(); ++r) out[grid_->node(b.i0 + int(r % w), b.j0 + int(r / w))] += local[r];
  }
  return out;
}

Vec MultiscaleSpace::apply_transpose(const Vec& v) const {
  CEMFLOW_REQUIRE(v.size() == rows_, InvalidArgument, "MultiscaleSpace::apply_transpose: size mismatch");
  Vec out(cols());
  for (std::size_t e = 0; e < blocks_.size(); ++e) {
    const auto& b = blocks_[e];
    Vec local(b.size());
    const int w = b.width();
    for (Index r = 0; r < b.size(); ++r) local[r] = v[grid_->node(b.i0 + int(r % w), b.j0 + int(r / w))];
    out.segment(Index(e) * lm_, lm_) = b.values.transpose() * local;
  }
  return out;
}

Vec MultiscaleSpace::column(Index k) const {
  CEMFLOW_REQUIRE(k >= 0 && k < cols(), InvalidArgument, "MultiscaleSpace::column: index out of range");
  Vec out = Vec::Zero(rows_);
  scatter_add(*grid_, blocks_[std::size_t(k / lm_)], k % lm_, out);
  return out;
}

std::vector<Mat> MultiscaleSpace::galerkin(std::span<const SparseOperator* const> ops) const {
  const Index n = cols();
  std::vector<Mat> out(ops.size(), Mat::Zero(n, n));
  const int nx1 = grid_->nx() + 1;
  for (const auto* op : ops)
    CEMFLOW_REQUIRE(op->rows() == rows_ && op->cols() == rows_, InvalidArgument,
                    "MultiscaleSpace::galerkin: operator size mismatch");
  std::vector<Index> neighbours;
  RowMat Y;
  for (std::size_t e2 = 0; e2 < blocks_.size(); ++e2) {
    const auto& b2 = blocks_[e2];
    neighbours.clear();
    for (std::size_t e1 = 0; e1 < blocks_.size(); ++e1)
      if (overlap(blocks_[e1], b2)) neighbours.push_back(Index(e1));
    for (std::size_t o = 0; o < ops.size(); ++o) {
      const SparseOperator& X = *ops[o];
      // Y = X psi_e2, supported on the closure rectangle of e2.
      Y.setZero(b2.size(), lm_);
      for (int j = b2.j0; j <= b2.j1; ++j)
        for (int i = b2.i0; i <= b2.i1; ++i) {
          const Index row = block_row(b2, i, j);
          for (SparseOperator::InnerIterator it(X, Index(j) * nx1 + i); it; ++it) {
            const int ci = int(it.col() % nx1);
            const int cj = int(it.col() / nx1);
            if (ci < b2.i0 || ci > b2.i1 || cj < b2.j0 || cj > b2.j1) continue;
            Y.row(row) += it.value() * b2.values.row(block_row(b2, ci, cj));
          }
        }
      Mat& G = out[o];
      for (Index e1 : neighbours) {
        const auto& b1 = blocks_[std::size_t(e1)];
        const int ia = std::max(b1.i0, b2.i0), ib = std::min(b1.i1, b2.i1);
        const int ja = std::max(b1.j0, b2.j0), jb = std::min(b1.j1, b2.j1);
        const int len = ib - ia + 1;
        double acc[64] = {};
        const int l = lm_;
        const bool small = l * l <= 64;
        Mat big;
        if (!small) big = Mat::Zero(l, l);
        for (int j = ja; j <= jb; ++j) {
          const double* p1 = b1.values.data() + block_row(b1, ia, j) * l;
          const double* p2 = Y.data() + block_row(b2, ia, j) * l;
          if (small) {
            for (int k = 0; k < len; ++k, p1 += l, p2 += l)
              for (int p = 0; p < l; ++p) {
                const double a = p1[p];
                if (a == 0.0) continue;
                for (int q = 0; q < l; ++q) acc[p * l + q] += a * p2[q];
              }
          } else {
            big += Eigen::Map<const RowMat>(p1, len, l).transpose() * Eigen::Map<const RowMat>(p2, len, l);
          }
        }
        for (int p = 0; p < l; ++p)
          for (int q = 0; q < l; ++q)
            G(e1 * l + p, Index(e2) * l + q) += small ? acc[p * l + q] : big(p, q);
      }
    }
  }
  return out;
}

Mat MultiscaleSpace::galerkin(const SparseOperator& op) const {
  const SparseOperator* ops[] = {&op};
  return std::move(galerkin(ops).front());
}

SparseColMatrix MultiscaleSpace::to_sparse() const {
  std::vector<Eigen::Triplet<double, int>> t;
  for (std::size_t e = 0; e < blocks_.size(); ++e) {
    const auto& b = blocks_[e];
    const int w = b.width();
    for (Index r = 0; r < b.size(); ++r)
      for (int j = 0; j < lm_; ++j)
        if (b.values(r, j) != 0.0)
          t.emplace_back(int(grid_->node(b.i0 + int(r % w), b.j0 + int(r / w))), int(Index(e) * lm_ + j),
                         b.values(r, j));
  }
  SparseColMatrix P(rows_, cols());
  P.setFromTriplets(t.begin(), t.end());
  return P;
}

struct PatchSystem::Impl {
  SparseColMatrix matrix;
  Eigen::SparseLU<SparseColMatrix, Eigen::COLAMDOrdering<int>> lu;
  Index n_free = 0;
};

PatchSystem::~PatchSystem() = default;

PatchSystem::PatchSystem(const CemInputs& in, const OversampleRegion& region, const SparseOperator& X)
    : impl_(std::make_unique<Impl>()) {
  const auto& forms = *in.forms;
  const auto& grids = forms.grids();
  const auto& aux = *in.aux;
  grid_ = &grids.fine;
  const int rx = grids.coarse.cells_x();
  const int ry = grids.coarse.cells_y();
  i0_ = region.elem_x0 * rx;
  i1_ = (region.elem_x1 + 1) * rx;
  j0_ = region.elem_y0 * ry;
  j1_ = (region.elem_y1 + 1) * ry;

  free_ = local_dof_mask(grids, region, forms.boundary()).free;
  const Index nf = Index(free_.size());
  const Index lm = aux.lm();
  const Index nq = Index(region.elements.size()) * lm;
  CEMFLOW_REQUIRE(nf > 0, NumericalError,
                  "local system on element " + std::to_string(region.center) + " has no free dofs");

  std::vector<int> map(std::size_t(grids.fine.num_nodes()), -1);
  for (Index k = 0; k < nf; ++k) map[std::size_t(free_[std::size_t(k)])] = int(k);

  std::vector<Eigen::Triplet<double, int>> t;
  t.reserve(std::size_t(nf) * 9 + std::size_t(nq) * 2 * std::size_t(grids.coarse.local_node_count()) +
            std::size_t(nq));
  for (Index k = 0; k < nf; ++k)
    for (SparseOperator::InnerIterator it(X, free_[std::size_t(k)]); it; ++it) {
      const int c = map[std::size_t(it.col())];
      if (c >= 0) t.emplace_back(int(k), c, it.value());
    }
  Index col = nf;
  for (Index e : region.elements) {
    const auto& el = aux.element(e);
    for (Index j = 0; j < lm; ++j, ++col) {
      for (std::size_t p = 0; p < el.nodes.size(); ++p) {
        const int r = map[std::size_t(el.nodes[p])];
        if (r < 0) continue;
        const double v = el.q(Index(p), j);
        t.emplace_back(r, int(col), v);
        t.emplace_back(int(col), r, v);
      }
      t.emplace_back(int(col), int(col), -1.0);
    }
  }
  impl_->n_free = nf;
  impl_->matrix.resize(nf + nq, nf + nq);
  impl_->matrix.setFromTriplets(t.begin(), t.end());
  impl_->matrix.makeCompressed();
  impl_->lu.compute(impl_->matrix);
  if (impl_->lu.info() != Eigen::Success)
    throw NumericalError("local system on element " + std::to_string(region.center) +
                         " could not be factorized (singular?)");
}

Mat PatchSystem::solve(const Mat& rhs) const {
  CEMFLOW_REQUIRE(rhs.rows() == impl_->n_free, InvalidArgument, "PatchSystem::solve: size mismatch");
  Mat full = Mat::Zero(impl_->matrix.rows(), rhs.cols());
  full.topRows(impl_->n_free) = rhs;
  Mat x = impl_->lu.solve(full);
  if (impl_->lu.info() != Eigen::Success || !x.allFinite())
    throw NumericalError("local solve failed");
  return x.topRows(impl_->n_free);
}

LocalBlock PatchSystem::scatter(const Mat& values) const {
  LocalBlock b{i0_, i1_, j0_, j1_, RowMat::Zero(Index(i1_ - i0_ + 1) * (j1_ - j0_ + 1), values.cols())};
  for (std::size_t k = 0; k < free_.size(); ++k) {
    const auto [i, j] = grid_->node_ij(free_[k]);
    b.values.row(block_row(b, i, j)) = values.row(Index(k));
  }
  return b;
}

Mat PatchSystem::gather(const LocalBlock& block) const {
  Mat out(Index(free_.size()), block.values.cols());
  for (std::size_t k = 0; k < free_.size(); ++k) {
    const auto [i, j] = grid_->node_ij(free_[k]);
    out.row(Index(k)) = block.values.row(block_row(block, i, j));
  }
  return out;
}

OversampleRegion corrector_region(const GridPair& grids, Index e, int layers) {
  if (layers == kGlobalLayers) {
    OversampleRegion r = whole_domain_region(grids);
    r.center = e;
    return r;
  }
  return oversample_region(grids, e, layers);
}

Vec dirichlet_element_rhs(const AssembledForms& forms, Index e, const Vec& g_tilde, FormKind form) {
  return apply_element_form(forms, e, form, g_tilde);
}

Vec neumann_element_rhs(const AssembledForms& forms, Index e) {
  const auto& grids = forms.grids();
  const auto [I, J] = grids.coarse.element_ij(e);
  const int i0 = I * grids.coarse.cells_x();
  const int j0 = J * grids.coarse.cells_y();
  const int w = grids.coarse.cells_x() + 1;
  Vec out = Vec::Zero(grids.coarse.local_node_count());
  const auto edges = grids.fine.boundary_edges();
  const auto g = QuadratureRule::abscissae();
  for (Index k : forms.element_neumann_edges(e)) {
    const auto& ed = edges[std::size_t(k)];
    const double q = forms.boundary().edge_q(k);
    const double len = (grids.fine.node_point(ed.second) - grids.fine.node_point(ed.first)).norm();
    const auto [a_i, a_j] = grids.fine.node_ij(ed.first);
    const auto [b_i, b_j] = grids.fine.node_ij(ed.second);
    for (double s : g) {
      out[Index(a_j - j0) * w + (a_i - i0)] += 0.5 * len * q * (1 - s);
      out[Index(b_j - j0) * w + (b_i - i0)] += 0.5 * len * q * s;
    }
  }
  return out;
}

namespace {

struct StaticJob {
  bool basis = false;
  const Vec* g_tilde = nullptr;
  FormKind dirichlet_form = FormKind::acal;
  bool neumann = false;
  bool keep_locals = true;
};

struct StaticOutput {
  std::vector<LocalBlock> basis;
  std::vector<LocalBlock> dirichlet;
  std::vector<LocalBlock> neumann;
};

StaticOutput run_static(const CemInputs& in, int layers, const StaticJob& job) {
  const auto& forms = *in.forms;
  const auto& grids = forms.grids();
  const auto& aux = *in.aux;
  const Index ne = grids.coarse.num_elements();
  const Index lm = aux.lm();
  StaticOutput out;
  if (job.basis) out.basis.resize(std::size_t(ne));
  if (job.g_tilde) out.dirichlet.resize(std::size_t(ne));
  if (job.neumann) out.neumann.resize(std::size_t(ne));

  // The Dirichlet right side uses X = acal or a; the system matrix is the
  // same form plus the s-penalty. Basis and Neumann always use acal.
  const bool split = job.g_tilde && job.dirichlet_form != FormKind::acal;
  const bool need_acal = job.basis || job.neumann || (job.g_tilde && !split);
  const auto groups = region_groups(grids, layers);

  auto run_group = [&](std::size_t gi) {
    const auto& [region, members] = groups[gi];
    std::vector<int> map(std::size_t(grids.fine.num_nodes()), -1);
    if (need_acal) {
      PatchSystem sys(in, region, forms.acal);
      for (Index e : members) {
        std::vector<Vec> rhs;
        if (job.basis) {
          const auto& el = aux.element(e);
          for (Index j = 0; j < lm; ++j) rhs.push_back(element_to_free(grids, sys, e, el.q.col(j), map));
        }
        if (job.g_tilde && !split)
          rhs.push_back(element_to_free(grids, sys, e, dirichlet_element_rhs(forms, e, *job.g_tilde, FormKind::acal), map));
        bool neumann_nonzero = false;
        if (job.neumann) {
          Vec r = element_to_free(grids, sys, e, neumann_element_rhs(forms, e), map);
          neumann_nonzero = r.cwiseAbs().maxCoeff() > 0.0;
          rhs.push_back(std::move(r));
        }
        Mat R(Index(sys.free().size()), Index(rhs.size()));
        for (std::size_t k = 0; k < rhs.size(); ++k) R.col(Index(k)) = rhs[k];
        const Mat X = sys.solve(R);
        Index c = 0;
        if (job.basis) {
          out.basis[std::size_t(e)] = sys.scatter(X.middleCols(0, lm));
          c += lm;
        }
        if (job.g_tilde && !split) out.dirichlet[std::size_t(e)] = sys.scatter(X.col(c++));
        if (job.neumann) {
          if (neumann_nonzero) out.neumann[std::size_t(e)] = sys.scatter(X.col(c));
          ++c;
        }
      }
    }
    if (split) {
      PatchSystem sys(in, region, forms.get(job.dirichlet_form));
      for (Index e : members) {
        const Vec r = element_to_free(grids, sys, e, dirichlet_element_rhs(forms, e, *job.g_tilde, job.dirichlet_form), map);
        out.dirichlet[std::size_t(e)] = sys.scatter(sys.solve(r));
      }
    }
  };
  parallel_for(Index(groups.size()), in.threads, [&](Index gi) { run_group(std::size_t(gi)); });
  return out;
}

CorrectorSet make_set(const FineGrid& grid, std::vector<LocalBlock> locals, bool keep) {
  CorrectorSet set;
  set.total = sum_locals(grid, locals);
  if (keep) set.locals = std::move(locals);
  return set;
}

/// m = infinity correctors: one global solve with the summed right side.
Vec global_corrector(const CemInputs& in, const Vec& rhs_global, FormKind form) {
  const auto& grids = in.forms->grids();
  const OversampleRegion region = whole_domain_region(grids);
  PatchSystem sys(in, region, in.forms->get(form));
  const Vec r = restrict(rhs_global, sys.free());
  const Mat x = sys.solve(r);
  Vec out = Vec::Zero(grids.fine.num_nodes());
  for (std::size_t k = 0; k < sys.free().size(); ++k) out[sys.free()[k]] = x(Index(k), 0);
  return out;
}

}  // namespace

MultiscaleSpace build_ms_basis(const CemInputs& in, int layers) {
  StaticJob job;
  job.basis = true;
  auto out = run_static(in, layers, job);
  return MultiscaleSpace(in.forms->grids().fine, layers, in.aux->lm(), std::move(out.basis));
}

CorrectorSet dirichlet_corrector(const CemInputs& in, int layers, const Vec& g_tilde, FormKind form,
                                 bool keep_locals) {
  CEMFLOW_REQUIRE(form == FormKind::acal || form == FormKind::a, InvalidArgument,
                  "dirichlet_corrector: form must be acal or a");
  const auto& grid = in.forms->grids().fine;
  CEMFLOW_REQUIRE(g_tilde.size() == grid.num_nodes(), InvalidArgument,
                  "dirichlet_corrector: g_tilde size does not match the fine grid");
  if (layers == kGlobalLayers && !keep_locals) {
    CorrectorSet set;
    set.total = global_corrector(in, in.forms->get(form) * g_tilde, form);
    return set;
  }
  StaticJob job;
  job.g_tilde = &g_tilde;
  job.dirichlet_form = form;
  auto out = run_static(in, layers, job);
  return make_set(grid, std::move(out.dirichlet), keep_locals);
}

CorrectorSet neumann_corrector(const CemInputs& in, int layers, bool keep_locals) {
  CEMFLOW_REQUIRE(in.forms->boundary().has_neumann(), InvalidArgument,
                  "neumann_corrector: Gamma_N is empty");
  const auto& grid = in.forms->grids().fine;
  if (layers == kGlobalLayers && !keep_locals) {
    CorrectorSet set;
    set.total = global_corrector(in, boundary_load(grid, in.forms->boundary()), FormKind::acal);
    return set;
  }
  StaticJob job;
  job.neumann = true;
  auto out = run_static(in, layers, job);
  return make_set(grid, std::move(out.neumann), keep_locals);
}

OfflineResult build_offline(const CemInputs& in, int layers, const Vec& g_tilde, bool with_neumann) {
  const auto& grid = in.forms->grids().fine;
  StaticJob job;
  job.basis = true;
  job.g_tilde = &g_tilde;
  job.neumann = with_neumann && in.forms->boundary().has_neumann();
  auto out = run_static(in, layers, job);
  CorrectorSet neumann;
  if (job.neumann)
    neumann = make_set(grid, std::move(out.neumann), false);
  else
    neumann.total = Vec::Zero(grid.num_nodes());
  return OfflineResult{MultiscaleSpace(grid, layers, in.aux->lm(), std::move(out.basis)),
                       make_set(grid, std::move(out.dirichlet), false), std::move(neumann)};
}

TransientCorrector::TransientCorrector(const CemInputs& in, int layers, Scheme scheme, CorrectorKind kind)
    : in_(in), layers_(layers), scheme_(scheme), kind_(kind) {
  if (kind == CorrectorKind::neumann)
    CEMFLOW_REQUIRE(in.forms->boundary().has_neumann(), InvalidArgument,
                    "TransientCorrector: Gamma_N is empty");
  locals_.resize(std::size_t(in.forms->grids().coarse.num_elements()));
}

SparseOperator TransientCorrector::form_operator() const {
  return scheme_ == Scheme::cd ? in_.forms->acal : in_.forms->a;
}

Vec TransientCorrector::element_rhs(const CorrectorData& data, Index e, double t, bool with_mass) const {
  const auto& forms = *in_.forms;
  if (kind_ == CorrectorKind::neumann) return neumann_element_rhs(forms, e);
  const FormKind form = scheme_ == Scheme::cd ? FormKind::acal : FormKind::a;
  Vec r = dirichlet_element_rhs(forms, e, data.g_tilde(t), form);
  if (with_mass) r += apply_element_form(forms, e, FormKind::mass, data.g_tilde_t(t));
  return r;
}

void TransientCorrector::init(const CorrectorData& data, double t) {
  const auto& grids = in_.forms->grids();
  const SparseOperator X = form_operator();
  std::vector<int> map(std::size_t(grids.fine.num_nodes()), -1);
  for (const auto& [region, members] : region_groups(grids, layers_)) {
    PatchSystem sys(in_, region, X);
    for (Index e : members) {
      const Vec r = element_to_free(grids, sys, e, element_rhs(data, e, t, false), map);
      locals_[std::size_t(e)] = sys.scatter(sys.solve(r));
    }
  }
}

void TransientCorrector::step(const CorrectorData& data, double tau, double t_next) {
  CEMFLOW_REQUIRE(tau > 0.0, InvalidArgument, "TransientCorrector::step: tau must be positive");
  const auto& grids = in_.forms->grids();
  const SparseOperator X = (form_operator() + in_.forms->M / tau).eval();
  std::vector<int> map(std::size_t(grids.fine.num_nodes()), -1);
  for (const auto& [region, members] : region_groups(grids, layers_)) {
    PatchSystem sys(in_, region, X);
    const SparseOperator Mff = restrict(in_.forms->M, sys.free());
    for (Index e : members) {
      auto& local = locals_[std::size_t(e)];
      Vec prev = local.values.size() > 0 ? Vec(sys.gather(local).col(0)) : Vec::Zero(Index(sys.free().size()));
      const Vec r = element_to_free(grids, sys, e, element_rhs(data, e, t_next, true), map) + Mff * prev / tau;
      local = sys.scatter(sys.solve(r));
    }
  }
}

std::vector<Vec> TransientCorrector::march(const CorrectorData& data, double t0, double tau, int steps) {
  CEMFLOW_REQUIRE(tau > 0.0 && steps >= 0, InvalidArgument, "TransientCorrector::march: bad step data");
  const auto& forms = *in_.forms;
  const auto& grids = forms.grids();
  std::vector<Vec> totals(std::size_t(steps) + 1, Vec::Zero(grids.fine.num_nodes()));
  const SparseOperator X0 = form_operator();
  const SparseOperator X1 = (X0 + forms.M / tau).eval();

  // Time levels of the data, evaluated once.
  std::vector<Vec> g_hist, gt_hist;
  if (kind_ == CorrectorKind::dirichlet) {
    for (int n = 0; n <= steps; ++n) {
      g_hist.push_back(data.g_tilde(t0 + n * tau));
      gt_hist.push_back(n == 0 ? Vec() : data.g_tilde_t(t0 + n * tau));
    }
  }
  const FormKind form = scheme_ == Scheme::cd ? FormKind::acal : FormKind::a;
  auto rhs_at = [&](Index e, int n) -> Vec {
    if (kind_ == CorrectorKind::neumann) return neumann_element_rhs(forms, e);
    Vec r = dirichlet_element_rhs(forms, e, g_hist[std::size_t(n)], form);
    if (n > 0) r += apply_element_form(forms, e, FormKind::mass, gt_hist[std::size_t(n)]);
    return r;
  };

  std::vector<int> map(std::size_t(grids.fine.num_nodes()), -1);
  for (const auto& [region, members] : region_groups(grids, layers_)) {
    // Skip groups whose data vanish at every level.
    std::vector<std::vector<Vec>> rhs(members.size());
    bool any = false;
    for (std::size_t m = 0; m < members.size(); ++m)
      for (int n = 0; n <= steps; ++n) {
        Vec r = rhs_at(members[m], n);
        any = any || r.cwiseAbs().maxCoeff() > 0.0;
        rhs[m].push_back(std::move(r));
      }
    if (!any) {
      for (Index e : members) locals_[std::size_t(e)] = LocalBlock{};
      continue;
    }
    PatchSystem sys0(in_, region, X0);
    std::unique_ptr<PatchSystem> sys1;
    if (steps > 0) sys1 = std::make_unique<PatchSystem>(in_, region, X1);
    const SparseOperator Mff = restrict(forms.M, sys0.free());
    for (std::size_t m = 0; m < members.size(); ++m) {
      const Index e = members[m];
      Vec d = sys0.solve(element_to_free(grids, sys0, e, rhs[m][0], map)).col(0);
      LocalBlock block = sys0.scatter(d);
      scatter_add(grids.fine, block, 0, totals[0]);
      for (int n = 1; n <= steps; ++n) {
        const Vec r = element_to_free(grids, *sys1, e, rhs[m][std::size_t(n)], map) + Mff * d / tau;
        d = sys1->solve(r).col(0);
        block = sys1->scatter(d);
        scatter_add(grids.fine, block, 0, totals[std::size_t(n)]);
      }
      locals_[std::size_t(e)] = std::move(block);
    }
  }
  return totals;
}

Vec TransientCorrector::total() const { return sum_locals(in_.forms->grids().fine, locals_); }

}  // namespace cemflow
