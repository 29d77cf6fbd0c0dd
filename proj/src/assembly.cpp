#include "cemflow/assembly.hpp"

#include <cmath>

#include "cemflow/error.hpp"

namespace cemflow {

namespace {

constexpr double kGaussOffset = 0.28867513459481288225;  // 1 / (2 sqrt 3)

struct ShapeQ1 {
  std::array<double, 4> n;
  std::array<double, 4> dx;  // derivatives in reference coordinates
  std::array<double, 4> dy;
};

ShapeQ1 shape(double xi, double eta) {
  return {{(1 - xi) * (1 - eta), xi * (1 - eta), xi * eta, (1 - xi) * eta},
          {-(1 - eta), 1 - eta, eta, -eta},
          {-(1 - xi), -xi, xi, 1 - xi}};
}

template <class Fn>
void for_each_cell_point(const FineGrid& grid, Index c, Fn&& fn) {
  const Eigen::Vector2d o = grid.cell_origin(c);
  const auto g = QuadratureRule::abscissae();
  const double w = 0.25 * grid.hx() * grid.hy();
  for (double eta : g)
    for (double xi : g) fn(o.x() + xi * grid.hx(), o.y() + eta * grid.hy(), shape(xi, eta), w);
}

SparseOperator from_triplets(Index n, const std::vector<Eigen::Triplet<double, int>>& t) {
  SparseOperator op(n, n);
  op.setFromTriplets(t.begin(), t.end());
  op.makeCompressed();
  return op;
}

}  // namespace

std::array<double, 2> QuadratureRule::abscissae() { return {0.5 - kGaussOffset, 0.5 + kGaussOffset}; }

ElementMatrix q1_stiffness(double hx, double hy) {
  ElementMatrix k = ElementMatrix::Zero();
  const auto g = QuadratureRule::abscissae();
  for (double eta : g)
    for (double xi : g) {
      const auto s = shape(xi, eta);
      for (int a = 0; a < 4; ++a)
        for (int b = 0; b < 4; ++b)
          k(a, b) += 0.25 * hx * hy * (s.dx[a] * s.dx[b] / (hx * hx) + s.dy[a] * s.dy[b] / (hy * hy));
    }
  return k;
}

ElementMatrix q1_mass(double hx, double hy) {
  ElementMatrix m = ElementMatrix::Zero();
  const auto g = QuadratureRule::abscissae();
  for (double eta : g)
    for (double xi : g) {
      const auto s = shape(xi, eta);
      for (int a = 0; a < 4; ++a)
        for (int b = 0; b < 4; ++b) m(a, b) += 0.25 * hx * hy * s.n[a] * s.n[b];
    }
  return m;
}

const SparseOperator& AssembledForms::get(FormKind kind) const {
  switch (kind) {
    case FormKind::diffusion: return K;
    case FormKind::convection: return C;
    case FormKind::robin_full: return R_full;
    case FormKind::robin_half: return R_half;
    case FormKind::mass: return M;
    case FormKind::weighted_mass: return S;
    case FormKind::boundary_mass: return M_bnd;
    case FormKind::acal: return acal;
    case FormKind::a: return a;
    case FormKind::quasi: return quasi;
  }
  throw InvalidArgument("unknown form kind");
}

ElementMatrix AssembledForms::cell_matrix(Index c, FormKind kind) const {
  const double kappa = (*medium_)[c];
  switch (kind) {
    case FormKind::diffusion:
    case FormKind::a:
    case FormKind::quasi: return kappa * k_ref_;
    case FormKind::convection: return conv_[std::size_t(c)];
    case FormKind::acal: return kappa * k_ref_ + conv_[std::size_t(c)];
    case FormKind::mass: return m_ref_;
    case FormKind::weighted_mass: return weighted_[std::size_t(c)];
    case FormKind::robin_full:
    case FormKind::robin_half:
    case FormKind::boundary_mass: return ElementMatrix::Zero();
  }
  return ElementMatrix::Zero();
}

EdgeMatrix AssembledForms::edge_matrix(Index k, FormKind kind) const {
  switch (kind) {
    case FormKind::robin_full:
    case FormKind::acal:
    case FormKind::a: return edge_full_[std::size_t(k)];
    case FormKind::robin_half:
    case FormKind::quasi: return edge_half_[std::size_t(k)];
    case FormKind::boundary_mass: return edge_mass_[std::size_t(k)];
    default: return EdgeMatrix::Zero();
  }
}

std::span<const Index> AssembledForms::element_neumann_edges(Index e) const {
  return element_edges_[std::size_t(e)];
}

AssembledForms assemble_forms(const GridPair& grids, const MediumField& medium,
                              const VelocityField& velocity, const BoundaryPartition& boundary,
                              const RobinCoefficient& robin, double C, KappaScale scale) {
  const FineGrid& grid = grids.fine;
  CEMFLOW_REQUIRE(medium.nx() == grid.nx() && medium.ny() == grid.ny(), InvalidArgument,
                  "assemble_forms: medium does not match the fine grid");
  CEMFLOW_REQUIRE(boundary.num_edges() == Index(grid.boundary_edges().size()), InvalidArgument,
                  "assemble_forms: boundary partition does not match the fine grid");
  for (double k : medium.values())
    CEMFLOW_REQUIRE(k > 0.0, InvalidArgument, "assemble_forms: non-positive kappa");

  AssembledForms f;
  f.grids_ = &grids;
  f.boundary_ = &boundary;
  f.medium_ = &medium;
  f.velocity_ = velocity;
  f.robin_ = robin;
  f.C_weight_ = C;
  f.scale_ = scale;
  f.k_ref_ = q1_stiffness(grid.hx(), grid.hy());
  f.m_ref_ = q1_mass(grid.hx(), grid.hy());

  const KappaTilde kt(grids, medium, velocity, C, scale);
  const Index nc = grid.num_cells();
  f.conv_.resize(std::size_t(nc));
  f.weighted_.resize(std::size_t(nc));
  using T = Eigen::Triplet<double, int>;
  std::vector<T> tk, tc, tm, ts;
  tk.reserve(std::size_t(nc) * 16);
  tc.reserve(std::size_t(nc) * 16);
  tm.reserve(std::size_t(nc) * 16);
  ts.reserve(std::size_t(nc) * 16);
  for (Index c = 0; c < nc; ++c) {
    ElementMatrix cm = ElementMatrix::Zero();
    ElementMatrix sm = ElementMatrix::Zero();
    for_each_cell_point(grid, c, [&](double x, double y, const ShapeQ1& s, double w) {
      const Eigen::Vector2d b = velocity(x, y);
      const double kw = kt(x, y, c);
      for (int a = 0; a < 4; ++a)
        for (int bb = 0; bb < 4; ++bb) {
          const double grad = b.x() * s.dx[bb] / grid.hx() + b.y() * s.dy[bb] / grid.hy();
          cm(a, bb) += w * grad * s.n[a];
          sm(a, bb) += w * kw * s.n[a] * s.n[bb];
        }
    });
    f.conv_[std::size_t(c)] = cm;
    f.weighted_[std::size_t(c)] = sm;
    const auto nodes = grid.cell_nodes(c);
    const double kappa = medium[c];
    for (int a = 0; a < 4; ++a)
      for (int bb = 0; bb < 4; ++bb) {
        const int r = int(nodes[std::size_t(a)]);
        const int col = int(nodes[std::size_t(bb)]);
        tk.emplace_back(r, col, kappa * f.k_ref_(a, bb));
        tc.emplace_back(r, col, cm(a, bb));
        tm.emplace_back(r, col, f.m_ref_(a, bb));
        ts.emplace_back(r, col, sm(a, bb));
      }
  }

  const auto edges = grid.boundary_edges();
  f.edge_full_.assign(edges.size(), EdgeMatrix::Zero());
  f.edge_half_.assign(edges.size(), EdgeMatrix::Zero());
  f.edge_mass_.assign(edges.size(), EdgeMatrix::Zero());
  f.element_edges_.assign(std::size_t(grids.coarse.num_elements()), {});
  std::vector<T> tr, th, tb;
  double min_full = std::numeric_limits<double>::infinity();
  double min_half = std::numeric_limits<double>::infinity();
  double violation = 0.0;
  const auto g = QuadratureRule::abscissae();
  for (std::size_t k = 0; k < edges.size(); ++k) {
    if (boundary.edge_kind(Index(k)) != BoundaryKind::neumann_robin) continue;
    const auto& e = edges[k];
    f.element_edges_[std::size_t(grids.coarse.element_of_cell(e.cell))].push_back(Index(k));
    const Eigen::Vector2d p0 = grid.node_point(e.first);
    const Eigen::Vector2d p1 = grid.node_point(e.second);
    const double len = (p1 - p0).norm();
    const double bcoef = robin(medium, e.cell);
    EdgeMatrix rf = EdgeMatrix::Zero(), rh = EdgeMatrix::Zero(), mb = EdgeMatrix::Zero();
    for (double s : g) {
      const Eigen::Vector2d p = p0 + s * (p1 - p0);
      const double bn = velocity(p).dot(e.normal);
      const double w = 0.5 * len;
      const double phi[2] = {1 - s, s};
      min_full = std::min(min_full, bcoef - bn);
      min_half = std::min(min_half, bcoef - 0.5 * bn);
      violation += w * std::max(0.0, bn - bcoef);
      for (int a = 0; a < 2; ++a)
        for (int bb = 0; bb < 2; ++bb) {
          rf(a, bb) += w * (bcoef - bn) * phi[a] * phi[bb];
          rh(a, bb) += w * (bcoef - 0.5 * bn) * phi[a] * phi[bb];
          mb(a, bb) += w * phi[a] * phi[bb];
        }
    }
    f.edge_full_[k] = rf;
    f.edge_half_[k] = rh;
    f.edge_mass_[k] = mb;
    const int ids[2] = {int(e.first), int(e.second)};
    for (int a = 0; a < 2; ++a)
      for (int bb = 0; bb < 2; ++bb) {
        tr.emplace_back(ids[a], ids[bb], rf(a, bb));
        th.emplace_back(ids[a], ids[bb], rh(a, bb));
        tb.emplace_back(ids[a], ids[bb], mb(a, bb));
      }
  }
  if (!boundary.has_neumann()) min_full = min_half = 0.0;
  f.inflow = {min_full, min_half, violation};

  const Index n = grid.num_nodes();
  f.K = from_triplets(n, tk);
  f.C = from_triplets(n, tc);
  f.M = from_triplets(n, tm);
  f.S = from_triplets(n, ts);
  f.R_full = from_triplets(n, tr);
  f.R_half = from_triplets(n, th);
  f.M_bnd = from_triplets(n, tb);
  f.acal = f.K + f.C + f.R_full;
  f.a = f.K + f.R_full;
  f.quasi = f.K + f.R_half;
  return f;
}

namespace {

/// Position of global node n in the closure-node list of element e.
struct ElementLocal {
  int i0, j0, w;
  const FineGrid* grid;
  Index operator()(Index n) const {
    const auto [i, j] = grid->node_ij(n);
    return Index(j - j0) * w + (i - i0);
  }
};

ElementLocal element_local(const GridPair& grids, Index e) {
  const auto [I, J] = grids.coarse.element_ij(e);
  return {I * grids.coarse.cells_x(), J * grids.coarse.cells_y(), grids.coarse.cells_x() + 1, &grids.fine};
}

}  // namespace

Mat element_matrix(const AssembledForms& forms, Index e, FormKind kind) {
  const auto& grids = forms.grids();
  const Index n = grids.coarse.local_node_count();
  const auto loc = element_local(grids, e);
  Mat out = Mat::Zero(n, n);
  for (Index c : grids.coarse.fine_cells(e)) {
    const auto nodes = grids.fine.cell_nodes(c);
    const ElementMatrix m = forms.cell_matrix(c, kind);
    for (int a = 0; a < 4; ++a)
      for (int b = 0; b < 4; ++b) out(loc(nodes[std::size_t(a)]), loc(nodes[std::size_t(b)])) += m(a, b);
  }
  const auto edges = grids.fine.boundary_edges();
  for (Index k : forms.element_neumann_edges(e)) {
    const EdgeMatrix m = forms.edge_matrix(k, kind);
    const Index ids[2] = {loc(edges[std::size_t(k)].first), loc(edges[std::size_t(k)].second)};
    for (int a = 0; a < 2; ++a)
      for (int b = 0; b < 2; ++b) out(ids[a], ids[b]) += m(a, b);
  }
  return out;
}

Vec apply_element_form(const AssembledForms& forms, Index e, FormKind kind, const Vec& x) {
  const auto& grids = forms.grids();
  CEMFLOW_REQUIRE(x.size() == grids.fine.num_nodes(), InvalidArgument,
                  "apply_element_form: vector size does not match the fine grid");
  const auto loc = element_local(grids, e);
  Vec y = Vec::Zero(grids.coarse.local_node_count());
  for (Index c : grids.coarse.fine_cells(e)) {
    const auto nodes = grids.fine.cell_nodes(c);
    const ElementMatrix m = forms.cell_matrix(c, kind);
    Eigen::Vector4d xc;
    for (int a = 0; a < 4; ++a) xc[a] = x[nodes[std::size_t(a)]];
    const Eigen::Vector4d yc = m * xc;
    for (int a = 0; a < 4; ++a) y[loc(nodes[std::size_t(a)])] += yc[a];
  }
  const auto edges = grids.fine.boundary_edges();
  for (Index k : forms.element_neumann_edges(e)) {
    const EdgeMatrix m = forms.edge_matrix(k, kind);
    const auto& ed = edges[std::size_t(k)];
    const Eigen::Vector2d ye = m * Eigen::Vector2d(x[ed.first], x[ed.second]);
    y[loc(ed.first)] += ye[0];
    y[loc(ed.second)] += ye[1];
  }
  return y;
}

Vec interpolate(const SpaceTimeFunction& fn, const FineGrid& grid, double t) {
  return interpolate([&](double x, double y) { return fn(x, y, t); }, grid);
}

Vec interpolate(const std::function<double(double, double)>& fn, const FineGrid& grid) {
  Vec v(grid.num_nodes());
  for (Index n = 0; n < grid.num_nodes(); ++n) {
    const Eigen::Vector2d p = grid.node_point(n);
    v[n] = fn(p.x(), p.y());
    CEMFLOW_REQUIRE(std::isfinite(v[n]), InvalidArgument, "interpolate: non-finite value");
  }
  return v;
}

namespace {

template <class QFn>
Vec boundary_load_impl(const FineGrid& grid, const BoundaryPartition& boundary, QFn&& qfn) {
  Vec load = Vec::Zero(grid.num_nodes());
  const auto edges = grid.boundary_edges();
  const auto g = QuadratureRule::abscissae();
  for (std::size_t k = 0; k < edges.size(); ++k) {
    if (boundary.edge_kind(Index(k)) != BoundaryKind::neumann_robin) continue;
    const auto& e = edges[k];
    const Eigen::Vector2d p0 = grid.node_point(e.first);
    const Eigen::Vector2d p1 = grid.node_point(e.second);
    const double w = 0.5 * (p1 - p0).norm();
    for (double s : g) {
      const double q = qfn(Index(k), p0 + s * (p1 - p0));
      load[e.first] += w * q * (1 - s);
      load[e.second] += w * q * s;
    }
  }
  return load;
}

}  // namespace

Vec boundary_load(const FineGrid& grid, const BoundaryPartition& boundary) {
  return boundary_load_impl(grid, boundary,
                            [&](Index k, const Eigen::Vector2d&) { return boundary.edge_q(k); });
}

Vec boundary_load(const FineGrid& grid, const BoundaryPartition& boundary, const SpaceTimeFunction& q,
                  double t) {
  return boundary_load_impl(grid, boundary,
                            [&](Index, const Eigen::Vector2d& p) { return q(p.x(), p.y(), t); });
}

Vec source_load(const FineGrid& grid, const SpaceTimeFunction& f, double t) {
  Vec load = Vec::Zero(grid.num_nodes());
  for (Index c = 0; c < grid.num_cells(); ++c) {
    const auto nodes = grid.cell_nodes(c);
    for_each_cell_point(grid, c, [&](double x, double y, const ShapeQ1& s, double w) {
      const double fv = f(x, y, t);
      for (int a = 0; a < 4; ++a) load[nodes[std::size_t(a)]] += w * fv * s.n[a];
    });
  }
  return load;
}

SparseOperator restrict(const SparseOperator& op, std::span<const Index> dofs) {
  CEMFLOW_REQUIRE(op.rows() == op.cols(), InvalidArgument, "restrict: operator must be square");
  std::vector<int> local(std::size_t(op.rows()), -1);
  for (std::size_t k = 0; k < dofs.size(); ++k) {
    CEMFLOW_REQUIRE(dofs[k] >= 0 && dofs[k] < op.rows(), InvalidArgument, "restrict: dof out of range");
    local[std::size_t(dofs[k])] = int(k);
  }
  std::vector<Eigen::Triplet<double, int>> t;
  for (std::size_t k = 0; k < dofs.size(); ++k)
    for (SparseOperator::InnerIterator it(op, dofs[k]); it; ++it) {
      const int c = local[std::size_t(it.col())];
      if (c >= 0) t.emplace_back(int(k), c, it.value());
    }
  SparseOperator out(Index(dofs.size()), Index(dofs.size()));
  out.setFromTriplets(t.begin(), t.end());
  out.makeCompressed();
  return out;
}

Vec restrict(const Vec& v, std::span<const Index> dofs) {
  Vec out(Index(dofs.size()));
  for (std::size_t k = 0; k < dofs.size(); ++k) {
    CEMFLOW_REQUIRE(dofs[k] >= 0 && dofs[k] < v.size(), InvalidArgument, "restrict: dof out of range");
    out[Index(k)] = v[dofs[k]];
  }
  return out;
}

}  // namespace cemflow
