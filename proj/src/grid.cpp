#include "cemflow/grid.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "cemflow/error.hpp"

namespace cemflow {

void DomainSpec::validate() const {
  CEMFLOW_REQUIRE(x_min < x_max && y_min < y_max, InvalidArgument,
                  "domain: require x_min < x_max and y_min < y_max");
}

std::string_view to_string(Side side) {
  switch (side) {
    case Side::left: return "left";
    case Side::right: return "right";
    case Side::bottom: return "bottom";
    case Side::top: return "top";
  }
  return "?";
}

Side side_from_string(std::string_view name) {
  if (name == "left") return Side::left;
  if (name == "right") return Side::right;
  if (name == "bottom") return Side::bottom;
  if (name == "top") return Side::top;
  throw InvalidArgument("unknown side '" + std::string(name) + "'");
}

Eigen::Vector2d outward_normal(Side side) {
  switch (side) {
    case Side::left: return {-1.0, 0.0};
    case Side::right: return {1.0, 0.0};
    case Side::bottom: return {0.0, -1.0};
    case Side::top: return {0.0, 1.0};
  }
  return {0.0, 0.0};
}

FineGrid::FineGrid(const DomainSpec& domain, int nx, int ny) : domain_(domain), nx_(nx), ny_(ny) {
  domain.validate();
  CEMFLOW_REQUIRE(nx >= 1 && ny >= 1, InvalidArgument, "fine grid: cell counts must be >= 1");
  hx_ = (domain.x_max - domain.x_min) / nx;
  hy_ = (domain.y_max - domain.y_min) / ny;

  boundary_edges_.reserve(std::size_t(2 * (nx + ny)));
  for (int i = 0; i < nx; ++i)
    boundary_edges_.push_back({node(i, 0), node(i + 1, 0), cell(i, 0), Side::bottom,
                               outward_normal(Side::bottom)});
  for (int j = 0; j < ny; ++j)
    boundary_edges_.push_back({node(nx, j), node(nx, j + 1), cell(nx - 1, j), Side::right,
                               outward_normal(Side::right)});
  for (int i = 0; i < nx; ++i)
    boundary_edges_.push_back({node(i, ny), node(i + 1, ny), cell(i, ny - 1), Side::top,
                               outward_normal(Side::top)});
  for (int j = 0; j < ny; ++j)
    boundary_edges_.push_back({node(0, j), node(0, j + 1), cell(0, j), Side::left,
                               outward_normal(Side::left)});
}

Eigen::Vector2d FineGrid::node_point(Index n) const {
  const auto [i, j] = node_ij(n);
  // Snap the last row/column to the exact bound.
  const double x = i == nx_ ? domain_.x_max : domain_.x_min + i * hx_;
  const double y = j == ny_ ? domain_.y_max : domain_.y_min + j * hy_;
  return {x, y};
}

Eigen::Vector2d FineGrid::cell_origin(Index c) const {
  const auto [i, j] = cell_ij(c);
  return {domain_.x_min + i * hx_, domain_.y_min + j * hy_};
}

std::array<Index, 4> FineGrid::cell_nodes(Index c) const {
  const auto [i, j] = cell_ij(c);
  return {node(i, j), node(i + 1, j), node(i + 1, j + 1), node(i, j + 1)};
}

bool FineGrid::on_boundary(Index n) const {
  const auto [i, j] = node_ij(n);
  return i == 0 || j == 0 || i == nx_ || j == ny_;
}

CoarseGrid::CoarseGrid(const FineGrid& fine, int Nx, int Ny)
    : fine_nx_(fine.nx()), fine_ny_(fine.ny()), Nx_(Nx), Ny_(Ny) {
  CEMFLOW_REQUIRE(Nx >= 1 && Ny >= 1, InvalidArgument, "coarse grid: element counts must be >= 1");
  if (fine.nx() % Nx != 0 || fine.ny() % Ny != 0) {
    std::ostringstream msg;
    msg << "coarse grid: fine counts (" << fine.nx() << ", " << fine.ny()
        << ") are not divisible by coarse counts (" << Nx << ", " << Ny << ")";
    throw InvalidArgument(msg.str());
  }
  rx_ = fine.nx() / Nx;
  ry_ = fine.ny() / Ny;
  H_ = std::max(fine.hx() * rx_, fine.hy() * ry_);
}

Index CoarseGrid::element_of_cell(Index cell) const {
  const int i = int(cell % fine_nx_);
  const int j = int(cell / fine_nx_);
  return element(i / rx_, j / ry_);
}

std::vector<Index> CoarseGrid::fine_cells(Index e) const {
  const auto [I, J] = element_ij(e);
  std::vector<Index> cells;
  cells.reserve(std::size_t(rx_) * ry_);
  for (int j = J * ry_; j < (J + 1) * ry_; ++j)
    for (int i = I * rx_; i < (I + 1) * rx_; ++i) cells.push_back(Index(j) * fine_nx_ + i);
  return cells;
}

std::vector<Index> CoarseGrid::fine_nodes(Index e) const {
  const auto [I, J] = element_ij(e);
  std::vector<Index> nodes;
  nodes.reserve(std::size_t(local_node_count()));
  for (int j = J * ry_; j <= (J + 1) * ry_; ++j)
    for (int i = I * rx_; i <= (I + 1) * rx_; ++i) nodes.push_back(Index(j) * (fine_nx_ + 1) + i);
  return nodes;
}

GridPair build_grids(const DomainSpec& domain, int nx, int ny, int Nx, int Ny) {
  FineGrid fine(domain, nx, ny);
  CoarseGrid coarse(fine, Nx, Ny);
  return GridPair{std::move(fine), coarse};
}

BoundaryPartition::BoundaryPartition(const FineGrid& grid, std::vector<BoundaryKind> edge_kind,
                                     std::vector<double> edge_q)
    : edge_kind_(std::move(edge_kind)), edge_q_(std::move(edge_q)) {
  const auto edges = grid.boundary_edges();
  CEMFLOW_REQUIRE(edge_kind_.size() == edges.size() && edge_q_.size() == edges.size(),
                  InvalidArgument, "boundary partition: one tag per boundary edge required");
  dirichlet_node_.assign(std::size_t(grid.num_nodes()), 0);
  neumann_node_.assign(std::size_t(grid.num_nodes()), 0);
  for (std::size_t k = 0; k < edges.size(); ++k) {
    if (edge_kind_[k] == BoundaryKind::dirichlet) {
      has_dirichlet_ = true;
      dirichlet_node_[std::size_t(edges[k].first)] = 1;
      dirichlet_node_[std::size_t(edges[k].second)] = 1;
    } else {
      has_neumann_ = true;
    }
  }
  for (std::size_t k = 0; k < edges.size(); ++k) {
    if (edge_kind_[k] != BoundaryKind::neumann_robin) continue;
    for (Index n : {edges[k].first, edges[k].second})
      if (!dirichlet_node_[std::size_t(n)]) neumann_node_[std::size_t(n)] = 1;
  }
}

std::vector<Index> BoundaryPartition::free_dofs() const {
  std::vector<Index> free;
  free.reserve(dirichlet_node_.size());
  for (std::size_t n = 0; n < dirichlet_node_.size(); ++n)
    if (!dirichlet_node_[n]) free.push_back(Index(n));
  return free;
}

namespace {

/// Tangential coordinate of a boundary node along its side.
double tangential(const FineGrid& grid, Side side, Index node) {
  const Eigen::Vector2d p = grid.node_point(node);
  return (side == Side::left || side == Side::right) ? p.y() : p.x();
}

bool aligned(const FineGrid& grid, Side side, double value) {
  const bool vertical = side == Side::left || side == Side::right;
  const double lo = vertical ? grid.domain().y_min : grid.domain().x_min;
  const double h = vertical ? grid.hy() : grid.hx();
  const int n = vertical ? grid.ny() : grid.nx();
  const double k = (value - lo) / h;
  return std::abs(k - std::round(k)) <= 1e-9 && std::round(k) >= 0 && std::round(k) <= n;
}

}  // namespace

BoundaryPartition classify_boundary(const FineGrid& grid, std::span<const BoundarySegment> segments) {
  const auto edges = grid.boundary_edges();
  std::vector<int> owner(edges.size(), -1);
  std::vector<std::string> issues;

  for (std::size_t s = 0; s < segments.size(); ++s) {
    const auto& seg = segments[s];
    if (!(seg.from < seg.to)) {
      issues.push_back("segment " + std::to_string(s) + ": empty interval");
      continue;
    }
    if (!aligned(grid, seg.side, seg.from) || !aligned(grid, seg.side, seg.to)) {
      issues.push_back("segment " + std::to_string(s) + " on side " + std::string(to_string(seg.side)) +
                       ": endpoints do not align with fine edges");
      continue;
    }
    const double tol = 1e-9 * std::max(grid.hx(), grid.hy());
    for (std::size_t k = 0; k < edges.size(); ++k) {
      if (edges[k].side != seg.side) continue;
      const double a = tangential(grid, seg.side, edges[k].first);
      const double b = tangential(grid, seg.side, edges[k].second);
      if (a >= seg.from - tol && b <= seg.to + tol) {
        if (owner[k] >= 0) {
          issues.push_back("segments " + std::to_string(owner[k]) + " and " + std::to_string(s) +
                           " overlap on side " + std::string(to_string(seg.side)));
        }
        owner[k] = int(s);
      }
    }
  }
  for (std::size_t k = 0; k < edges.size(); ++k) {
    if (owner[k] < 0) {
      issues.push_back("boundary edge " + std::to_string(k) + " on side " +
                       std::string(to_string(edges[k].side)) + " is not covered by any segment");
      break;
    }
  }
  if (!issues.empty()) {
    std::string msg = "classify_boundary:";
    for (const auto& i : issues) msg += " " + i + ";";
    throw InvalidArgument(msg);
  }

  std::vector<BoundaryKind> kinds(edges.size());
  std::vector<double> q(edges.size());
  for (std::size_t k = 0; k < edges.size(); ++k) {
    kinds[k] = segments[std::size_t(owner[k])].kind;
    q[k] = kinds[k] == BoundaryKind::neumann_robin ? segments[std::size_t(owner[k])].q : 0.0;
  }
  return BoundaryPartition(grid, std::move(kinds), std::move(q));
}

BoundaryPartition all_dirichlet(const FineGrid& grid) {
  const std::size_t n = grid.boundary_edges().size();
  return BoundaryPartition(grid, std::vector<BoundaryKind>(n, BoundaryKind::dirichlet),
                           std::vector<double>(n, 0.0));
}

namespace {

OversampleRegion make_region(const GridPair& grids, Index center, int layers, int x0, int x1, int y0,
                             int y1) {
  const auto& coarse = grids.coarse;
  OversampleRegion r;
  r.center = center;
  r.layers = layers;
  r.elem_x0 = x0;
  r.elem_x1 = x1;
  r.elem_y0 = y0;
  r.elem_y1 = y1;
  for (int J = y0; J <= y1; ++J)
    for (int I = x0; I <= x1; ++I) r.elements.push_back(coarse.element(I, J));
  const int rx = coarse.cells_x();
  const int ry = coarse.cells_y();
  for (int j = y0 * ry; j <= (y1 + 1) * ry; ++j)
    for (int i = x0 * rx; i <= (x1 + 1) * rx; ++i) r.nodes.push_back(grids.fine.node(i, j));
  return r;
}

}  // namespace

OversampleRegion oversample_region(const GridPair& grids, Index element, int layers) {
  const auto& coarse = grids.coarse;
  CEMFLOW_REQUIRE(element >= 0 && element < coarse.num_elements(), InvalidArgument,
                  "oversample_region: element index out of range");
  CEMFLOW_REQUIRE(layers >= 0, InvalidArgument, "oversample_region: layers must be >= 0");
  const auto [I, J] = coarse.element_ij(element);
  return make_region(grids, element, layers, std::max(0, I - layers),
                     std::min(coarse.nx() - 1, I + layers), std::max(0, J - layers),
                     std::min(coarse.ny() - 1, J + layers));
}

OversampleRegion whole_domain_region(const GridPair& grids) {
  const int big = std::max(grids.coarse.nx(), grids.coarse.ny());
  return make_region(grids, 0, big, 0, grids.coarse.nx() - 1, 0, grids.coarse.ny() - 1);
}

LocalDofMask local_dof_mask(const GridPair& grids, const OversampleRegion& region,
                            const BoundaryPartition& boundary) {
  const auto& fine = grids.fine;
  const int rx = grids.coarse.cells_x();
  const int ry = grids.coarse.cells_y();
  const int i0 = region.elem_x0 * rx;
  const int i1 = (region.elem_x1 + 1) * rx;
  const int j0 = region.elem_y0 * ry;
  const int j1 = (region.elem_y1 + 1) * ry;
  // A region side is an internal interface unless it lies on the domain boundary.
  const bool left_inner = i0 > 0;
  const bool right_inner = i1 < fine.nx();
  const bool bottom_inner = j0 > 0;
  const bool top_inner = j1 < fine.ny();

  LocalDofMask mask;
  mask.roles.reserve(region.nodes.size());
  for (Index n : region.nodes) {
    const auto [i, j] = fine.node_ij(n);
    const bool on_inner_side = (i == i0 && left_inner) || (i == i1 && right_inner) ||
                               (j == j0 && bottom_inner) || (j == j1 && top_inner);
    NodeRole role = NodeRole::interior;
    if (boundary.is_dirichlet_node(n))
      role = NodeRole::dirichlet;
    else if (on_inner_side)
      role = NodeRole::patch_boundary;
    else if (boundary.is_neumann_node(n))
      role = NodeRole::neumann;
    mask.roles.push_back(role);
    if (role == NodeRole::interior || role == NodeRole::neumann) mask.free.push_back(n);
  }
  std::sort(mask.free.begin(), mask.free.end());
  return mask;
}

}  // namespace cemflow
