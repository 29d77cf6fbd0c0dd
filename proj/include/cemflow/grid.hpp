#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "cemflow/types.hpp"

namespace cemflow {

struct DomainSpec {
  double x_min = 0.0;
  double x_max = 1.0;
  double y_min = 0.0;
  double y_max = 1.0;

  void validate() const;
};

enum class Side : std::uint8_t { left, right, bottom, top };

std::string_view to_string(Side side);
Side side_from_string(std::string_view name);
Eigen::Vector2d outward_normal(Side side);

/// One fine edge on the domain boundary. `first`/`second` are ordered by
/// increasing coordinate along the side.
struct BoundaryEdge {
  Index first;
  Index second;
  Index cell;
  Side side;
  Eigen::Vector2d normal;
};

/// Structured fine mesh of nx*ny rectangular Q1 cells. Nodes are numbered
/// row-major: node(i, j) = j * (nx + 1) + i, with j = 0 on the bottom side.
class FineGrid {
 public:
  FineGrid(const DomainSpec& domain, int nx, int ny);

  const DomainSpec& domain() const noexcept { return domain_; }
  int nx() const noexcept { return nx_; }
  int ny() const noexcept { return ny_; }
  double hx() const noexcept { return hx_; }
  double hy() const noexcept { return hy_; }
  Index num_nodes() const noexcept { return Index(nx_ + 1) * (ny_ + 1); }
  Index num_cells() const noexcept { return Index(nx_) * ny_; }

  Index node(int i, int j) const noexcept { return Index(j) * (nx_ + 1) + i; }
  std::pair<int, int> node_ij(Index n) const noexcept {
    return {int(n % (nx_ + 1)), int(n / (nx_ + 1))};
  }
  Index cell(int i, int j) const noexcept { return Index(j) * nx_ + i; }
  std::pair<int, int> cell_ij(Index c) const noexcept { return {int(c % nx_), int(c / nx_)}; }

  Eigen::Vector2d node_point(Index n) const;
  Eigen::Vector2d cell_origin(Index c) const;
  /// Counterclockwise from the lower-left corner.
  std::array<Index, 4> cell_nodes(Index c) const;

  std::span<const BoundaryEdge> boundary_edges() const noexcept { return boundary_edges_; }
  bool on_boundary(Index n) const;

 private:
  DomainSpec domain_;
  int nx_;
  int ny_;
  double hx_;
  double hy_;
  std::vector<BoundaryEdge> boundary_edges_;
};

/// Conforming coarse partition: every coarse element is a block of
/// cells_x() * cells_y() fine cells.
class CoarseGrid {
 public:
  CoarseGrid(const FineGrid& fine, int Nx, int Ny);

  int nx() const noexcept { return Nx_; }
  int ny() const noexcept { return Ny_; }
  int cells_x() const noexcept { return rx_; }
  int cells_y() const noexcept { return ry_; }
  double H() const noexcept { return H_; }
  Index num_elements() const noexcept { return Index(Nx_) * Ny_; }

  Index element(int I, int J) const noexcept { return Index(J) * Nx_ + I; }
  std::pair<int, int> element_ij(Index e) const noexcept { return {int(e % Nx_), int(e / Nx_)}; }
  Index element_of_cell(Index cell) const;

  /// Fine cells of the element, row-major.
  std::vector<Index> fine_cells(Index e) const;
  /// Fine nodes in the closure of the element, row-major. The position in
  /// this list is the element-local node number.
  std::vector<Index> fine_nodes(Index e) const;
  Index local_node_count() const noexcept { return Index(rx_ + 1) * (ry_ + 1); }

 private:
  int fine_nx_;
  int fine_ny_;
  int Nx_;
  int Ny_;
  int rx_;
  int ry_;
  double H_;
};

struct GridPair {
  FineGrid fine;
  CoarseGrid coarse;
};

GridPair build_grids(const DomainSpec& domain, int nx, int ny, int Nx, int Ny);

enum class BoundaryKind : std::uint8_t { dirichlet, neumann_robin };

/// A run of one side, [from, to] in the side's tangential coordinate.
struct BoundarySegment {
  Side side;
  double from;
  double to;
  BoundaryKind kind;
  double q = 0.0;  ///< flux value carried by Neumann/Robin segments
};

/// Tags every fine boundary edge as Dirichlet or Neumann/Robin.
class BoundaryPartition {
 public:
  BoundaryPartition(const FineGrid& grid, std::vector<BoundaryKind> edge_kind,
                    std::vector<double> edge_q);

  BoundaryKind edge_kind(Index edge) const { return edge_kind_[std::size_t(edge)]; }
  double edge_q(Index edge) const { return edge_q_[std::size_t(edge)]; }
  Index num_edges() const noexcept { return Index(edge_kind_.size()); }

  bool has_dirichlet() const noexcept { return has_dirichlet_; }
  bool has_neumann() const noexcept { return has_neumann_; }
  /// A node touching any Dirichlet edge is a Dirichlet node.
  bool is_dirichlet_node(Index n) const { return dirichlet_node_[std::size_t(n)] != 0; }
  bool is_neumann_node(Index n) const { return neumann_node_[std::size_t(n)] != 0; }

  /// Global free dofs of V (all nodes not on Gamma_D), ascending.
  std::vector<Index> free_dofs() const;

 private:
  std::vector<BoundaryKind> edge_kind_;
  std::vector<double> edge_q_;
  std::vector<std::uint8_t> dirichlet_node_;
  std::vector<std::uint8_t> neumann_node_;
  bool has_dirichlet_ = false;
  bool has_neumann_ = false;
};

BoundaryPartition classify_boundary(const FineGrid& grid, std::span<const BoundarySegment> segments);
BoundaryPartition all_dirichlet(const FineGrid& grid);

enum class NodeRole : std::uint8_t { interior, patch_boundary, dirichlet, neumann };

/// K_i^m: the center element grown by `layers` rings of coarse neighbours,
/// clipped to the domain. Always a rectangle of coarse elements.
struct OversampleRegion {
  Index center = 0;
  int layers = 0;
  int elem_x0 = 0;
  int elem_x1 = 0;
  int elem_y0 = 0;
  int elem_y1 = 0;
  std::vector<Index> elements;
  std::vector<Index> nodes;  ///< closure nodes, row-major

  bool covers(const CoarseGrid& coarse) const noexcept {
    return elem_x0 == 0 && elem_y0 == 0 && elem_x1 == coarse.nx() - 1 &&
           elem_y1 == coarse.ny() - 1;
  }
};

OversampleRegion oversample_region(const GridPair& grids, Index element, int layers);
/// The whole domain as a region (used for the m = infinity limit).
OversampleRegion whole_domain_region(const GridPair& grids);

struct LocalDofMask {
  std::vector<Index> free;       ///< global ids of the free dofs of V_i^m, ascending
  std::vector<NodeRole> roles;   ///< role per region node (same order as region.nodes)
};

LocalDofMask local_dof_mask(const GridPair& grids, const OversampleRegion& region,
                            const BoundaryPartition& boundary);

}  // namespace cemflow
