#pragma once

#include <memory>
#include <vector>

#include <Eigen/SparseCore>

namespace mhdlab {

using SparseMatrix = Eigen::SparseMatrix<double>;

enum class BoundaryKind { periodic, wall };

struct GridSpec {
  double lx = 6.283185307179586;
  double ly = 6.283185307179586;
  int nx = 32;
  int ny = 32;
  BoundaryKind bc_x = BoundaryKind::periodic;
  BoundaryKind bc_y = BoundaryKind::periodic;
  /// Accuracy order of the finite-difference stencils (2 or 4).
  int stencil_order = 4;

  bool operator==(const GridSpec&) const = default;
};

/// Finite-difference matrices acting on node vectors of a grid.
struct DiffOps {
  SparseMatrix dx, dy, dxx, dyy, lap;
};

/// Node-based rectangular grid on [0,lx] x [0,ly].
///
/// Periodic directions carry n nodes at i*h; wall directions carry n+1 nodes
/// including the two boundary nodes. Node index is i + points_x()*j.
class Grid {
 public:
  explicit Grid(const GridSpec& spec);

  const GridSpec& spec() const { return spec_; }
  int nx() const { return spec_.nx; }
  int ny() const { return spec_.ny; }
  double lx() const { return spec_.lx; }
  double ly() const { return spec_.ly; }
  double hx() const { return spec_.lx / spec_.nx; }
  double hy() const { return spec_.ly / spec_.ny; }
  int order() const { return spec_.stencil_order; }
  bool wall_x() const { return spec_.bc_x == BoundaryKind::wall; }
  bool wall_y() const { return spec_.bc_y == BoundaryKind::wall; }
  bool fully_periodic() const { return !wall_x() && !wall_y(); }

  int points_x() const { return wall_x() ? spec_.nx + 1 : spec_.nx; }
  int points_y() const { return wall_y() ? spec_.ny + 1 : spec_.ny; }
  int size() const { return points_x() * points_y(); }
  int index(int i, int j) const { return i + points_x() * j; }
  int ix(int idx) const { return idx % points_x(); }
  int jy(int idx) const { return idx / points_x(); }
  double x(int i) const { return i * hx(); }
  double y(int j) const { return j * hy(); }

  bool on_wall_x(int idx) const;
  bool on_wall_y(int idx) const;
  bool on_boundary(int idx) const { return on_wall_x(idx) || on_wall_y(idx); }

  /// Nodes lying on the walls (empty for a fully periodic grid).
  const std::vector<int>& boundary_nodes() const { return shared_->boundary; }
  /// Nodes not on any wall; these carry the state unknowns.
  const std::vector<int>& interior_nodes() const { return shared_->interior; }
  /// Position of a node within interior_nodes(), or -1 for boundary nodes.
  int interior_position(int idx) const { return shared_->interior_pos[idx]; }

  /// Trapezoidal quadrature weight of a node.
  double quad_weight(int idx) const;

  const DiffOps& ops() const { return shared_->ops; }

  bool operator==(const Grid& other) const { return spec_ == other.spec_; }

 private:
  struct Shared {
    DiffOps ops;
    std::vector<int> boundary;
    std::vector<int> interior;
    std::vector<int> interior_pos;
  };
  GridSpec spec_;
  std::shared_ptr<const Shared> shared_;
};

/// Validates the grid parameters and constructs the grid.
Grid build_grid(const GridSpec& spec);

/// 1-D difference matrices on n periodic nodes or n+1 wall nodes.
SparseMatrix first_derivative_1d(int n, double h, BoundaryKind kind, int order);
SparseMatrix second_derivative_1d(int n, double h, BoundaryKind kind, int order);

}  // namespace mhdlab
