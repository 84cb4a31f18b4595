#include "mhdlab/grid.hpp"

#include <array>
#include <cmath>
#include <span>
#include <string>

#include "mhdlab/error.hpp"

namespace mhdlab {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::config: return "config";
    case ErrorKind::geometry: return "geometry";
    case ErrorKind::resolution: return "resolution";
    case ErrorKind::weight: return "weight";
    case ErrorKind::shape: return "shape";
    case ErrorKind::numerical: return "numerical";
    case ErrorKind::equilibrium: return "equilibrium";
    case ErrorKind::commutator: return "commutator";
    case ErrorKind::empty_input: return "empty_input";
    case ErrorKind::actuator: return "actuator";
    case ErrorKind::uncontrollable: return "uncontrollable";
    case ErrorKind::projection: return "projection";
    case ErrorKind::instability: return "instability";
    case ErrorKind::precondition: return "precondition";
    case ErrorKind::fit: return "fit";
  }
  return "unknown";
}

namespace {

using Triplets = std::vector<Eigen::Triplet<double>>;

void add_row(Triplets& t, int row, int first_col, std::span<const double> coeffs,
             double scale) {
  for (std::size_t k = 0; k < coeffs.size(); ++k) {
    t.emplace_back(row, first_col + static_cast<int>(k), coeffs[k] * scale);
  }
}

// Mirrored closure at the far wall: reversed columns, optional sign flip.
void add_row_mirrored(Triplets& t, int row, int last_col,
                      std::span<const double> coeffs, double scale) {
  for (std::size_t k = 0; k < coeffs.size(); ++k) {
    t.emplace_back(row, last_col - static_cast<int>(k), coeffs[k] * scale);
  }
}

void add_centered(Triplets& t, int row, int n, bool periodic,
                  std::span<const double> coeffs, double scale) {
  const int half = static_cast<int>(coeffs.size()) / 2;
  for (int k = -half; k <= half; ++k) {
    const double c = coeffs[k + half];
    if (c == 0.0) continue;
    int col = row + k;
    if (periodic) col = ((col % n) + n) % n;
    t.emplace_back(row, col, c * scale);
  }
}

SparseMatrix finish(int n, Triplets& t) {
  SparseMatrix m(n, n);
  m.setFromTriplets(t.begin(), t.end());
  m.makeCompressed();
  return m;
}

SparseMatrix kron_identity_left(int ny, const SparseMatrix& a) {
  // I_ny (x) a, node index i + nx*j.
  const int nx = static_cast<int>(a.rows());
  Triplets t;
  t.reserve(static_cast<std::size_t>(a.nonZeros()) * ny);
  for (int j = 0; j < ny; ++j) {
    for (int k = 0; k < a.outerSize(); ++k) {
      for (SparseMatrix::InnerIterator it(a, k); it; ++it) {
        t.emplace_back(it.row() + nx * j, it.col() + nx * j, it.value());
      }
    }
  }
  return finish(nx * ny, t);
}

SparseMatrix kron_identity_right(const SparseMatrix& a, int nx) {
  // a (x) I_nx.
  const int ny = static_cast<int>(a.rows());
  Triplets t;
  t.reserve(static_cast<std::size_t>(a.nonZeros()) * nx);
  for (int k = 0; k < a.outerSize(); ++k) {
    for (SparseMatrix::InnerIterator it(a, k); it; ++it) {
      for (int i = 0; i < nx; ++i) {
        t.emplace_back(i + nx * it.row(), i + nx * it.col(), it.value());
      }
    }
  }
  return finish(nx * ny, t);
}

void check_order(int order) {
  if (order != 2 && order != 4) {
    fail(ErrorKind::config, "stencil order must be 2 or 4, got " + std::to_string(order));
  }
}

}  // namespace

SparseMatrix first_derivative_1d(int n, double h, BoundaryKind kind, int order) {
  check_order(order);
  static constexpr std::array<double, 3> c2{-0.5, 0.0, 0.5};
  static constexpr std::array<double, 5> c4{1.0 / 12, -8.0 / 12, 0.0, 8.0 / 12, -1.0 / 12};
  Triplets t;
  const double s = 1.0 / h;
  if (kind == BoundaryKind::periodic) {
    for (int i = 0; i < n; ++i) {
      if (order == 2) add_centered(t, i, n, true, c2, s);
      else add_centered(t, i, n, true, c4, s);
    }
    return finish(n, t);
  }
  const int np = n + 1;
  if (order == 2) {
    static constexpr std::array<double, 3> b0{-1.5, 2.0, -0.5};
    add_row(t, 0, 0, b0, s);
    for (int i = 1; i < n; ++i) add_centered(t, i, np, false, c2, s);
    add_row_mirrored(t, n, n, b0, -s);
  } else {
    static constexpr std::array<double, 5> b0{-25.0 / 12, 48.0 / 12, -36.0 / 12, 16.0 / 12,
                                              -3.0 / 12};
    static constexpr std::array<double, 5> b1{-3.0 / 12, -10.0 / 12, 18.0 / 12, -6.0 / 12,
                                              1.0 / 12};
    add_row(t, 0, 0, b0, s);
    add_row(t, 1, 0, b1, s);
    for (int i = 2; i < n - 1; ++i) add_centered(t, i, np, false, c4, s);
    add_row_mirrored(t, n - 1, n, b1, -s);
    add_row_mirrored(t, n, n, b0, -s);
  }
  return finish(np, t);
}

SparseMatrix second_derivative_1d(int n, double h, BoundaryKind kind, int order) {
  check_order(order);
  static constexpr std::array<double, 3> c2{1.0, -2.0, 1.0};
  static constexpr std::array<double, 5> c4{-1.0 / 12, 16.0 / 12, -30.0 / 12, 16.0 / 12,
                                            -1.0 / 12};
  Triplets t;
  const double s = 1.0 / (h * h);
  if (kind == BoundaryKind::periodic) {
    for (int i = 0; i < n; ++i) {
      if (order == 2) add_centered(t, i, n, true, c2, s);
      else add_centered(t, i, n, true, c4, s);
    }
    return finish(n, t);
  }
  const int np = n + 1;
  if (order == 2) {
    static constexpr std::array<double, 4> b0{2.0, -5.0, 4.0, -1.0};
    add_row(t, 0, 0, b0, s);
    for (int i = 1; i < n; ++i) add_centered(t, i, np, false, c2, s);
    add_row_mirrored(t, n, n, b0, s);
  } else {
    static constexpr std::array<double, 6> b0{45.0 / 12,  -154.0 / 12, 214.0 / 12,
                                              -156.0 / 12, 61.0 / 12,  -10.0 / 12};
    static constexpr std::array<double, 6> b1{10.0 / 12, -15.0 / 12, -4.0 / 12,
                                              14.0 / 12, -6.0 / 12,  1.0 / 12};
    add_row(t, 0, 0, b0, s);
    add_row(t, 1, 0, b1, s);
    for (int i = 2; i < n - 1; ++i) add_centered(t, i, np, false, c4, s);
    add_row_mirrored(t, n - 1, n, b1, s);
    add_row_mirrored(t, n, n, b0, s);
  }
  return finish(np, t);
}

Grid::Grid(const GridSpec& spec) : spec_(spec) {
  if (!(spec.lx > 0.0) || !(spec.ly > 0.0) || !std::isfinite(spec.lx) ||
      !std::isfinite(spec.ly)) {
    fail(ErrorKind::config, "grid extents must be positive and finite");
  }
  if (spec.nx < 8 || spec.ny < 8) {
    fail(ErrorKind::config, "grid cell counts must be at least 8");
  }
  check_order(spec.stencil_order);

  auto shared = std::make_shared<Shared>();
  const int px = points_x();
  const int py = points_y();
  const SparseMatrix d1x = first_derivative_1d(nx(), hx(), spec.bc_x, order());
  const SparseMatrix d1y = first_derivative_1d(ny(), hy(), spec.bc_y, order());
  const SparseMatrix d2x = second_derivative_1d(nx(), hx(), spec.bc_x, order());
  const SparseMatrix d2y = second_derivative_1d(ny(), hy(), spec.bc_y, order());
  shared->ops.dx = kron_identity_left(py, d1x);
  shared->ops.dxx = kron_identity_left(py, d2x);
  shared->ops.dy = kron_identity_right(d1y, px);
  shared->ops.dyy = kron_identity_right(d2y, px);
  shared->ops.lap = shared->ops.dxx + shared->ops.dyy;

  shared->interior_pos.assign(static_cast<std::size_t>(size()), -1);
  for (int idx = 0; idx < size(); ++idx) {
    if (on_boundary(idx)) {
      shared->boundary.push_back(idx);
    } else {
      shared->interior_pos[idx] = static_cast<int>(shared->interior.size());
      shared->interior.push_back(idx);
    }
  }
  shared_ = std::move(shared);
}

bool Grid::on_wall_x(int idx) const {
  if (!wall_x()) return false;
  const int i = ix(idx);
  return i == 0 || i == spec_.nx;
}

bool Grid::on_wall_y(int idx) const {
  if (!wall_y()) return false;
  const int j = jy(idx);
  return j == 0 || j == spec_.ny;
}

double Grid::quad_weight(int idx) const {
  double w = hx() * hy();
  if (on_wall_x(idx)) w *= 0.5;
  if (on_wall_y(idx)) w *= 0.5;
  return w;
}

Grid build_grid(const GridSpec& spec) { return Grid(spec); }

}  // namespace mhdlab
