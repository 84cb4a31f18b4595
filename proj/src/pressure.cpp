#include "mhdlab/pressure.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include <Eigen/QR>

#include "mhdlab/sparse_lu.hpp"

namespace mhdlab {

namespace {

using Triplets = std::vector<Eigen::Triplet<double>>;

double max_abs(const VecC& v) { return v.size() ? v.cwiseAbs().maxCoeff() : 0.0; }

VecC stacked_divergence(const Grid& g, const VecC& v) {
  const int n = g.size();
  return g.ops().dx * v.head(n) + g.ops().dy * v.tail(n);
}

// Zero-mean solution of the Poisson problem described above, bordered by a
// gauge row and one free constant.
PressureSolution solve_pressure(const Grid& g, const VecC& rhs, const VecC& neumann_x,
                                const VecC& neumann_y) {
  const int n = g.size();
  PressureSolution out{ComplexScalarField(g)};
  const double scale = std::max(max_abs(rhs), std::max(max_abs(neumann_x), max_abs(neumann_y)));
  if (scale == 0.0) return out;

  const SparseMatrix& lap = g.ops().lap;
  Triplets t;
  VecC b = VecC::Zero(n + 1);
  std::vector<char> wall(static_cast<std::size_t>(n), 0);
  for (int idx : g.boundary_nodes()) wall[idx] = 1;
  for (int k = 0; k < lap.outerSize(); ++k) {
    for (SparseMatrix::InnerIterator it(lap, k); it; ++it) {
      if (!wall[it.row()]) t.emplace_back(it.row(), it.col(), it.value());
    }
  }
  for (int idx = 0; idx < n; ++idx) {
    if (!wall[idx]) {
      b[idx] = rhs[idx];
    } else if (g.on_wall_x(idx)) {
      b[idx] = neumann_x[idx];
    } else {
      b[idx] = neumann_y[idx];
    }
  }
  if (!g.boundary_nodes().empty()) {
    SparseMatrix dxt = g.ops().dx.transpose();
    SparseMatrix dyt = g.ops().dy.transpose();
    for (int idx : g.boundary_nodes()) {
      const SparseMatrix& src = g.on_wall_x(idx) ? dxt : dyt;
      for (SparseMatrix::InnerIterator it(src, idx); it; ++it) {
        t.emplace_back(idx, it.row(), it.value());
      }
    }
  }
  // The free constant enters the wall rows on walled grids and every row on
  // periodic grids; the last row fixes the mean.
  for (int idx = 0; idx < n; ++idx) {
    if (g.boundary_nodes().empty() || wall[idx]) t.emplace_back(idx, n, 1.0);
    t.emplace_back(n, idx, g.quad_weight(idx));
  }
  SparseMatrix a(n + 1, n + 1);
  a.setFromTriplets(t.begin(), t.end());
  const VecC sol = SparseLu(a).solve(b);
  out.p.values = sol.head(n);
  out.compatibility_defect = std::abs(sol[n]) / scale;

  const VecC r = lap * out.p.values - rhs;
  double worst = 0.0;
  for (int idx = 0; idx < n; ++idx) {
    if (!wall[idx]) worst = std::max(worst, std::abs(r[idx]));
  }
  const double rhs_scale = max_abs(rhs);
  out.residual = rhs_scale > 0.0 ? worst / rhs_scale : worst;
  if (!out.p.values.allFinite()) fail(ErrorKind::numerical, "pressure solve produced non-finite values");
  return out;
}

ComplexStateVector complexify(const StateVector& s) {
  return ComplexStateVector(
      ComplexVectorField2(s.phi.grid, s.phi.u1.cast<Complex>(), s.phi.u2.cast<Complex>(), s.phi.tag),
      ComplexVectorField2(s.xi.grid, s.xi.u1.cast<Complex>(), s.xi.u2.cast<Complex>(), s.xi.tag));
}

}  // namespace

PressureSolution pressure_from_state(const ComplexStateVector& s, const Equilibrium& eq) {
  const Grid& g = s.phi.grid;
  require_same_grid(g, eq.velocity.grid);
  const int n = g.size();
  const VecC phi = s.phi.stacked();
  const VecC xi = s.xi.stacked();
  const VecC l1 = oseen_plus(eq.velocity).matrix * phi;
  const VecC l2 = oseen_plus(eq.magnetic).matrix * xi;
  const VecC rhs = -stacked_divergence(g, l1) + stacked_divergence(g, l2);
  // Normal momentum balance at walls, where phi vanishes.
  const VecC h = eq.nu * (vector_laplacian(g).matrix * phi) - l1 + l2;
  return solve_pressure(g, rhs, h.head(n), h.tail(n));
}

PressureSolution pressure_from_state(const StateVector& s, const Equilibrium& eq) {
  return pressure_from_state(complexify(s), eq);
}

double oseen_divergence_gap(const VectorField2& y, const VectorField2& phi) {
  const Grid& g = y.grid;
  require_same_grid(g, phi.grid);
  const DiffOps& d = g.ops();
  const VecD lhs = [&] {
    const VecD l1 = oseen_plus(y).matrix * phi.stacked();
    const int n = g.size();
    return VecD(d.dx * l1.head(n) + d.dy * l1.tail(n));
  }();
  const VecD rhs = 2.0 * ((d.dx * y.u1).cwiseProduct(d.dx * phi.u1) +
                          (d.dx * y.u2).cwiseProduct(d.dy * phi.u1) +
                          (d.dy * y.u1).cwiseProduct(d.dx * phi.u2) +
                          (d.dy * y.u2).cwiseProduct(d.dy * phi.u2));
  double gap = 0.0;
  for (int idx : g.interior_nodes()) gap = std::max(gap, std::abs(lhs[idx] - rhs[idx]));
  return gap;
}

EigenSolution pde_eigen_residual(const LinearOperator& generator, const Equilibrium& eq,
                                 Complex lambda, const VecC& x) {
  if (!generator.projector || !generator.layout) {
    fail(ErrorKind::shape, "eigen residual needs an assembled generator");
  }
  const StateLayout& layout = *generator.layout;
  const Grid& g = layout.grid();
  require_same_grid(g, eq.velocity.grid);
  const int n = g.size();
  const int m2 = 2 * layout.block();

  EigenSolution sol{lambda, generator.shift - lambda, layout.to_state(x), ComplexScalarField(g),
                    ComplexStateVector(g)};
  const VecC phi = sol.state.phi.stacked();
  const VecC xi = sol.state.xi.stacked();
  const SparseMatrix lap = vector_laplacian(g).matrix;
  const VecC wphi = -eq.nu * (lap * phi) + oseen_plus(eq.velocity).matrix * phi -
                    oseen_plus(eq.magnetic).matrix * xi;
  const VecC wxi = -eq.eta * (lap * xi) + oseen_minus(eq.velocity).matrix * xi -
                   oseen_minus(eq.magnetic).matrix * phi;
  VecC w(layout.size());
  w.head(m2) = layout.velocity_map().restriction * wphi - sol.mu * x.head(m2);
  w.tail(m2) = layout.magnetic_map().restriction * wxi - sol.mu * x.tail(m2);

  const ConstraintProjector& proj = *generator.projector;
  const VecC q = proj.multipliers(w);
  const VecC force = -(proj.kept().transpose() * q);
  const VecC res = w + force;

  const double xnorm = x.norm();
  if (xnorm > 0.0) {
    sol.momentum_residual = res.head(m2).norm() / xnorm;
    sol.induction_residual = res.tail(m2).norm() / xnorm;
    sol.relative_residual = res.norm() / xnorm;
  }

  // Pressure from the velocity divergence rows: row r sits at interior node r.
  const auto& interior = g.interior_nodes();
  const int m = layout.block();
  VecC p = VecC::Zero(n);
  for (std::size_t k = 0; k < proj.kept_rows().size(); ++k) {
    const int r = proj.kept_rows()[k];
    if (r < m) p[interior[r]] = q[static_cast<Eigen::Index>(k)] / proj.kept_norms()[k];
  }
  // Remove the null modes of the discrete gradient (constant and sawtooth
  // modes), which the multipliers leave undetermined.
  const SparseMatrix div = divergence_constraint(g, BcTag::velocity_dirichlet);
  std::vector<VecD> modes;
  for (int kind = 0; kind < 4; ++kind) {
    VecD z = VecD::Zero(m);
    for (int r = 0; r < m; ++r) {
      const int i = g.ix(interior[r]);
      const int j = g.jy(interior[r]);
      const int sgn = (kind & 1 ? i : 0) + (kind & 2 ? j : 0);
      z[r] = sgn % 2 == 0 ? 1.0 : -1.0;
    }
    if ((div.transpose() * z).cwiseAbs().maxCoeff() <= 1e-10 * z.norm() * (1.0 / g.hx() + 1.0 / g.hy())) {
      modes.push_back(z);
    }
  }
  if (!modes.empty()) {
    Eigen::MatrixXd zm(m, static_cast<Eigen::Index>(modes.size()));
    for (std::size_t k = 0; k < modes.size(); ++k) zm.col(static_cast<Eigen::Index>(k)) = modes[k];
    VecC pin(m);
    for (int r = 0; r < m; ++r) pin[r] = p[interior[r]];
    const Eigen::HouseholderQR<Eigen::MatrixXd> qr(zm);
    const Eigen::MatrixXd qz = qr.householderQ() * Eigen::MatrixXd::Identity(m, zm.cols());
    pin -= qz.cast<Complex>() * (qz.transpose().cast<Complex>() * pin);
    for (int r = 0; r < m; ++r) p[interior[r]] = pin[r];
  }
  // Wall values by linear extrapolation along the normal.
  for (int idx : g.boundary_nodes()) {
    const int i = g.ix(idx);
    const int j = g.jy(idx);
    int di = 0;
    int dj = 0;
    if (g.on_wall_x(idx)) di = i == 0 ? 1 : -1;
    else dj = j == 0 ? 1 : -1;
    p[idx] = 2.0 * p[g.index(i + di, j + dj)] - p[g.index(i + 2 * di, j + 2 * dj)];
  }
  sol.pressure.values = p;

  const VecC fphi = layout.velocity_map().extend * force.head(m2);
  const VecC fxi = layout.magnetic_map().extend * force.tail(m2);
  const VecC gp = [&] {
    VecC s(2 * n);
    s.head(n) = g.ops().dx * p;
    s.tail(n) = g.ops().dy * p;
    return s;
  }();
  sol.extra_force = ComplexStateVector(
      ComplexVectorField2::from_stacked(g, fphi - gp, BcTag::velocity_dirichlet),
      ComplexVectorField2::from_stacked(g, fxi, BcTag::magnetic_tangential));
  return sol;
}

}  // namespace mhdlab
