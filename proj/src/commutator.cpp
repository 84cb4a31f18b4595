#include "mhdlab/commutator.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace mhdlab {

namespace {

double max_abs(const VecC& v) { return v.size() ? v.cwiseAbs().maxCoeff() : 0.0; }

struct NodeOperators {
  SparseMatrix lap;  // vector Laplacian on stacked nodes
  SparseMatrix l1, l2, m1, m2;
  SparseMatrix div;  // stacked nodes -> nodes
  SparseMatrix grad;  // nodes -> stacked nodes

  explicit NodeOperators(const Equilibrium& eq)
      : lap(vector_laplacian(eq.velocity.grid).matrix),
        l1(oseen_plus(eq.velocity).matrix),
        l2(oseen_plus(eq.magnetic).matrix),
        m1(oseen_minus(eq.velocity).matrix),
        m2(oseen_minus(eq.magnetic).matrix) {
    const Grid& g = eq.velocity.grid;
    const int n = g.size();
    std::vector<Eigen::Triplet<double>> d;
    std::vector<Eigen::Triplet<double>> gr;
    for (int k = 0; k < n; ++k) {
      for (SparseMatrix::InnerIterator it(g.ops().dx, k); it; ++it) {
        d.emplace_back(it.row(), it.col(), it.value());
        gr.emplace_back(it.row(), it.col(), it.value());
      }
      for (SparseMatrix::InnerIterator it(g.ops().dy, k); it; ++it) {
        d.emplace_back(it.row(), n + it.col(), it.value());
        gr.emplace_back(n + it.row(), it.col(), it.value());
      }
    }
    div.resize(n, 2 * n);
    div.setFromTriplets(d.begin(), d.end());
    grad.resize(2 * n, n);
    grad.setFromTriplets(gr.begin(), gr.end());
  }
};

VecC times(const VecD& chi, const VecC& v) {
  const Eigen::Index n = chi.size();
  VecC out(v.size());
  for (Eigen::Index b = 0; b < v.size() / n; ++b) {
    out.segment(b * n, n) = v.segment(b * n, n).cwiseProduct(chi.cast<Complex>());
  }
  return out;
}

// Tracks the largest term seen while evaluating operator orderings.
struct Scale {
  double value = 0.0;
  const VecC& operator()(const VecC& v) {
    value = std::max(value, max_abs(v));
    return v;
  }
};

}  // namespace

CommutatorForcing build_commutators(const CutoffField& chi, const ComplexStateVector& s,
                                    const ComplexScalarField& p, const Equilibrium& eq) {
  const Grid& g = chi.values.grid;
  require_same_grid(g, s.phi.grid);
  require_same_grid(g, p.grid);
  require_same_grid(g, eq.velocity.grid);
  const NodeOperators ops(eq);
  const VecD& c = chi.values.values;
  const VecC phi = s.phi.stacked();
  const VecC xi = s.xi.stacked();
  const VecC cphi = times(c, phi);
  const VecC cxi = times(c, xi);
  const VecC cp = times(c, p.values);
  Scale sc;

  // a then b: the commutator value a - b, both orderings tracked for scale.
  auto diff = [&](const VecC& a, const VecC& b) -> VecC {
    sc(a);
    sc(b);
    return a - b;
  };
  const VecC f = eq.nu * diff(times(c, ops.lap * phi), ops.lap * cphi) +
                 diff(ops.l1 * cphi, times(c, ops.l1 * phi)) -
                 diff(ops.l2 * cxi, times(c, ops.l2 * xi)) +
                 diff(ops.grad * cp, times(c, ops.grad * p.values));
  const VecC gv = eq.eta * diff(times(c, ops.lap * xi), ops.lap * cxi) +
                  diff(ops.m1 * cxi, times(c, ops.m1 * xi)) -
                  diff(ops.m2 * cphi, times(c, ops.m2 * phi));
  const SparseMatrix& slap = g.ops().lap;
  const VecC t = diff(slap * cp, times(c, slap * p.values)) +
                 diff(ops.div * (ops.l1 * cphi), times(c, ops.div * (ops.l1 * phi))) -
                 diff(ops.div * (ops.l2 * cxi), times(c, ops.div * (ops.l2 * xi)));

  CommutatorForcing out{ComplexVectorField2::from_stacked(g, f, BcTag::velocity_dirichlet),
                        ComplexVectorField2::from_stacked(g, gv, BcTag::magnetic_tangential),
                        ComplexScalarField(g, t)};
  out.scale = sc.value;
  return out;
}

double commutator_leakage(const CommutatorForcing& forcing, const RegionSet& regions) {
  double worst = 0.0;
  auto scan = [&](const NodeSet& nodes) {
    for (int idx : nodes) {
      worst = std::max({worst, std::abs(forcing.f.u1[idx]), std::abs(forcing.f.u2[idx]),
                        std::abs(forcing.g.u1[idx]), std::abs(forcing.g.u2[idx]),
                        std::abs(forcing.t.values[idx])});
    }
  };
  scan(regions.omega);
  scan(regions.omega1);
  scan(regions.omega0);
  return worst;
}

CommutatorForcing build_commutators(const RegionSet& regions, const CutoffField& chi,
                                    const ComplexStateVector& s, const ComplexScalarField& p,
                                    const Equilibrium& eq, double tolerance) {
  require_same_grid(regions.grid, chi.values.grid);
  CommutatorForcing out = build_commutators(chi, s, p, eq);
  out.leakage = commutator_leakage(out, regions);
  if (out.leakage > tolerance * out.scale) {
    std::ostringstream os;
    os << "commutator forcing leaks outside omega_star: " << out.leakage << " against scale "
       << out.scale << " (cutoff layer too thin for the stencil reach)";
    fail(ErrorKind::commutator, os.str());
  }
  return out;
}

ChiSystemResidual assemble_chi_system_residual(const EigenSolution& sol, const CutoffField& chi,
                                               const Equilibrium& eq) {
  const Grid& g = chi.values.grid;
  require_same_grid(g, sol.state.phi.grid);
  const NodeOperators ops(eq);
  const VecD& c = chi.values.values;
  const VecC phi = sol.state.phi.stacked();
  const VecC xi = sol.state.xi.stacked();
  const VecC& p = sol.pressure.values;
  const VecC ephi = sol.extra_force.phi.stacked();
  const VecC exi = sol.extra_force.xi.stacked();
  const CommutatorForcing forcing = build_commutators(chi, sol.state, sol.pressure, eq);

  Scale sc;
  auto momentum = [&](const VecC& v, const VecC& w, const VecC& q) {
    return VecC(-eq.nu * sc(ops.lap * v) + sc(ops.l1 * v) - sc(ops.l2 * w) + sc(ops.grad * q) -
                sol.mu * v);
  };
  auto induction = [&](const VecC& v, const VecC& w) {
    return VecC(-eq.eta * sc(ops.lap * w) + sc(ops.m1 * w) - sc(ops.m2 * v) - sol.mu * w);
  };
  const VecC cphi = times(c, phi);
  const VecC cxi = times(c, xi);
  const VecC chi_m = momentum(cphi, cxi, times(c, p)) - forcing.f.stacked() + times(c, ephi);
  const VecC chi_i = induction(cphi, cxi) - forcing.g.stacked() + times(c, exi);
  const VecC bare_m = momentum(phi, xi, p) + ephi;
  const VecC bare_i = induction(phi, xi) + exi;
  const VecC gap_m = chi_m - times(c, bare_m);
  const VecC gap_i = chi_i - times(c, bare_i);

  ChiSystemResidual r;
  const int n = g.size();
  for (int idx : g.interior_nodes()) {
    for (int b = 0; b < 2; ++b) {
      const int k = b * n + idx;
      r.momentum = std::max(r.momentum, std::abs(chi_m[k]));
      r.induction = std::max(r.induction, std::abs(chi_i[k]));
      r.bare_momentum = std::max(r.bare_momentum, std::abs(bare_m[k]));
      r.bare_induction = std::max(r.bare_induction, std::abs(bare_i[k]));
      r.identity_gap = std::max({r.identity_gap, std::abs(gap_m[k]), std::abs(gap_i[k])});
    }
  }
  r.scale = std::max(sc.value, forcing.scale);
  return r;
}

}  // namespace mhdlab
