#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "mhdlab/operators.hpp"

namespace mhdlab {

EquilibriumKind parse_equilibrium_kind(const std::string& name) {
  if (name == "zero") return EquilibriumKind::zero;
  if (name == "shear") return EquilibriumKind::shear;
  if (name == "taylor_vortex") return EquilibriumKind::taylor_vortex;
  if (name == "custom") return EquilibriumKind::custom;
  fail(ErrorKind::config, "unknown equilibrium kind '" + name + "'");
}

const char* to_string(EquilibriumKind kind) {
  switch (kind) {
    case EquilibriumKind::zero: return "zero";
    case EquilibriumKind::shear: return "shear";
    case EquilibriumKind::taylor_vortex: return "taylor_vortex";
    case EquilibriumKind::custom: return "custom";
  }
  return "unknown";
}

namespace {

using std::numbers::pi;

// Wavenumber of mode m fitting the direction: full periods when periodic,
// half periods between walls.
double wavenumber(int m, double length, bool wall) {
  return (wall ? pi : 2.0 * pi) * m / length;
}

VectorField2 shear_profile(const Grid& g, double amp, int mode, BcTag tag) {
  const double k = wavenumber(mode, g.ly(), g.wall_y());
  // Between y-walls the velocity uses sin (no slip) and the field uses cos
  // (zero curl); the periodic case uses sin for both.
  const bool use_cos = tag == BcTag::magnetic_tangential && g.wall_y();
  const ScalarField u =
      sample(g, [&](double, double y) { return amp * (use_cos ? std::cos(k * y) : std::sin(k * y)); });
  return VectorField2(g, u.values, VecD::Zero(g.size()), tag);
}

VectorField2 vortex_profile(const Grid& g, double amp, int mode, BcTag tag) {
  const double a = wavenumber(mode, g.lx(), g.wall_x());
  const double b = wavenumber(mode, g.ly(), g.wall_y());
  const ScalarField u =
      sample(g, [&](double x, double y) { return amp * std::sin(a * x) * std::cos(b * y); });
  const ScalarField v = sample(
      g, [&](double x, double y) { return -amp * (a / b) * std::cos(a * x) * std::sin(b * y); });
  return VectorField2(g, u.values, v.values, tag);
}

VectorField2 stream_profile(const Grid& g, const std::vector<StreamMode>& modes, BcTag tag) {
  // v = (d/dy psi, -d/dx psi) for psi = sum a sin(kx x + ky y + phase).
  const ScalarField u = sample(g, [&](double x, double y) {
    double s = 0.0;
    for (const auto& m : modes) s += m.amplitude * m.ky * std::cos(m.kx * x + m.ky * y + m.phase);
    return s;
  });
  const ScalarField v = sample(g, [&](double x, double y) {
    double s = 0.0;
    for (const auto& m : modes) s -= m.amplitude * m.kx * std::cos(m.kx * x + m.ky * y + m.phase);
    return s;
  });
  return VectorField2(g, u.values, v.values, tag);
}

double max_abs(const VectorField2& v) {
  if (v.u1.size() == 0) return 0.0;
  return std::max(v.u1.cwiseAbs().maxCoeff(), v.u2.cwiseAbs().maxCoeff());
}

VectorField2 settle(const VectorField2& sampled, BcTag tag, double& change) {
  const double scale = std::max(1.0, max_abs(sampled));
  const double violation = boundary_violation(sampled, tag);
  if (violation > 1e-8 * scale) {
    std::ostringstream os;
    os << "equilibrium violates its " << to_string(tag) << " boundary condition by "
       << violation;
    fail(ErrorKind::equilibrium, os.str());
  }
  const VectorField2 projected = HelmholtzProjector(sampled.grid, tag).project(sampled);
  change = std::max(change, (projected.stacked() - sampled.stacked()).cwiseAbs().maxCoeff());
  if (boundary_violation(projected, tag) > 1e-8 * scale) {
    fail(ErrorKind::equilibrium, "projection destroyed boundary compliance");
  }
  return projected;
}

VecD frobenius_gradient(const VectorField2& v) {
  const DiffOps& d = v.grid.ops();
  const VecD a = d.dx * v.u1;
  const VecD b = d.dy * v.u1;
  const VecD c = d.dx * v.u2;
  const VecD e = d.dy * v.u2;
  return (a.array().square() + b.array().square() + c.array().square() + e.array().square())
      .sqrt()
      .matrix();
}

}  // namespace

Equilibrium make_equilibrium(EquilibriumKind kind, const Grid& grid,
                             const EquilibriumParams& params, double nu, double eta) {
  if (!(nu > 0.0) || !(eta > 0.0)) fail(ErrorKind::config, "nu and eta must be positive");
  if (params.mode < 1) fail(ErrorKind::config, "equilibrium mode must be >= 1");
  const BcTag vt = BcTag::velocity_dirichlet;
  const BcTag mt = BcTag::magnetic_tangential;
  VectorField2 y(grid, vt);
  VectorField2 b(grid, mt);
  switch (kind) {
    case EquilibriumKind::zero: break;
    case EquilibriumKind::shear:
      y = shear_profile(grid, params.velocity_amplitude, params.mode, vt);
      b = shear_profile(grid, params.magnetic_amplitude, params.mode, mt);
      break;
    case EquilibriumKind::taylor_vortex:
      y = vortex_profile(grid, params.velocity_amplitude, params.mode, vt);
      b = vortex_profile(grid, params.magnetic_amplitude, params.mode, mt);
      break;
    case EquilibriumKind::custom:
      y = stream_profile(grid, params.velocity_modes, vt);
      b = stream_profile(grid, params.magnetic_modes, mt);
      break;
  }

  Equilibrium eq{y, b, nu, eta, VectorField2(grid, vt), VectorField2(grid, mt)};
  if (kind != EquilibriumKind::zero) {
    eq.velocity = settle(y, vt, eq.projection_change);
    eq.magnetic = settle(b, mt, eq.projection_change);
  }
  const VecD ys = eq.velocity.stacked();
  const VecD bs = eq.magnetic.stacked();
  const SparseMatrix lap = vector_laplacian(grid).matrix;
  const DiffOps& d = grid.ops();
  auto advect = [&](const VectorField2& e, const VecD& v) {
    const int n = grid.size();
    VecD out(2 * n);
    out.head(n) = e.u1.cwiseProduct(d.dx * v.head(n)) + e.u2.cwiseProduct(d.dy * v.head(n));
    out.tail(n) = e.u1.cwiseProduct(d.dx * v.tail(n)) + e.u2.cwiseProduct(d.dy * v.tail(n));
    return out;
  };
  const VecD f = -nu * (lap * ys) + advect(eq.velocity, ys) - advect(eq.magnetic, bs);
  const VecD g = -eta * (lap * bs) + advect(eq.velocity, bs) - advect(eq.magnetic, ys);
  eq.f = VectorField2::from_stacked(grid, f, vt);
  eq.g = VectorField2::from_stacked(grid, g, mt);
  eq.grad_bound =
      (frobenius_gradient(eq.velocity) + frobenius_gradient(eq.magnetic)).maxCoeff();
  if (!std::isfinite(eq.grad_bound)) fail(ErrorKind::equilibrium, "non-finite equilibrium");
  return eq;
}

}  // namespace mhdlab
