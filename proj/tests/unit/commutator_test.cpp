#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "mhdlab/commutator.hpp"

namespace mhdlab {
namespace {

constexpr double kPi = 3.141592653589793;

struct Fixture {
  Grid grid;
  Equilibrium eq;
  RegionSet regions;
  CutoffField chi;
};

// 64 x 64 periodic box with bands wide enough for the cutoff layers.
Fixture make_fixture() {
  const Grid g = build_grid(GridSpec{2 * kPi, 2 * kPi, 64, 64});
  EquilibriumParams p;
  p.velocity_amplitude = 0.5;
  p.magnetic_amplitude = 0.3;
  OmegaSpec os;
  os.omega1_width = 0.3;
  os.star_width = 1.3;
  RegionSet r = build_nested_regions(g, os, GeometryCase::interior_patch);
  CutoffField chi = build_cutoff(r);
  return Fixture{g, make_equilibrium(EquilibriumKind::taylor_vortex, g, p, 1.0, 1.0), std::move(r),
                 std::move(chi)};
}

ComplexStateVector random_state(const Grid& g, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 2 * kPi);
  auto stream = [&] {
    const double a = u(rng), b = u(rng);
    return sample(g, [=](double x, double y) { return std::sin(x + a) * std::cos(2 * y - b) + std::cos(3 * x - b); });
  };
  const ScalarField s1 = stream(), s2 = stream();
  const DiffOps& d = g.ops();
  return ComplexStateVector(
      ComplexVectorField2(g, (d.dy * s1.values).cast<Complex>(), (-(d.dx * s1.values)).cast<Complex>()),
      ComplexVectorField2(g, (d.dy * s2.values).cast<Complex>(), (-(d.dx * s2.values)).cast<Complex>(),
                          BcTag::magnetic_tangential));
}

GTEST_TEST(CommutatorTest, ConstantCutoffGivesZeroForcing) {
  const Fixture f = make_fixture();
  CutoffField one{sample(f.grid, [](double, double) { return 1.0; })};
  const ComplexStateVector s = random_state(f.grid, 1);
  const ComplexScalarField p = pressure_from_state(s, f.eq).p;
  const CommutatorForcing c = build_commutators(one, s, p, f.eq);
  const double tol = 1e-12 * c.scale;
  EXPECT_LE(c.f.stacked().cwiseAbs().maxCoeff(), tol);
  EXPECT_LE(c.g.stacked().cwiseAbs().maxCoeff(), tol);
  EXPECT_LE(c.t.values.cwiseAbs().maxCoeff(), tol);
}

GTEST_TEST(CommutatorTest, SupportInsideOmegaStar) {
  const Fixture f = make_fixture();
  for (std::uint64_t seed : {2, 3, 4}) {
    const ComplexStateVector s = random_state(f.grid, seed);
    const ComplexScalarField p = pressure_from_state(s, f.eq).p;
    const CommutatorForcing c = build_commutators(f.regions, f.chi, s, p, f.eq);
    EXPECT_LE(c.leakage, 1e-12 * c.scale);
    EXPECT_LE(commutator_leakage(c, f.regions), 1e-12 * c.scale);
    // The forcings are not trivially zero inside omega_star.
    double inside = 0.0;
    for (int idx : f.regions.omega_star) inside = std::max(inside, std::abs(c.f.u1[idx]));
    EXPECT_GT(inside, 1e-3 * c.scale);
  }
}

GTEST_TEST(CommutatorTest, ThinLayerRaises) {
  const Fixture f = make_fixture();
  // Move the transition next to omega1: the stencils then see it from there.
  CutoffField bad = f.chi;
  for (int idx : f.regions.omega_star) {
    const double u = (f.regions.depth[idx] - f.regions.level_inner) /
                     (f.regions.level_outer - f.regions.level_inner);
    bad.values.values[idx] = quintic_step(u);
  }
  const ComplexStateVector s = random_state(f.grid, 5);
  const ComplexScalarField p = pressure_from_state(s, f.eq).p;
  try {
    build_commutators(f.regions, bad, s, p, f.eq);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::commutator);
  }
}

GTEST_TEST(ChiSystemTest, IdentityHoldsForAnyState) {
  const Fixture f = make_fixture();
  const LinearOperator a = assemble_generator(f.eq, GeneratorOptions{0.5});
  const VecC x = a.layout->from_state(random_state(f.grid, 6));
  const EigenSolution sol = pde_eigen_residual(a, f.eq, Complex(0.3, 0.1), x);
  const ChiSystemResidual r = assemble_chi_system_residual(sol, f.chi, f.eq);
  EXPECT_LE(r.identity_gap, 1e-12 * r.scale);
  EXPECT_GT(r.bare_momentum, 0.0);
}

GTEST_TEST(ChiSystemTest, ConstantCutoffReproducesBareResidual) {
  const Fixture f = make_fixture();
  const LinearOperator a = assemble_generator(f.eq, GeneratorOptions{0.5});
  const VecC x = a.layout->from_state(random_state(f.grid, 7));
  const EigenSolution sol = pde_eigen_residual(a, f.eq, Complex(-0.2, 0.0), x);
  CutoffField one{sample(f.grid, [](double, double) { return 1.0; })};
  const ChiSystemResidual r = assemble_chi_system_residual(sol, one, f.eq);
  EXPECT_NEAR(r.momentum, r.bare_momentum, 1e-12 * r.scale);
  EXPECT_NEAR(r.induction, r.bare_induction, 1e-12 * r.scale);
}

GTEST_TEST(ChiSystemTest, ZeroStateZeroResidual) {
  const Fixture f = make_fixture();
  const LinearOperator a = assemble_generator(f.eq, GeneratorOptions{0.5});
  const EigenSolution sol = pde_eigen_residual(a, f.eq, Complex(1.0, 0.0), VecC::Zero(a.size()));
  const ChiSystemResidual r = assemble_chi_system_residual(sol, f.chi, f.eq);
  EXPECT_EQ(r.momentum, 0.0);
  EXPECT_EQ(r.induction, 0.0);
}

GTEST_TEST(CommutatorTest, LaplacianCommutatorOfConstantIsZero) {
  const Grid g = build_grid(GridSpec{2 * kPi, 2 * kPi, 16, 16});
  const ScalarField c = sample(g, [](double, double) { return 2.5; });
  VectorField2 v(g);
  v.u1.setRandom();
  v.u2.setRandom();
  EXPECT_LT(commutator_chi_laplacian(c, v).stacked().cwiseAbs().maxCoeff(), 1e-10);
  const ScalarField p = sample(g, [](double x, double y) { return std::sin(x) * std::cos(y); });
  EXPECT_LT(commutator_gradient_chi(c, p).stacked().cwiseAbs().maxCoeff(), 1e-12);
}

}  // namespace
}  // namespace mhdlab
