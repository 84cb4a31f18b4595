#include <cmath>
#include <sstream>

#include <gtest/gtest.h>

#include "mhdlab/boundary.hpp"

namespace mhdlab {
namespace {

constexpr double kPi = 3.141592653589793;

GTEST_TEST(FieldTest, WeightedNormUnitSquare) {
  const Grid g = build_grid(GridSpec{1.0, 1.0, 16, 16});
  const ScalarField one = sample(g, [](double, double) { return 1.0; });
  EXPECT_NEAR(weighted_norm2(one, one, all_nodes(g)), 1.0, 1e-14);
  const ScalarField zero(g);
  EXPECT_EQ(weighted_norm2(zero, one, all_nodes(g)), 0.0);
}

// int_{[0,2pi]^2} sin^2 x = 2 pi^2, reproduced exactly by the periodic
// trapezoid rule at any resolution above the Nyquist limit.
GTEST_TEST(FieldTest, WeightedNormSine) {
  for (int n : {16, 32}) {
    const Grid g = build_grid(GridSpec{2 * kPi, 2 * kPi, n, n});
    const ScalarField s = sample(g, [](double x, double) { return std::sin(x); });
    const ScalarField one = sample(g, [](double, double) { return 1.0; });
    EXPECT_NEAR(weighted_norm2(s, one, all_nodes(g)), 2 * kPi * kPi, 1e-10);
  }
}

GTEST_TEST(FieldTest, EmptyRegionFlag) {
  const Grid g = build_grid(GridSpec{1.0, 1.0, 8, 8});
  const ScalarField one = sample(g, [](double, double) { return 1.0; });
  bool empty = false;
  EXPECT_EQ(weighted_norm2(one, one, NodeSet{}, &empty), 0.0);
  EXPECT_TRUE(empty);
}

GTEST_TEST(FieldTest, NonPositiveWeightRejected) {
  const Grid g = build_grid(GridSpec{1.0, 1.0, 8, 8});
  const ScalarField one = sample(g, [](double, double) { return 1.0; });
  const ScalarField zero(g);
  EXPECT_THROW(weighted_norm2(one, zero, all_nodes(g)), Error);
}

GTEST_TEST(FieldTest, MismatchedGridsRaiseShapeError) {
  const ScalarField a(build_grid(GridSpec{1.0, 1.0, 8, 8}));
  const ScalarField b(build_grid(GridSpec{1.0, 1.0, 16, 16}));
  try {
    multiply(a, b);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::shape);
  }
}

GTEST_TEST(FieldTest, CalculusOnTrigonometricFields) {
  const Grid g = build_grid(GridSpec{2 * kPi, 2 * kPi, 64, 64});
  const ScalarField s = sample(g, [](double x, double y) { return std::sin(x) * std::cos(2 * y); });
  const VectorField2 grad = gradient(s);
  EXPECT_LT(curl2d(grad).values.cwiseAbs().maxCoeff(), 1e-10);
  const ScalarField lap = laplacian(s);
  EXPECT_LT((lap.values + 5.0 * s.values).cwiseAbs().maxCoeff(), 1e-3);
  EXPECT_LT((divergence(grad).values - lap.values).cwiseAbs().maxCoeff(), 1e-3);
}

GTEST_TEST(FieldTest, BcTagNames) {
  EXPECT_EQ(parse_bc_tag("velocity_dirichlet"), BcTag::velocity_dirichlet);
  EXPECT_EQ(parse_bc_tag("magnetic_tangential"), BcTag::magnetic_tangential);
  try {
    parse_bc_tag("slip");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::config);
  }
}

GTEST_TEST(BoundaryTest, VelocityVanishesOnWalls) {
  GridSpec s{2 * kPi, 1.0, 16, 16, BoundaryKind::periodic, BoundaryKind::wall};
  const Grid g = build_grid(s);
  VectorField2 v(g);
  v.u1.setConstant(1.0);
  v.u2.setConstant(2.0);
  const VectorField2 w = apply_bc(v, BcTag::velocity_dirichlet);
  EXPECT_EQ(boundary_violation(w, BcTag::velocity_dirichlet), 0.0);
  for (int idx : g.boundary_nodes()) {
    EXPECT_EQ(w.u1[idx], 0.0);
    EXPECT_EQ(w.u2[idx], 0.0);
  }
  for (int idx : g.interior_nodes()) EXPECT_EQ(w.u1[idx], 1.0);
}

GTEST_TEST(BoundaryTest, MagneticNormalAndCurlVanish) {
  GridSpec s{1.0, 1.0, 16, 16, BoundaryKind::wall, BoundaryKind::wall};
  const Grid g = build_grid(s);
  VectorField2 v(g);
  for (int i = 0; i < g.size(); ++i) {
    v.u1[i] = 1.0 + g.y(g.jy(i));
    v.u2[i] = std::cos(g.x(g.ix(i)));
  }
  const VectorField2 w = apply_bc(v, BcTag::magnetic_tangential);
  EXPECT_LT(boundary_violation(w, BcTag::magnetic_tangential), 1e-10);
  EXPECT_GT(boundary_violation(v, BcTag::magnetic_tangential), 0.1);
}

GTEST_TEST(BoundaryTest, PeriodicUnchanged) {
  const Grid g = build_grid(GridSpec{1.0, 1.0, 8, 8});
  VectorField2 v(g);
  v.u1.setRandom();
  v.u2.setRandom();
  const VectorField2 w = apply_bc(v, BcTag::magnetic_tangential);
  EXPECT_EQ(w.u1, v.u1);
  EXPECT_EQ(w.u2, v.u2);
  EXPECT_EQ(w.tag, BcTag::magnetic_tangential);
}

GTEST_TEST(BoundaryTest, SnapshotHasOneLinePerNode) {
  const Grid g = build_grid(GridSpec{1.0, 1.0, 8, 8});
  std::ostringstream os;
  write_snapshot(os, VectorField2(g));
  int lines = 0;
  for (char c : os.str()) lines += c == '\n';
  EXPECT_GE(lines, g.size());
}

}  // namespace
}  // namespace mhdlab
