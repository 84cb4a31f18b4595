#include <cmath>
#include <sstream>

#include <gtest/gtest.h>

#include "mhdlab/carleman.hpp"

namespace mhdlab {
namespace {

constexpr double kPi = 3.141592653589793;

RegionSet patch_regions(int n) {
  const Grid g = build_grid(GridSpec{2 * kPi, 2 * kPi, n, n});
  return build_nested_regions(g, OmegaSpec{}, GeometryCase::interior_patch);
}

GTEST_TEST(CoefficientsTest, HalfSplit) {
  const CarlemanCoefficients c = coefficients({1.0, 0.5, 0.5, 1.0, 1.0});
  EXPECT_EQ(c.c_grad, 0.875);
  EXPECT_EQ(c.c_zero, 2.0);
  EXPECT_EQ(c.c_rhs, 3.0);
  EXPECT_FALSE(c.tau_too_small);
  const CarlemanCoefficients d = coefficients({10.0, 0.5, 0.5, 2.0, 3.0});
  EXPECT_EQ(d.c_grad, 19.875);
  EXPECT_EQ(d.c_zero, 36000.0);
  EXPECT_EQ(d.c_rhs, 3.0);
}

// With delta0 = epsilon = 1/2 the coefficients reduce to
// (rho tau - 1/8, 2 rho k^2 tau^3, 3).
GTEST_TEST(CoefficientsTest, ClosedFormsAtHalfSplit) {
  for (double rho : {0.25, 1.0, 2.0, 3.5}) {
    for (double k : {0.5, 1.0, 1.93}) {
      for (double tau : {0.125, 1.0, 4.0, 64.0}) {
        const CarlemanCoefficients c = coefficients({tau, 0.5, 0.5, rho, k});
        EXPECT_EQ(c.c_grad, rho * tau - 0.125);
        EXPECT_DOUBLE_EQ(c.c_zero, 2.0 * rho * k * k * tau * tau * tau);
        EXPECT_EQ(c.c_rhs, 3.0);
      }
    }
  }
}

GTEST_TEST(CoefficientsTest, ScalingInvariance) {
  // (rho, tau) -> (rho / c, c tau) keeps the leading term 2 delta0 rho tau.
  const CarlemanCoefficients a = coefficients({3.0, 0.3, 0.7, 2.0, 1.0});
  const CarlemanCoefficients b = coefficients({12.0, 0.3, 0.7, 0.5, 1.0});
  EXPECT_NEAR(a.c_grad, b.c_grad, 1e-14);
}

GTEST_TEST(CoefficientsTest, SmallTauAndDegenerateSplit) {
  const CarlemanCoefficients c = coefficients({0.1, 0.5, 0.5, 1.0, 1.0});
  EXPECT_TRUE(c.tau_too_small);
  EXPECT_LT(c.c_grad, 0.0);
  const CarlemanCoefficients d = coefficients({1.0, std::nextafter(1.0, 0.0), 0.5, 1.0, 1.0});
  EXPECT_LT(d.c_zero, 1e-14);
  for (const CarlemanParams& bad : {CarlemanParams{0.0, 0.5, 0.5, 1, 1}, CarlemanParams{1.0, 1.0, 0.5, 1, 1},
                                    CarlemanParams{1.0, 0.0, 0.5, 1, 1}, CarlemanParams{1.0, 0.5, 0.0, 1, 1}}) {
    try {
      coefficients(bad);
      ADD_FAILURE();
    } catch (const Error& e) {
      EXPECT_EQ(e.kind(), ErrorKind::precondition);
    }
  }
}

// Closed forms for w = a (1 - r^2/R^2)^4:
//   int w^2 = pi a^2 R^2 / 9, int |grad w|^2 = 8 pi a^2 / 7,
//   int |lap w|^2 = 768 pi a^2 / (35 R^2).
GTEST_TEST(BumpTest, UnweightedIntegrals) {
  const RegionSet r = patch_regions(64);
  const WeightField psi = build_weight(r);
  const std::vector<Bump> bumps = random_bumps(r, 3, 4);
  for (const Bump& b : bumps) {
    const CarlemanParams p{1e-9, 0.5, 0.5, psi.rho, psi.k};
    const EstimateReport e = integrated_inequality_check(b, psi, p, r);
    const double scale = std::exp(e.log_shift);
    const double a2 = b.amplitude * b.amplitude;
    const double r2 = b.radius * b.radius;
    EXPECT_NEAR(e.weighted_zero * scale, kPi * a2 * r2 / 9.0, 2e-3 * kPi * a2 * r2 / 9.0);
    EXPECT_NEAR(e.weighted_grad * scale, 8.0 * kPi * a2 / 7.0, 2e-3 * 8.0 * kPi * a2 / 7.0);
    EXPECT_NEAR(e.weighted_lap * scale, 768.0 * kPi * a2 / (35.0 * r2), 5e-3 * 768.0 * kPi * a2 / (35.0 * r2));
  }
}

GTEST_TEST(BumpTest, DerivativesMatchFiniteDifferences) {
  const Bump b{1.0, 2.0, 0.7, 1.3};
  const double x = 1.2, y = 2.3, h = 1e-4;
  const auto g = b.gradient(x, y);
  EXPECT_NEAR(g[0], (b.value(x + h, y) - b.value(x - h, y)) / (2 * h), 1e-6);
  EXPECT_NEAR(g[1], (b.value(x, y + h) - b.value(x, y - h)) / (2 * h), 1e-6);
  const double lap = (b.value(x + h, y) + b.value(x - h, y) + b.value(x, y + h) + b.value(x, y - h) -
                      4 * b.value(x, y)) / (h * h);
  EXPECT_NEAR(b.laplacian(x, y), lap, 1e-4);
  EXPECT_EQ(b.value(1.0, 2.8), 0.0);
}

GTEST_TEST(BumpTest, SupportsInsideG) {
  const RegionSet r = patch_regions(64);
  const std::vector<Bump> bumps = random_bumps(r, 50, 1);
  ASSERT_EQ(bumps.size(), 50u);
  const Grid& g = r.grid;
  for (const Bump& b : bumps) {
    EXPECT_GE(b.radius, 4 * g.hx() - 1e-12);
    for (int idx = 0; idx < g.size(); ++idx) {
      if (std::hypot(g.x(g.ix(idx)) - b.cx, g.y(g.jy(idx)) - b.cy) < b.radius) {
        ASSERT_TRUE(r.in_g(idx));
      }
    }
  }
  // Seeded: identical draws.
  const std::vector<Bump> again = random_bumps(r, 50, 1);
  EXPECT_EQ(again.front().cx, bumps.front().cx);
}

GTEST_TEST(InequalityTest, ZeroFieldPasses) {
  const RegionSet r = patch_regions(64);
  const WeightField psi = build_weight(r);
  Bump w = random_bumps(r, 1, 2).front();
  w.amplitude = 0.0;
  const EstimateReport e = integrated_inequality_check(w, psi, {1.0, 0.5, 0.5, psi.rho, psi.k}, r);
  EXPECT_EQ(e.lhs_grad + e.lhs_zero, 0.0);
  EXPECT_EQ(e.rhs_main, 0.0);
  EXPECT_TRUE(e.pass);
}

GTEST_TEST(InequalityTest, SupportOutsideGRejected) {
  const RegionSet r = patch_regions(64);
  const WeightField psi = build_weight(r);
  const Bump w{kPi, kPi, 0.5, 1.0};  // centered in omega
  try {
    integrated_inequality_check(w, psi, {1.0, 0.5, 0.5, psi.rho, psi.k}, r);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::precondition);
  }
}

GTEST_TEST(InequalityTest, SweepPassesWithCubicSlope) {
  const RegionSet r = patch_regions(64);
  const WeightField psi = build_weight(r);
  const std::vector<double> taus = tau_grid(r);
  ASSERT_EQ(taus.size(), 8u);
  EXPECT_NEAR(taus[2] * r.g_diameter(), 1.0, 1e-12);
  const double c2 = calibrate_tau2_correction(calibration_gaussians(r, 20, 3), psi, taus);
  EXPECT_GE(c2, 0.0);
  const InequalitySweep s = integrated_inequality_sweep(random_bumps(r, 30, 5), psi, r, taus, c2);
  EXPECT_GT(s.tau0, 0.0);
  for (std::size_t t = 0; t < s.taus.size(); ++t) {
    if (s.taus[t] >= s.tau0) {
      EXPECT_EQ(s.pass_count[t], 30);
    }
  }
  EXPECT_NEAR(s.zero_order_slope, 3.0, 0.2);
  std::ostringstream os;
  write_sweep_table(os, s);
  EXPECT_NE(os.str().find("passed_fields"), std::string::npos);
}

GTEST_TEST(InequalityTest, EmptyInputs) {
  const RegionSet r = patch_regions(64);
  const WeightField psi = build_weight(r);
  EXPECT_THROW(integrated_inequality_sweep({}, psi, r, {1.0}, 0.0), Error);
  EXPECT_THROW(integrated_inequality_sweep(random_bumps(r, 2, 1), psi, r, {}, 0.0), Error);
}

GTEST_TEST(VanishingTest, SyntheticStateVanishesOnOmega) {
  const RegionSet r = patch_regions(64);
  const SyntheticSolution s = omega_vanishing_state(r, 3);
  for (int idx : r.omega) {
    EXPECT_EQ(s.state.phi.u1[idx], 0.0);
    EXPECT_EQ(s.state.xi.u2[idx], 0.0);
    EXPECT_EQ(s.pressure.values[idx], 0.0);
  }
  EXPECT_GT(s.state.phi.u1.cwiseAbs().maxCoeff(), 1e-3);
  EXPECT_LT(divergence(s.state.phi).values.cwiseAbs().maxCoeff(), 1e-10);
}

GTEST_TEST(VanishingTest, BoundsDecay) {
  const RegionSet r = patch_regions(64);
  const SyntheticSolution s = omega_vanishing_state(r, 3);
  const TauSweep t = tau_sweep_vanishing(s.state, s.pressure, r, tau_grid(r));
  EXPECT_TRUE(t.monotone);
  EXPECT_GE(t.state_exponent, 3.0);
  EXPECT_GE(t.pressure_exponent, 2.0);
  EXPECT_GT(t.c1, 0.0);
  // C1 and C2 do not depend on the tau list.
  const TauSweep u = tau_sweep_vanishing(s.state, s.pressure, r, {0.5, 7.0});
  EXPECT_EQ(u.c1, t.c1);
  EXPECT_EQ(u.c2, t.c2);
}

GTEST_TEST(VanishingTest, ZeroStateGivesZeroBounds) {
  const RegionSet r = patch_regions(64);
  const TauSweep t = tau_sweep_vanishing(StateVector(r.grid), ScalarField(r.grid), r, {1.0, 2.0});
  for (const TauBound& b : t.rows) {
    EXPECT_EQ(b.state_bound, 0.0);
    EXPECT_EQ(b.pressure_bound, 0.0);
  }
}

GTEST_TEST(VanishingTest, Preconditions) {
  const RegionSet r = patch_regions(64);
  StateVector s(r.grid);
  s.phi.u1.setOnes();
  try {
    tau_sweep_vanishing(s, ScalarField(r.grid), r, {1.0});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::precondition);
  }
  try {
    tau_sweep_vanishing(StateVector(r.grid), ScalarField(r.grid), r, {});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::empty_input);
  }
}

GTEST_TEST(FinalEstimateTest, ZeroStateIsTrivial) {
  const RegionSet r = patch_regions(128);
  const CutoffField chi = build_cutoff(r);
  const WeightField psi = build_weight(r);
  const Equilibrium eq = make_equilibrium(EquilibriumKind::zero, r.grid, {}, 1.0, 1.0);
  const FinalConstants c = default_final_constants(eq, chi, Complex(0.5, 0.0));
  EXPECT_EQ(c.c_equilibrium, 0.0);
  EXPECT_EQ(c.c_lambda_e, 1.5);
  const std::vector<double> taus = {5.0 / r.g_diameter()};
  const auto rows = final_estimate_eval(ComplexStateVector(r.grid), ComplexScalarField(r.grid), chi,
                                        psi, r, c, taus);
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_EQ(rows[0].lhs, 0.0);
  EXPECT_EQ(rows[0].rhs, 0.0);
  EXPECT_TRUE(rows[0].pass);
}

GTEST_TEST(FinalEstimateTest, NonVanishingStateIsStillEvaluated) {
  const RegionSet r = patch_regions(128);
  const CutoffField chi = build_cutoff(r);
  const WeightField psi = build_weight(r);
  const Equilibrium eq = make_equilibrium(EquilibriumKind::zero, r.grid, {}, 1.0, 1.0);
  const FinalConstants c = default_final_constants(eq, chi, Complex(0.0, 0.0));
  ComplexStateVector s(r.grid);
  s.phi.u1.setConstant(1.0);
  ComplexScalarField p(r.grid);
  const auto rows = final_estimate_eval(s, p, chi, psi, r, c, {5.0 / r.g_diameter(), 0.01});
  ASSERT_EQ(rows.size(), 2u);
  for (const auto& row : rows) {
    if (row.tau_too_small) continue;
    EXPECT_TRUE(std::isfinite(row.lhs));
    EXPECT_TRUE(std::isfinite(row.rhs));
    EXPECT_GT(row.lhs, 0.0);
  }
}

}  // namespace
}  // namespace mhdlab
