#include <cmath>
#include <sstream>

#include <gtest/gtest.h>

#include "mhdlab/geometry.hpp"
#include "mhdlab/stabilize.hpp"

namespace mhdlab {
namespace {

constexpr double kPi = 3.141592653589793;

// Walls in y, nu = 1, eta = 2, sigma = 1.5: unstable eigenvalues 1.5 and 0.5.
struct Channel {
  LinearOperator generator;
  NodeSet omega;
  UnstableProjection projection;
  ControlProfiles profiles;
  Eigen::MatrixXd input;
};

Channel channel(int n) {
  const Grid g = build_grid(GridSpec{2 * kPi, kPi, n, n, BoundaryKind::periodic, BoundaryKind::wall});
  Channel c{assemble_generator(make_equilibrium(EquilibriumKind::zero, g, {}, 1.0, 2.0),
                               GeneratorOptions{1.5}),
            disc_nodes(g, kPi, kPi / 2, 0.15 * 2 * kPi),
            {},
            {},
            {}};
  const SpectrumReport fwd = compute_spectrum(c.generator, 6, EigenStrategy::shift_invert);
  const SpectrumReport adj = adjoint_spectrum(adjoint_of(c.generator), 6);
  c.projection = build_unstable_projection(c.generator, fwd, adj);
  c.profiles = control_profiles(c.generator, select_actuators(adj, c.omega), c.omega);
  c.input = input_map(c.generator, c.projection, c.profiles);
  return c;
}

VecD seeded_state(const LinearOperator& a) {
  VecD x(a.size());
  for (int i = 0; i < x.size(); ++i) x[i] = std::sin(0.37 * i + 1.0);
  return a.projector->project(x);
}

GTEST_TEST(FeedbackTest, ScalarPolePlacement) {
  // 0.5 - 1 * k = -2 gives k = 2.5.
  const FeedbackGain f = synthesize_feedback(Eigen::MatrixXd::Constant(1, 1, 0.5),
                                             Eigen::MatrixXd::Constant(1, 1, 1.0), 2.0);
  ASSERT_EQ(f.gain.rows(), 1);
  EXPECT_NEAR(f.gain(0, 0), 2.5, 1e-12);
  EXPECT_NEAR(f.max_real, -2.0, 1e-12);
}

GTEST_TEST(FeedbackTest, EmptyUnstableBlock) {
  const FeedbackGain f = synthesize_feedback(Eigen::MatrixXd(0, 0), Eigen::MatrixXd(0, 2), 1.0);
  EXPECT_EQ(f.gain.rows(), 2);
  EXPECT_EQ(f.gain.cols(), 0);
  EXPECT_TRUE(f.poles.empty());
}

GTEST_TEST(FeedbackTest, PlacesDistinctPolesInBand) {
  Eigen::MatrixXd a(3, 3);
  a << 1.0, 2.0, 0.0, -2.0, 1.0, 0.0, 0.0, 0.0, 0.3;
  const Eigen::MatrixXd b = Eigen::MatrixXd::Identity(3, 2) + Eigen::MatrixXd::Constant(3, 2, 0.1);
  const FeedbackGain f = synthesize_feedback(a, b, 1.0);
  EXPECT_LE(f.max_real, -1.0 + 1e-8);
  for (const Complex& l : f.closed_loop) {
    EXPECT_GE(l.real(), -1.5 - 1e-8);
    EXPECT_NEAR(l.imag(), 0.0, 1e-8);
  }
}

GTEST_TEST(FeedbackTest, Uncontrollable) {
  Eigen::MatrixXd b(2, 1);
  b << 1.0, 0.0;
  try {
    synthesize_feedback(Eigen::Vector2d(0.5, 0.2).asDiagonal().toDenseMatrix(), b, 1.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::uncontrollable);
  }
  EXPECT_THROW(synthesize_feedback(Eigen::MatrixXd::Ones(1, 1), Eigen::MatrixXd(1, 0), 1.0), Error);
  try {
    synthesize_feedback(Eigen::MatrixXd::Ones(1, 1), Eigen::MatrixXd::Ones(1, 1), 0.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::config);
  }
}

GTEST_TEST(DecayTest, ExponentialRates) {
  std::vector<double> t, e, c, mix;
  for (int i = 0; i <= 200; ++i) {
    t.push_back(0.05 * i);
    e.push_back(std::exp(-2.0 * t.back()));
    c.push_back(3.0);
    mix.push_back(std::exp(-t.back()) + std::exp(-3.0 * t.back()));
  }
  EXPECT_NEAR(measure_decay(t, e, 0.0, 10.0).rate, 2.0, 1e-10);
  EXPECT_NEAR(measure_decay(t, e, 0.0, 10.0).half_width, 0.0, 1e-8);
  EXPECT_NEAR(measure_decay(t, c, 0.0, 10.0).rate, 0.0, 1e-12);
  // The slow mode dominates a late window.
  EXPECT_NEAR(measure_decay(t, mix, 6.0, 10.0).rate, 1.0, 1e-4);
}

GTEST_TEST(DecayTest, FitErrors) {
  std::vector<double> t, e;
  for (int i = 0; i < 20; ++i) {
    t.push_back(i);
    e.push_back(1.0);
  }
  try {
    measure_decay(t, e, 0.0, 5.0);
    FAIL();
  } catch (const Error& err) {
    EXPECT_EQ(err.kind(), ErrorKind::fit);
  }
  e[3] = 0.0;
  EXPECT_THROW(measure_decay(t, e, 0.0, 19.0), Error);
}

GTEST_TEST(ProjectionTest, CoordinatesAndIdempotence) {
  const Channel c = channel(16);
  const UnstableProjection& p = c.projection;
  ASSERT_EQ(p.dimension(), 2);
  EXPECT_LT(p.condition, 1e3);
  for (int j = 0; j < 2; ++j) {
    const VecD coords = project_unstable(VecD(p.forward.col(j)), p);
    EXPECT_NEAR(coords[j], 1.0, 1e-10);
    EXPECT_NEAR(coords[1 - j], 0.0, 1e-10);
  }
  const VecD x = seeded_state(c.generator);
  const VecD once = unstable_part(x, p);
  EXPECT_LT((unstable_part(once, p) - once).norm(), 1e-10 * once.norm());
  Eigen::EigenSolver<Eigen::MatrixXd> es(p.block);
  std::vector<double> re = {es.eigenvalues()[0].real(), es.eigenvalues()[1].real()};
  std::sort(re.begin(), re.end());
  EXPECT_NEAR(re[0], 0.5, 2e-2);
  EXPECT_NEAR(re[1], 1.5, 2e-2);
}

GTEST_TEST(ProfilesTest, ZeroOutsideOmega) {
  const Channel c = channel(16);
  const std::vector<int> inside = omega_unknowns(*c.generator.layout, c.omega);
  std::vector<char> mask(c.generator.size(), 0);
  for (int k : inside) mask[k] = 1;
  for (Eigen::Index j = 0; j < c.profiles.fields.cols(); ++j) {
    for (int k = 0; k < c.generator.size(); ++k) {
      if (!mask[k]) {
        ASSERT_EQ(c.profiles.fields(k, j), 0.0);
      }
    }
  }
}

GTEST_TEST(ClosedLoopTest, DecaysAndMatchesVariationOfConstants) {
  const Channel c = channel(16);
  const FeedbackGain f = synthesize_feedback(c.projection.block, c.input, 1.0);
  EXPECT_LE(f.max_real, -1.0 + 1e-8);
  const VecD y0 = seeded_state(c.generator);
  SimulationOptions opts;
  opts.t_final = 16.0;
  opts.dt = 0.01;
  const SimulationTrace closed = simulate_closed_loop(c.generator, c.projection, f, c.profiles, y0, opts);
  EXPECT_LT(closed.energies.back(), closed.energies.front());
  // Slowest closed-loop mode is the stable -0.5: energy rate 1.
  EXPECT_NEAR(measure_decay(closed, 10.0, 16.0).rate, 1.0, 0.05);

  SimulationOptions open = opts;
  open.feedback = false;
  open.t_final = 6.0;
  open.blowup = 1e12;
  const SimulationTrace grow = simulate_closed_loop(c.generator, c.projection, f, c.profiles, y0, open);
  EXPECT_GT(grow.energies.back(), grow.energies.front());
  // Backward Euler growth of the 1.5 mode: energy rate 2 log(1 / (1 - 1.5 dt)) / dt.
  EXPECT_NEAR(measure_decay(grow, 4.0, 6.0).rate, -2.0 * std::log(1.0 / (1.0 - 0.015)) / 0.01, 0.1);

  opts.t_final = 1.0;
  EXPECT_LT(variation_of_constants_residual(c.generator, c.projection, f, c.profiles, y0, opts), 1e-10);

  std::ostringstream trace, gain;
  write_trace(trace, closed);
  write_gain(gain, f);
  EXPECT_NE(trace.str().find("a_1"), std::string::npos);
  EXPECT_NE(gain.str().find("gamma 1"), std::string::npos);
}

GTEST_TEST(ClosedLoopTest, UnresolvedTimeStep) {
  const Channel c = channel(16);
  const FeedbackGain f = synthesize_feedback(c.projection.block, c.input, 1.0);
  SimulationOptions opts;
  opts.dt = 1.0;
  try {
    simulate_closed_loop(c.generator, c.projection, f, c.profiles, seeded_state(c.generator), opts);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::precondition);
  }
}

}  // namespace
}  // namespace mhdlab
