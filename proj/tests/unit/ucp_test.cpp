#include <cmath>

#include <gtest/gtest.h>

#include "mhdlab/geometry.hpp"
#include "mhdlab/ucp.hpp"

namespace mhdlab {
namespace {

constexpr double kPi = 3.141592653589793;

struct Problem {
  LinearOperator generator;
  SpectrumReport adjoint;
  NodeSet omega;
};

// Channel [0, 2 pi] x [0, pi] with walls in y, nu = 1, eta = 2, sigma = 1.5:
// two simple unstable eigenvalues near 1.5 and 0.5.
Problem channel(int n) {
  const Grid g = build_grid(GridSpec{2 * kPi, kPi, n, n, BoundaryKind::periodic, BoundaryKind::wall});
  Problem s{assemble_generator(make_equilibrium(EquilibriumKind::zero, g, {}, 1.0, 2.0),
                             GeneratorOptions{1.5}),
          {},
          disc_nodes(g, kPi, kPi / 2, 0.15 * 2 * kPi)};
  s.adjoint = adjoint_spectrum(adjoint_of(s.generator), 6);
  return s;
}

Problem periodic_box(int n, double sigma) {
  const Grid g = build_grid(GridSpec{2 * kPi, 2 * kPi, n, n});
  Problem s{assemble_generator(make_equilibrium(EquilibriumKind::zero, g, {}, 1.0, 1.0),
                             GeneratorOptions{sigma}),
          {},
          disc_nodes(g, kPi, kPi, 0.15 * 2 * kPi)};
  s.adjoint = adjoint_spectrum(adjoint_of(s.generator), 12);
  return s;
}

double omega_norm2(const VecC& x, const StateLayout& layout, const NodeSet& omega) {
  const VecC r = restrict_to(x, omega_unknowns(layout, omega));
  return layout.cell_area() * r.squaredNorm();
}

GTEST_TEST(UcpTest, SimpleEigenvalueGramIsOmegaNorm) {
  const Problem s = channel(16);
  ASSERT_EQ(s.adjoint.n_unstable, 2);
  ASSERT_EQ(s.adjoint.multiplicities, (std::vector<int>{1, 1}));
  const StateLayout& layout = *s.adjoint.layout;
  for (int c : s.adjoint.unstable_clusters) {
    const Eigen::MatrixXcd& b = s.adjoint.clusters[c].basis;
    const GramMatrix g = ucp_gram_test(b, layout, s.omega);
    EXPECT_NEAR(g.sigma_min, omega_norm2(b.col(0), layout, s.omega), 1e-14);
    EXPECT_TRUE(g.passed);
  }
}

GTEST_TEST(UcpTest, GramIsHermitianPositive) {
  const Problem s = periodic_box(16, 1.5);
  const std::vector<GramMatrix> gs = ucp_gram_tests(s.adjoint, s.omega);
  ASSERT_EQ(gs.size(), 1u);
  const GramMatrix& g = gs[0];
  EXPECT_EQ(g.entries.rows(), 8);
  EXPECT_EQ((g.entries - g.entries.adjoint()).norm(), 0.0);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(g.entries);
  EXPECT_GT(es.eigenvalues().minCoeff(), 0.0);
  EXPECT_TRUE(g.passed);
  EXPECT_GT(g.sigma_min, 1e-6);
}

GTEST_TEST(UcpTest, DegenerateFixtureFails) {
  const Problem s = periodic_box(16, 1.5);
  const Eigen::MatrixXcd b = s.adjoint.clusters[s.adjoint.unstable_clusters[0]].basis.leftCols(2);
  const GramMatrix g =
      ucp_gram_test(make_omega_degenerate(b, *s.adjoint.layout, s.omega), *s.adjoint.layout, s.omega);
  EXPECT_LE(g.sigma_min, 1e-10);
  EXPECT_FALSE(g.passed);
  EXPECT_THROW(make_omega_degenerate(b.leftCols(1), *s.adjoint.layout, s.omega), Error);
}

GTEST_TEST(UcpTest, EmptyInputRejected) {
  const Problem s = channel(12);
  try {
    ucp_gram_test(Eigen::MatrixXcd(s.adjoint.layout->size(), 0), *s.adjoint.layout, s.omega);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::empty_input);
  }
}

GTEST_TEST(ActuatorTest, StableOperatorHasNoActuators) {
  const Problem s = periodic_box(12, 0.0);
  EXPECT_EQ(s.adjoint.n_unstable, 0);
  const Eigen::MatrixXd a = select_actuators(s.adjoint, s.omega);
  EXPECT_EQ(a.cols(), 0);
  EXPECT_TRUE(kalman_rank(a, s.adjoint, s.omega).empty());
}

GTEST_TEST(ActuatorTest, SimpleModesNeedOneActuator) {
  const Problem s = channel(16);
  const StateLayout& layout = *s.adjoint.layout;
  const Eigen::MatrixXd a = select_actuators(s.adjoint, s.omega);
  ASSERT_EQ(a.cols(), 1);
  EXPECT_NEAR(omega_norm2(a.col(0).cast<Complex>(), layout, s.omega), 1.0, 1e-12);
  const std::vector<int> inside = omega_unknowns(layout, s.omega);
  VecD outside = a.col(0);
  for (int u : inside) outside[u] = 0.0;
  EXPECT_EQ(outside.cwiseAbs().maxCoeff(), 0.0);
  for (const KalmanMatrix& k : kalman_rank(a, s.adjoint, s.omega)) {
    EXPECT_EQ(k.rank, 1);
    EXPECT_TRUE(k.full_rank);
    EXPECT_EQ(k.entries.rows(), 1);
    EXPECT_EQ(k.entries.cols(), 1);
  }
}

GTEST_TEST(ActuatorTest, RestrictedEigenfunctionAsActuator) {
  const Problem s = channel(16);
  const StateLayout& layout = *s.adjoint.layout;
  const Eigen::MatrixXcd phi = s.adjoint.clusters[s.adjoint.unstable_clusters[0]].basis;
  // Real eigenvalue: fix the phase so the eigenfunction is real.
  const Eigen::Index arg = [&] {
    Eigen::Index i = 0;
    phi.col(0).cwiseAbs().maxCoeff(&i);
    return i;
  }();
  const VecC real_phi = phi.col(0) * (std::abs(phi(arg, 0)) / phi(arg, 0));
  Eigen::MatrixXd u = restrict_to(real_phi, omega_unknowns(layout, s.omega)).real();
  const KalmanMatrix k = kalman_matrix(u, phi, layout, s.omega);
  EXPECT_NEAR(std::abs(k.entries(0, 0)), omega_norm2(phi.col(0), layout, s.omega), 1e-12);
  EXPECT_EQ(k.rank, 1);
}

GTEST_TEST(ActuatorTest, KalmanFullRankOnShiftedBox) {
  const Problem s = periodic_box(16, 1.5);
  const Eigen::MatrixXd a = select_actuators(s.adjoint, s.omega);
  EXPECT_EQ(a.cols(), s.adjoint.k_max);
  const std::vector<KalmanMatrix> ks = kalman_rank(a, s.adjoint, s.omega);
  ASSERT_EQ(ks.size(), s.adjoint.multiplicities.size());
  for (std::size_t i = 0; i < ks.size(); ++i) {
    EXPECT_EQ(ks[i].rank, s.adjoint.multiplicities[i]);
    EXPECT_LE(ks[i].rank, std::min<int>(ks[i].multiplicity, static_cast<int>(a.cols())));
    // SVD oracle on the pairing matrix.
    Eigen::JacobiSVD<Eigen::MatrixXcd> svd(ks[i].entries);
    EXPECT_GT(svd.singularValues().minCoeff(), 1e-8 * svd.singularValues().maxCoeff());
  }
  // Actuators zero on omega pair to nothing.
  const std::vector<KalmanMatrix> zero = kalman_rank(Eigen::MatrixXd::Zero(a.rows(), a.cols()), s.adjoint, s.omega);
  EXPECT_EQ(zero[0].rank, 0);
  EXPECT_FALSE(zero[0].full_rank);
}

GTEST_TEST(ActuatorTest, TooManyActuatorsRejected) {
  const Problem s = channel(12);
  try {
    select_actuators(s.adjoint, s.omega, 5);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::actuator);
  }
}

}  // namespace
}  // namespace mhdlab
