#include <algorithm>
#include <cmath>
#include <sstream>

#include <gtest/gtest.h>

#include "mhdlab/spectrum.hpp"

namespace mhdlab {
namespace {

constexpr double kTwoPi = 6.283185307179586;

// Fourier symbol of the periodic fourth-order second-derivative stencil.
double symbol_d2(int k, double h) {
  const double t = k * h;
  return (-(16.0 / 12.0) * (2.0 - 2.0 * std::cos(t)) + (1.0 / 12.0) * (2.0 - 2.0 * std::cos(2 * t))) /
         (h * h);
}

// Discrete eigenvalues of the zero-equilibrium generator on the n x n
// periodic 2 pi box: every nonzero wavevector carries one solenoidal
// velocity and one solenoidal magnetic direction.
std::vector<double> discrete_fourier_values(int n, double sigma, int count) {
  const double h = kTwoPi / n;
  std::vector<double> v;
  for (int kx = -n / 2 + 1; kx <= n / 2; ++kx) {
    for (int ky = -n / 2 + 1; ky <= n / 2; ++ky) {
      if (kx == 0 && ky == 0) continue;
      const double lam = symbol_d2(kx, h) + symbol_d2(ky, h) + sigma;
      v.push_back(lam);
      v.push_back(lam);
    }
  }
  std::sort(v.begin(), v.end(), std::greater<>());
  v.resize(count);
  return v;
}

LinearOperator zero_generator(int n, double sigma) {
  const Grid g = build_grid(GridSpec{kTwoPi, kTwoPi, n, n});
  return assemble_generator(make_equilibrium(EquilibriumKind::zero, g, {}, 1.0, 1.0),
                            GeneratorOptions{sigma});
}

GTEST_TEST(SpectrumTest, ZeroEquilibriumMatchesFourierSymbol) {
  const LinearOperator a = zero_generator(16, 0.0);
  const SpectrumReport r = compute_spectrum(a, 12, EigenStrategy::shift_invert);
  const std::vector<double> expected = discrete_fourier_values(16, 0.0, 12);
  ASSERT_EQ(r.pairs.size(), 12u);
  for (int i = 0; i < 12; ++i) {
    EXPECT_NEAR(r.pairs[i].lambda.real(), expected[i], 1e-8) << i;
    EXPECT_NEAR(r.pairs[i].lambda.imag(), 0.0, 1e-8);
    EXPECT_LT(r.pairs[i].residual, 1e-8);
  }
  EXPECT_EQ(r.n_unstable, 0);
  EXPECT_EQ(r.k_max, 0);
  // -1 carries four wavevectors times two fields.
  EXPECT_EQ(r.clusters.front().multiplicity, 8);
}

GTEST_TEST(SpectrumTest, ShiftMovesSpectrumAndCountsUnstable) {
  const LinearOperator a = zero_generator(16, 1.5);
  const SpectrumReport r = compute_spectrum(a, 12, EigenStrategy::shift_invert);
  const std::vector<double> expected = discrete_fourier_values(16, 1.5, 12);
  for (int i = 0; i < 12; ++i) EXPECT_NEAR(r.pairs[i].lambda.real(), expected[i], 1e-8);
  EXPECT_EQ(r.n_unstable, 8);
  EXPECT_EQ(r.m_distinct, 1);
  EXPECT_EQ(r.multiplicities, std::vector<int>{8});
  EXPECT_EQ(r.k_max, 8);
  EXPECT_TRUE(r.complete);
  int sum = 0;
  for (int l : r.multiplicities) sum += l;
  EXPECT_EQ(sum, r.n_unstable);
  const EigenCluster& c = r.clusters[r.unstable_clusters[0]];
  EXPECT_EQ(c.basis.cols(), 8);
  // Orthonormal cluster basis in the discrete L2 inner product.
  const Eigen::MatrixXcd gram = a.layout->cell_area() * c.basis.adjoint() * c.basis;
  EXPECT_LT((gram - Eigen::MatrixXcd::Identity(8, 8)).norm(), 1e-8);
}

GTEST_TEST(SpectrumTest, DenseAndShiftInvertAgree) {
  const Grid g = build_grid(GridSpec{kTwoPi, kTwoPi, 12, 12});
  EquilibriumParams p;
  p.velocity_amplitude = 1.5;
  p.magnetic_amplitude = 0.5;
  const LinearOperator a = assemble_generator(
      make_equilibrium(EquilibriumKind::taylor_vortex, g, p, 1.0, 1.0), GeneratorOptions{0.5});
  const SpectrumReport d = compute_spectrum(a, 30, EigenStrategy::dense);
  const SpectrumReport s = compute_spectrum(a, 6, EigenStrategy::shift_invert);
  // Shift-invert returns the eigenvalues nearest its target; each one is in
  // the dense spectrum, and the rightmost ones coincide.
  for (const EigenPair& q : s.pairs) {
    double best = 1e300;
    for (const EigenPair& f : d.pairs) best = std::min(best, std::abs(f.lambda - q.lambda));
    EXPECT_LT(best, 1e-8) << q.lambda;
  }
  for (int i = 0; i < 2; ++i) {
    EXPECT_NEAR(d.pairs[i].lambda.real(), s.pairs[i].lambda.real(), 1e-8);
    EXPECT_NEAR(std::abs(d.pairs[i].lambda.imag()), std::abs(s.pairs[i].lambda.imag()), 1e-8);
  }
  EXPECT_EQ(d.n_unstable, s.n_unstable);
}

GTEST_TEST(SpectrumTest, AdjointEigenvaluesAreConjugates) {
  const Grid g = build_grid(GridSpec{kTwoPi, kTwoPi, 16, 16});
  EquilibriumParams p;
  p.velocity_amplitude = 2.0;
  p.magnetic_amplitude = 0.7;
  const LinearOperator a = assemble_generator(
      make_equilibrium(EquilibriumKind::taylor_vortex, g, p, 1.0, 1.0), GeneratorOptions{1.0});
  const SpectrumReport fw = compute_spectrum(a, 8, EigenStrategy::dense);
  const SpectrumReport ad = adjoint_spectrum(adjoint_of(a), 8, EigenStrategy::dense);
  ASSERT_EQ(fw.pairs.size(), ad.pairs.size());
  for (const EigenPair& q : ad.pairs) {
    double best = 1e300;
    for (const EigenPair& f : fw.pairs) best = std::min(best, std::abs(std::conj(f.lambda) - q.lambda));
    EXPECT_LT(best, 1e-8);
  }
  EXPECT_EQ(fw.n_unstable, ad.n_unstable);
  for (const EigenPair& q : ad.pairs) {
    EXPECT_LT(eigen_residual(adjoint_of(a), q.lambda, q.vector), 1e-8);
  }
}

GTEST_TEST(SpectrumTest, EigenvectorsAreSolenoidal) {
  const LinearOperator a = zero_generator(16, 0.0);
  const SpectrumReport r = compute_spectrum(a, 4, EigenStrategy::shift_invert);
  for (const EigenPair& p : r.pairs) {
    EXPECT_LT(a.projector->constraint_defect(VecD(p.vector.real())), 1e-10);
    EXPECT_LT(a.projector->constraint_defect(VecD(p.vector.imag())), 1e-10);
    EXPECT_NEAR(a.layout->norm(p.vector), 1.0, 1e-12);
  }
}

GTEST_TEST(SpectrumTest, Preconditions) {
  const LinearOperator a = zero_generator(8, 0.0);
  try {
    compute_spectrum(a, 100000, EigenStrategy::shift_invert);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::precondition);
  }
  SpectrumOptions o;
  o.max_iterations = 1;
  o.guard_vectors = 1;
  const Grid g = build_grid(GridSpec{kTwoPi, kTwoPi, 16, 16});
  EquilibriumParams ep;
  ep.velocity_amplitude = 2.0;
  const LinearOperator b = assemble_generator(
      make_equilibrium(EquilibriumKind::taylor_vortex, g, ep, 1.0, 1.0), GeneratorOptions{});
  try {
    compute_spectrum(b, 12, EigenStrategy::shift_invert, o);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::numerical);
    EXPECT_FALSE(e.detail().empty());
  }
}

GTEST_TEST(SpectrumTest, OrganizeClustersAndOrders) {
  SpectrumReport r;
  const double vals[][2] = {{2.0, 0.0}, {0.5, 1.0}, {0.5, -1.0}, {2.0, 1e-9}, {-1.0, 0.0}};
  for (int i = 0; i < 5; ++i) {
    const auto& v = vals[i];
    EigenPair p;
    p.lambda = Complex(v[0], v[1]);
    p.vector = VecC::Unit(5, i);
    r.pairs.push_back(p);
  }
  organize_spectrum(r);
  for (std::size_t i = 1; i < r.pairs.size(); ++i) {
    EXPECT_GE(r.pairs[i - 1].lambda.real(), r.pairs[i].lambda.real());
  }
  EXPECT_EQ(r.n_unstable, 4);
  EXPECT_EQ(r.m_distinct, 3);
  EXPECT_EQ(r.k_max, 2);
  EXPECT_TRUE(r.complete);
  int sum = 0;
  for (int l : r.multiplicities) sum += l;
  EXPECT_EQ(sum, r.n_unstable);
}

GTEST_TEST(SpectrumTest, TableHasOneRowPerPair) {
  const SpectrumReport r = compute_spectrum(zero_generator(8, 0.0), 3, EigenStrategy::dense);
  std::ostringstream os;
  write_spectrum_table(os, r);
  int rows = 0;
  std::istringstream is(os.str());
  for (std::string line; std::getline(is, line);) rows += line[0] != '#';
  EXPECT_EQ(rows, 3);
  EXPECT_EQ(parse_eigen_strategy("dense"), EigenStrategy::dense);
  EXPECT_THROW(parse_eigen_strategy("lanczos"), Error);
}

}  // namespace
}  // namespace mhdlab
