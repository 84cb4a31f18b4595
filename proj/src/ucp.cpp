#include "mhdlab/ucp.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include <Eigen/QR>
#include <Eigen/SVD>

namespace mhdlab {

std::vector<int> omega_unknowns(const StateLayout& layout, const NodeSet& omega) {
  return layout.unknowns_in(omega);
}

VecC restrict_to(const VecC& x, const std::vector<int>& unknowns) {
  VecC out = VecC::Zero(x.size());
  for (int u : unknowns) out[u] = x[u];
  return out;
}

namespace {

Eigen::MatrixXcd restrict_columns(const Eigen::MatrixXcd& x, const std::vector<int>& unknowns) {
  Eigen::MatrixXcd out = Eigen::MatrixXcd::Zero(x.rows(), x.cols());
  for (int u : unknowns) out.row(u) = x.row(u);
  return out;
}

void check_rows(const Eigen::MatrixXcd& x, const StateLayout& layout) {
  if (x.rows() != layout.size()) fail(ErrorKind::shape, "eigenfunction size mismatch");
}

}  // namespace

GramMatrix ucp_gram_test(const Eigen::MatrixXcd& eigenfunctions, const StateLayout& layout,
                         const NodeSet& omega, double threshold) {
  if (eigenfunctions.cols() == 0) {
    fail(ErrorKind::empty_input, "Gram test needs at least one eigenfunction");
  }
  check_rows(eigenfunctions, layout);
  const Eigen::MatrixXcd xw = restrict_columns(eigenfunctions, omega_unknowns(layout, omega));
  GramMatrix g;
  g.entries = layout.cell_area() * (xw.adjoint() * xw);
  // Symmetrize away rounding so the matrix is exactly Hermitian.
  g.entries = 0.5 * (g.entries + g.entries.adjoint()).eval();
  g.sigma_min = Eigen::JacobiSVD<Eigen::MatrixXcd>(g.entries).singularValues().minCoeff();
  g.threshold = threshold;
  g.passed = g.sigma_min >= threshold;
  return g;
}

std::vector<GramMatrix> ucp_gram_tests(const SpectrumReport& adjoint, const NodeSet& omega,
                                       double threshold) {
  std::vector<GramMatrix> out;
  for (int c : adjoint.unstable_clusters) {
    const EigenCluster& cl = adjoint.clusters[c];
    GramMatrix g = ucp_gram_test(cl.basis, *adjoint.layout, omega, threshold);
    g.cluster = c;
    g.lambda = cl.lambda;
    out.push_back(std::move(g));
  }
  return out;
}

Eigen::MatrixXd select_actuators(const SpectrumReport& adjoint, const NodeSet& omega, int k,
                                 std::uint64_t seed, double gram_threshold) {
  if (adjoint.unstable_clusters.empty()) return Eigen::MatrixXd(adjoint.layout->size(), 0);
  for (const GramMatrix& g : ucp_gram_tests(adjoint, omega, gram_threshold)) {
    if (!g.passed) {
      std::ostringstream os;
      os << "Gram test failed for cluster " << g.cluster << " (sigma_min " << g.sigma_min
         << "); no actuator set can reach it";
      fail(ErrorKind::actuator, os.str());
    }
  }
  if (k <= 0) k = adjoint.k_max;

  const StateLayout& layout = *adjoint.layout;
  const auto unknowns = omega_unknowns(layout, omega);
  int total = 0;
  for (int c : adjoint.unstable_clusters) total += 2 * adjoint.clusters[c].multiplicity;
  Eigen::MatrixXd cand(layout.size(), total);
  int col = 0;
  for (int c : adjoint.unstable_clusters) {
    const Eigen::MatrixXcd xw = restrict_columns(adjoint.clusters[c].basis, unknowns);
    for (Eigen::Index j = 0; j < xw.cols(); ++j) {
      cand.col(col++) = xw.col(j).real();
      cand.col(col++) = xw.col(j).imag();
    }
  }
  const double root_area = std::sqrt(layout.cell_area());
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(root_area * cand, Eigen::ComputeThinU);
  const VecD& sv = svd.singularValues();
  int rank = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i) {
    if (sv[i] > 1e-10 * sv[0]) ++rank;
  }
  if (k > rank) {
    std::ostringstream os;
    os << "requested " << k << " actuators but the restricted eigenfunctions span only "
       << rank << " real fields";
    fail(ErrorKind::actuator, os.str());
  }
  Eigen::MatrixXd q = svd.matrixU().leftCols(rank) / root_area;
  if (k < rank) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal;
    Eigen::MatrixXd mix(rank, k);
    for (Eigen::Index j = 0; j < k; ++j) {
      for (Eigen::Index i = 0; i < rank; ++i) mix(i, j) = normal(rng);
    }
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(mix);
    q = q * (qr.householderQ() * Eigen::MatrixXd::Identity(rank, k));
  }
  // Exact zeros outside omega.
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(layout.size(), k);
  for (int u : unknowns) out.row(u) = q.row(u);
  return out;
}

KalmanMatrix kalman_matrix(const Eigen::MatrixXd& actuators, const Eigen::MatrixXcd& eigenfunctions,
                           const StateLayout& layout, const NodeSet& omega) {
  check_rows(eigenfunctions, layout);
  if (actuators.rows() != layout.size()) fail(ErrorKind::shape, "actuator size mismatch");
  const Eigen::MatrixXcd xw = restrict_columns(eigenfunctions, omega_unknowns(layout, omega));
  KalmanMatrix km;
  km.multiplicity = static_cast<int>(eigenfunctions.cols());
  km.entries = layout.cell_area() * (xw.adjoint() * actuators.cast<Complex>());
  if (km.entries.size() > 0) {
    km.singular_values = Eigen::JacobiSVD<Eigen::MatrixXcd>(km.entries).singularValues();
    const double smax = km.singular_values.size() > 0 ? km.singular_values[0] : 0.0;
    for (Eigen::Index i = 0; i < km.singular_values.size(); ++i) {
      if (smax > 0.0 && km.singular_values[i] > 1e-8 * smax) ++km.rank;
    }
  }
  km.full_rank = km.rank == km.multiplicity;
  return km;
}

std::vector<KalmanMatrix> kalman_rank(const Eigen::MatrixXd& actuators,
                                      const SpectrumReport& adjoint, const NodeSet& omega) {
  std::vector<KalmanMatrix> out;
  for (int c : adjoint.unstable_clusters) {
    const EigenCluster& cl = adjoint.clusters[c];
    KalmanMatrix km = kalman_matrix(actuators, cl.basis, *adjoint.layout, omega);
    km.cluster = c;
    km.lambda = cl.lambda;
    out.push_back(std::move(km));
  }
  return out;
}

Eigen::MatrixXcd make_omega_degenerate(const Eigen::MatrixXcd& eigenfunctions,
                                       const StateLayout& layout, const NodeSet& omega) {
  check_rows(eigenfunctions, layout);
  if (eigenfunctions.cols() < 2) {
    fail(ErrorKind::precondition, "degenerate fixture needs two eigenfunctions");
  }
  Eigen::MatrixXcd out = eigenfunctions;
  for (int u : omega_unknowns(layout, omega)) out(u, 1) = out(u, 0);
  return out;
}

}  // namespace mhdlab
