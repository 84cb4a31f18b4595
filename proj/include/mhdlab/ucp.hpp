#pragma once

#include <cstdint>
#include <vector>

#include "mhdlab/spectrum.hpp"

namespace mhdlab {

/// Gram matrix of eigenfunctions restricted to a control region.
struct GramMatrix {
  int cluster = -1;
  Complex lambda;
  /// entries(a, b) = <phi_a, phi_b> over omega, discrete L2.
  Eigen::MatrixXcd entries;
  double sigma_min = 0.0;
  double threshold = 0.0;
  bool passed = false;
};

/// Pairings (u_j, phi_a) over omega for one eigenvalue: multiplicity rows,
/// one column per actuator.
struct KalmanMatrix {
  int cluster = -1;
  Complex lambda;
  Eigen::MatrixXcd entries;
  VecD singular_values;
  int multiplicity = 0;
  int rank = 0;
  bool full_rank = false;
};

/// Unknown indices (all four components) whose node lies in omega.
std::vector<int> omega_unknowns(const StateLayout& layout, const NodeSet& omega);

/// Copy of x with every unknown outside omega set to zero.
VecC restrict_to(const VecC& x, const std::vector<int>& unknowns);

/// Gram test for the eigenfunctions (columns) of one eigenvalue. Passes iff
/// the smallest singular value is at least the threshold.
GramMatrix ucp_gram_test(const Eigen::MatrixXcd& eigenfunctions, const StateLayout& layout,
                         const NodeSet& omega, double threshold = 1e-6);

/// Gram tests for every unstable cluster of an adjoint spectrum, using the
/// orthonormal cluster bases.
std::vector<GramMatrix> ucp_gram_tests(const SpectrumReport& adjoint, const NodeSet& omega,
                                       double threshold = 1e-6);

/// Real control fields supported in omega (columns over the interior
/// unknowns), orthonormal over omega. They are seeded random combinations of
/// the real and imaginary parts of the omega-restricted unstable adjoint
/// eigenfunctions. k <= 0 selects K = max multiplicity. Throws
/// ErrorKind::actuator when a Gram test fails.
Eigen::MatrixXd select_actuators(const SpectrumReport& adjoint, const NodeSet& omega, int k = 0,
                                 std::uint64_t seed = 11, double gram_threshold = 1e-6);

KalmanMatrix kalman_matrix(const Eigen::MatrixXd& actuators, const Eigen::MatrixXcd& eigenfunctions,
                           const StateLayout& layout, const NodeSet& omega);

/// One matrix per unstable cluster of the adjoint spectrum. The condition
/// holds iff every entry has full_rank.
std::vector<KalmanMatrix> kalman_rank(const Eigen::MatrixXd& actuators,
                                      const SpectrumReport& adjoint, const NodeSet& omega);

/// Replaces the omega part of the second column by that of the first, so
/// the two functions agree on omega. Used to exercise the failing branch.
Eigen::MatrixXcd make_omega_degenerate(const Eigen::MatrixXcd& eigenfunctions,
                                       const StateLayout& layout, const NodeSet& omega);

}  // namespace mhdlab
