#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "mhdlab/operators.hpp"

namespace mhdlab {

enum class EigenStrategy { dense, shift_invert };

EigenStrategy parse_eigen_strategy(const std::string& name);
const char* to_string(EigenStrategy s);

struct SpectrumOptions {
  /// Real shift for shift-invert; defaults to operator shift + 1.
  std::optional<double> target;
  /// Extra subspace vectors beyond how_many (0 selects max(8, how_many/2)).
  int guard_vectors = 0;
  int max_iterations = 200;
  /// Convergence threshold on ||P A v - lambda v|| / ||v|| scaled by
  /// max(1, |lambda|). The solver raises it to 1e-11 * ||A||_inf when that
  /// is larger, the level set by projection rounding.
  double tolerance = 1e-10;
  std::uint64_t seed = 7;
};

struct EigenPair {
  Complex lambda;
  /// Interior-unknown vector of unit discrete L2 norm.
  VecC vector;
  double residual = 0.0;
  int cluster = -1;
};

struct EigenCluster {
  Complex lambda;             ///< mean of the member eigenvalues
  std::vector<int> members;   ///< indices into SpectrumReport::pairs
  int multiplicity = 0;       ///< numerical eigenspace dimension
  bool unstable = false;
  /// Orthonormal basis (discrete L2) of the cluster's eigenspace.
  Eigen::MatrixXcd basis;
};

struct SpectrumReport {
  std::vector<EigenPair> pairs;
  std::vector<EigenCluster> clusters;
  int n_unstable = 0;          ///< N
  int m_distinct = 0;          ///< M
  std::vector<int> unstable_clusters;
  std::vector<int> multiplicities;  ///< l_i per unstable cluster
  int k_max = 0;               ///< K = max l_i
  double cluster_tolerance = 0.0;
  /// False when the computed list may cut an unstable cluster or contains no
  /// stable eigenvalue, in which case N is a lower bound.
  bool complete = false;
  int iterations = 0;
  std::string log;
  std::shared_ptr<const StateLayout> layout;
  std::string operator_label;

  ComplexStateVector eigenfunction(int i) const { return layout->to_state(pairs.at(i).vector); }
};

/// Rightmost eigenpairs of a projected generator.
SpectrumReport compute_spectrum(const LinearOperator& a, int how_many, EigenStrategy strategy,
                                const SpectrumOptions& opts = {});

/// Same computation on an adjoint operator; eigenvalues come out as the
/// conjugates of the forward ones.
SpectrumReport adjoint_spectrum(const LinearOperator& a_adj, int how_many,
                                EigenStrategy strategy = EigenStrategy::shift_invert,
                                const SpectrumOptions& opts = {});

/// ||P A v - lambda v|| / ||v|| in the discrete L2 norm.
double eigen_residual(const LinearOperator& a, Complex lambda, const VecC& v);

/// Groups pairs into clusters, orders them and fills N, M, l_i, K.
/// Exposed for tests; compute_spectrum calls it.
void organize_spectrum(SpectrumReport& report);

/// Spectrum table: index, Re, Im, residual, cluster id, l of the cluster.
void write_spectrum_table(std::ostream& os, const SpectrumReport& report);

}  // namespace mhdlab
