#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "mhdlab/commutator.hpp"

namespace mhdlab {

struct CarlemanParams {
  double tau = 1.0;
  double delta0 = 0.5;
  double epsilon = 0.5;
  double rho = 1.0;
  double k = 1.0;
};

struct CarlemanCoefficients {
  double c_grad = 0.0;
  double c_zero = 0.0;
  double c_rhs = 0.0;
  /// c_grad <= 0: tau is below the range where the estimate is informative.
  bool tau_too_small = false;
};

/// c_grad = delta0 (2 rho tau - epsilon/2), c_zero = 4 rho k^2 tau^3 (1 - delta0),
/// c_rhs = 1 + 1/epsilon. Throws ErrorKind::precondition unless
/// 0 < delta0 < 1, epsilon > 0 and tau > 0.
CarlemanCoefficients coefficients(const CarlemanParams& p);

/// Compactly supported bump a (1 - r^2/R^2)^4 for r < R, zero elsewhere.
/// It is C^3, so value and gradient vanish on its support boundary.
struct Bump {
  double cx = 0.0;
  double cy = 0.0;
  double radius = 1.0;
  double amplitude = 1.0;

  double value(double x, double y) const;
  std::array<double, 2> gradient(double x, double y) const;
  double laplacian(double x, double y) const;
};

/// Seeded bumps whose supports (plus one grid spacing) lie in G.
std::vector<Bump> random_bumps(const RegionSet& regions, int count, std::uint64_t seed);

/// Gaussians exp(-r^2 / (2 s^2)) centered in G, used to calibrate the
/// second-order correction of the zero-order coefficient.
struct Gaussian {
  double cx = 0.0;
  double cy = 0.0;
  double width = 1.0;
};

std::vector<Gaussian> calibration_gaussians(const RegionSet& regions, int count,
                                            std::uint64_t seed);

/// Integrated check of
///   c_grad int e^{2 tau psi} |grad w|^2 + (c_zero - c2 tau^2) int e^{2 tau psi} |w|^2
///     <= c_rhs int e^{2 tau psi} |lap w|^2
/// for w with zero Cauchy data on the boundary of G (so the divergence term
/// integrates to zero). All integrals are scaled by exp(-log_shift).
struct EstimateReport {
  double tau = 0.0;
  CarlemanCoefficients coeffs;
  double correction = 0.0;  ///< c2 tau^2
  double weighted_grad = 0.0;
  double weighted_zero = 0.0;
  double weighted_lap = 0.0;
  double lhs_grad = 0.0;
  double lhs_zero = 0.0;
  double rhs_main = 0.0;
  double margin = 0.0;
  double log_shift = 0.0;
  bool pass = false;
};

/// Throws ErrorKind::precondition when the support of w (plus one grid
/// spacing) is not inside G, since the Cauchy data would not vanish on its
/// boundary.
EstimateReport integrated_inequality_check(const Bump& w, const WeightField& psi,
                                           const CarlemanParams& p, const RegionSet& regions,
                                           double c2 = 0.0);
EstimateReport integrated_inequality_check(const Gaussian& w, const WeightField& psi,
                                           const CarlemanParams& p, double c2 = 0.0);

/// Largest c2 >= 0 needed by the calibration Gaussians over the tau list.
/// Pairs where c_grad <= 0, or where the weight would push the Gaussian's
/// mass toward its truncation radius, are skipped.
double calibrate_tau2_correction(const std::vector<Gaussian>& gaussians, const WeightField& psi,
                                 const std::vector<double>& taus, double delta0 = 0.5,
                                 double epsilon = 0.5);

/// tau_j = 2^j / diam(G) for j in [j_min, j_max].
std::vector<double> tau_grid(const RegionSet& regions, int j_min = -2, int j_max = 5);

struct InequalitySweep {
  std::vector<double> taus;
  double c2 = 0.0;
  /// pass_count[t] = number of fields passing at taus[t].
  std::vector<int> pass_count;
  int fields = 0;
  /// Smallest grid tau from which every field passes at every larger tau;
  /// negative when no such tau exists.
  double tau0 = -1.0;
  /// Log-log slope of (lhs_zero / weighted_zero) over the taus >= tau0.
  double zero_order_slope = 0.0;
  /// Per tau, the report of the field with the smallest relative margin.
  std::vector<EstimateReport> worst;
};

InequalitySweep integrated_inequality_sweep(const std::vector<Bump>& fields,
                                            const WeightField& psi, const RegionSet& regions,
                                            const std::vector<double>& taus, double c2,
                                            double delta0 = 0.5, double epsilon = 0.5);

/// Columns: tau lhs_grad lhs_zero rhs margin pass passed_fields.
void write_sweep_table(std::ostream& os, const InequalitySweep& sweep);

// ---------------------------------------------------------------------------
// Vanishing argument

/// Seeded smooth state and pressure that vanish identically on omega (and
/// on the nodes within stencil reach of it). The velocity and magnetic parts
/// are discrete curls of stream functions, hence divergence-free.
struct SyntheticSolution {
  StateVector state;
  ScalarField pressure;
};

SyntheticSolution omega_vanishing_state(const RegionSet& regions, std::uint64_t seed);

struct TauBound {
  double tau = 0.0;
  double state_bound = 0.0;     ///< C/tau^4 C1 + const/tau^3 C2
  double pressure_bound = 0.0;  ///< C/tau^3 C1 + const/tau^2 C2
};

struct TauSweep {
  /// int over omega_star of |grad p|^2 + |p|^2 + |u|^2.
  double c1 = 0.0;
  /// int over omega_star of |grad u|^2 + |u|^2 + |p|^2.
  double c2 = 0.0;
  std::vector<TauBound> rows;
  bool monotone = false;
  /// Smallest log2(bound(tau) / bound(2 tau)) over tau pairs in the list
  /// that differ by a factor of two (0 when there are none).
  double state_exponent = 0.0;
  double pressure_exponent = 0.0;
};

/// Throws ErrorKind::precondition if the state or pressure does not vanish
/// on omega to 1e-10 relative, and ErrorKind::empty_input for an empty tau
/// list.
TauSweep tau_sweep_vanishing(const StateVector& s, const ScalarField& p, const RegionSet& regions,
                             const std::vector<double>& taus, double c_big = 1.0,
                             double c_const = 1.0);

/// Columns: tau state_bound pressure_bound.
void write_tau_table(std::ostream& os, const TauSweep& sweep);

// ---------------------------------------------------------------------------
// Combined estimate

/// Constants of the combined estimate. They are computable upper-bound
/// surrogates for quantities that are only asserted to exist.
struct FinalConstants {
  double c_lambda_e = 0.0;  ///< eigenvalue and equilibrium terms
  double c_equilibrium = 0.0;
  double c_chi_big = 0.0;
  double c_chi = 0.0;
  double c2 = 0.0;  ///< second-order correction of the cubic coefficient
};

/// c_lambda_e = 1 + |mu| + grad_bound, c_equilibrium = (sup|y_e| + sup|B_e|)^2,
/// c_chi_big = (sup|grad chi| + sup|lap chi|)^2, c_chi = 1 + sup|grad chi|^2.
FinalConstants default_final_constants(const Equilibrium& eq, const CutoffField& chi,
                                       Complex mu, double c2 = 0.0);

struct FinalEstimateRow {
  double tau = 0.0;
  double lhs = 0.0;
  double rhs = 0.0;
  double log_shift = 0.0;
  /// c_grad <= 0: the brackets are undefined and the row is not evaluated.
  bool tau_too_small = false;
  bool pass = false;
};

/// Two-sided evaluation of the combined weighted estimate: left side over
/// omega1 + omega_star for the cut-off state and pressure, right side over
/// omega_star for the state itself.
std::vector<FinalEstimateRow> final_estimate_eval(const ComplexStateVector& s,
                                                  const ComplexScalarField& p,
                                                  const CutoffField& chi, const WeightField& psi,
                                                  const RegionSet& regions,
                                                  const FinalConstants& constants,
                                                  const std::vector<double>& taus,
                                                  double delta0 = 0.5, double epsilon = 0.5);

}  // namespace mhdlab
