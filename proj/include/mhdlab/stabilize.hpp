#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <vector>

#include "mhdlab/ucp.hpp"

namespace mhdlab {

/// Biorthogonal projection onto the unstable invariant subspace of P A.
///
/// Forward and adjoint bases are real: they span the real and imaginary
/// parts of the unstable eigenvectors. With M = <W, V> (discrete L2),
/// coordinates are c = M^{-1} <W, x> and the unstable part is V c.
struct UnstableProjection {
  std::shared_ptr<const StateLayout> layout;
  Eigen::MatrixXd forward;  ///< V, interior unknowns x N
  Eigen::MatrixXd adjoint;  ///< W, interior unknowns x N
  Eigen::MatrixXd pairing;  ///< M = <W, V>
  /// Unstable block Lambda = M^{-1} <W, P A V>.
  Eigen::MatrixXd block;
  double condition = 1.0;
  std::vector<Complex> eigenvalues;
  /// Largest |lambda| among every computed forward eigenvalue.
  double retained_radius = 0.0;

  int dimension() const { return static_cast<int>(forward.cols()); }
};

/// Throws ErrorKind::projection when the real bases do not have dimension N
/// or the pairing matrix has condition number above 1e10.
UnstableProjection build_unstable_projection(const LinearOperator& generator,
                                             const SpectrumReport& forward,
                                             const SpectrumReport& adjoint);

/// Coordinates of x in the forward basis (length N).
VecD project_unstable(const VecD& x, const UnstableProjection& p);
/// V c for the coordinates of x.
VecD unstable_part(const VecD& x, const UnstableProjection& p);

/// Spatial control fields m * (P u_j): projection first, then localization,
/// so every field is exactly zero outside omega.
struct ControlProfiles {
  Eigen::MatrixXd fields;
  /// max over j of |P f_j| outside omega relative to max |P f_j|: the
  /// support spread the dynamics sees after projection.
  double leakage = 0.0;
};

ControlProfiles control_profiles(const LinearOperator& generator, const Eigen::MatrixXd& actuators,
                                 const NodeSet& omega);

/// N x K input map B = M^{-1} <W, P f_j>.
Eigen::MatrixXd input_map(const LinearOperator& generator, const UnstableProjection& p,
                          const ControlProfiles& profiles);

struct FeedbackGain {
  /// K x N; actuator amplitudes are -gain * coordinates.
  Eigen::MatrixXd gain;
  double gamma = 0.0;
  std::vector<double> poles;
  std::vector<Complex> closed_loop;
  /// Largest real part of eig(block - input * gain) (-inf when N = 0).
  double max_real = 0.0;
};

/// Real pole placement of block - input * gain onto distinct real poles in
/// [-1.5 gamma, -gamma]. Throws ErrorKind::uncontrollable when the
/// Popov-Belevitch-Hautus test fails, ErrorKind::config for gamma <= 0, and
/// ErrorKind::numerical if the placed spectrum misses the target.
FeedbackGain synthesize_feedback(const Eigen::MatrixXd& block, const Eigen::MatrixXd& input,
                                 double gamma, std::uint64_t seed = 5);

struct SimulationOptions {
  double t_final = 10.0;
  double dt = 1e-2;
  bool feedback = true;
  /// Energy above this multiple of the initial energy aborts the run.
  double blowup = 1e6;
};

struct SimulationTrace {
  std::vector<double> times;
  std::vector<double> energies;          ///< ||x||^2, discrete L2
  std::vector<double> unstable_energies;  ///< ||V c||^2
  std::vector<VecD> amplitudes;           ///< actuator amplitudes per step
  VecD final_state;
};

/// Backward Euler for d/dt x = P A x + P sum_j a_j f_j, solved in saddle
/// form with the constraint rows; amplitudes a = -gain c(x) are taken from
/// the current state. Throws ErrorKind::precondition when dt times the
/// largest retained |lambda| or placed pole exceeds 0.5, and
/// ErrorKind::instability on energy blow-up.
SimulationTrace simulate_closed_loop(const LinearOperator& generator, const UnstableProjection& p,
                                     const FeedbackGain& gain, const ControlProfiles& profiles,
                                     const VecD& y0, const SimulationOptions& opts);

/// Same scheme driven by a prescribed amplitude sequence (one entry per
/// step) instead of feedback.
SimulationTrace simulate_forced(const LinearOperator& generator, const UnstableProjection& p,
                                const ControlProfiles& profiles,
                                const std::vector<VecD>& amplitudes, const VecD& y0,
                                const SimulationOptions& opts);

/// max_n ||x_closed - x_open - x_forced|| / max_n ||x_closed||, where the
/// forced run starts from zero with the closed-loop amplitudes.
double variation_of_constants_residual(const LinearOperator& generator,
                                       const UnstableProjection& p, const FeedbackGain& gain,
                                       const ControlProfiles& profiles, const VecD& y0,
                                       const SimulationOptions& opts);

struct DecayFit {
  /// -d/dt log(energy): twice the amplitude decay rate.
  double rate = 0.0;
  double half_width = 0.0;  ///< 95% normal half-width of the slope
  int samples = 0;
};

/// Least-squares fit over samples with t_start <= t <= t_end. Throws
/// ErrorKind::fit for fewer than 10 samples or non-positive energies.
DecayFit measure_decay(const std::vector<double>& times, const std::vector<double>& energies,
                       double t_start, double t_end);
DecayFit measure_decay(const SimulationTrace& trace, double t_start, double t_end);

/// Columns: t energy_total energy_unstable a_1 ... a_K.
void write_trace(std::ostream& os, const SimulationTrace& trace);
/// Dense text, one matrix row per line.
void write_gain(std::ostream& os, const FeedbackGain& gain);

}  // namespace mhdlab
