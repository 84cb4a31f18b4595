#include "mhdlab/stabilize.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <iomanip>
#include <limits>
#include <ostream>
#include <random>
#include <sstream>

#include <Eigen/Eigenvalues>
#include <Eigen/LU>
#include <Eigen/SVD>

#include "mhdlab/sparse_lu.hpp"

namespace mhdlab {

namespace {

// Orthonormal real basis of the span of Re/Im parts of the unstable cluster
// bases; the span must have dimension n_unstable.
Eigen::MatrixXd real_unstable_basis(const SpectrumReport& report, const char* which) {
  const int n = report.layout ? report.layout->size() : 0;
  const int dim = report.n_unstable;
  if (dim == 0) return Eigen::MatrixXd(n, 0);
  int cols = 0;
  for (int c : report.unstable_clusters) cols += static_cast<int>(report.clusters[c].basis.cols());
  Eigen::MatrixXd x(n, 2 * cols);
  int k = 0;
  for (int c : report.unstable_clusters) {
    const Eigen::MatrixXcd& b = report.clusters[c].basis;
    for (Eigen::Index j = 0; j < b.cols(); ++j) {
      x.col(k++) = b.col(j).real();
      x.col(k++) = b.col(j).imag();
    }
  }
  const Eigen::JacobiSVD<Eigen::MatrixXd> svd(x, Eigen::ComputeThinU);
  const VecD& s = svd.singularValues();
  int rank = 0;
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    if (s[i] > 1e-8 * s[0]) ++rank;
  }
  if (rank != dim) {
    std::ostringstream os;
    os << which << " unstable vectors span dimension " << rank << ", expected " << dim;
    fail(ErrorKind::projection, os.str());
  }
  return svd.matrixU().leftCols(dim);
}

double condition_number(const Eigen::MatrixXd& m) {
  if (m.size() == 0) return 1.0;
  const VecD s = Eigen::JacobiSVD<Eigen::MatrixXd>(m).singularValues();
  return s[s.size() - 1] > 0.0 ? s[0] / s[s.size() - 1] : std::numeric_limits<double>::infinity();
}

std::vector<Complex> eigenvalues_of(const Eigen::MatrixXd& m) {
  std::vector<Complex> out;
  if (m.rows() == 0) return out;
  const Eigen::EigenSolver<Eigen::MatrixXd> es(m, false);
  for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) out.push_back(es.eigenvalues()[i]);
  std::sort(out.begin(), out.end(), [](Complex a, Complex b) {
    return a.real() != b.real() ? a.real() > b.real() : a.imag() > b.imag();
  });
  return out;
}

using AmplitudeRule = std::function<VecD(const VecD& x, std::size_t step)>;

SimulationTrace run_scheme(const LinearOperator& a, const UnstableProjection& p,
                           const ControlProfiles& profiles, const AmplitudeRule& rule,
                           const VecD& y0, const SimulationOptions& opts,
                           std::vector<VecD>* states) {
  if (!a.projector || !a.layout) fail(ErrorKind::shape, "simulation needs an assembled generator");
  if (!(opts.dt > 0.0) || !(opts.t_final > 0.0)) {
    fail(ErrorKind::config, "time step and horizon must be positive");
  }
  const int n = a.size();
  if (y0.size() != n) fail(ErrorKind::shape, "initial state size mismatch");
  if (profiles.fields.rows() != n) fail(ErrorKind::shape, "control profile size mismatch");
  const double area = a.layout->cell_area();

  SparseMatrix block(n, n);
  block.setIdentity();
  block = block / opts.dt - a.matrix;
  const SparseMatrix& c = a.projector->kept();
  const SparseLu lu(saddle_matrix(block, c));
  const int rows = lu.rows();

  const auto steps = static_cast<std::size_t>(std::llround(opts.t_final / opts.dt));
  SimulationTrace tr;
  VecD x = a.projector->project(y0);
  const double e0 = area * x.squaredNorm();
  VecD rhs = VecD::Zero(rows);
  for (std::size_t s = 0; s <= steps; ++s) {
    const VecD amp = rule(x, s);
    const double e = area * x.squaredNorm();
    tr.times.push_back(static_cast<double>(s) * opts.dt);
    tr.energies.push_back(e);
    tr.unstable_energies.push_back(area * unstable_part(x, p).squaredNorm());
    tr.amplitudes.push_back(amp);
    if (states) states->push_back(x);
    if (e0 > 0.0 && e > opts.blowup * e0) {
      std::ostringstream os;
      os << "energy grew by more than " << opts.blowup << "x at t=" << tr.times.back();
      fail(ErrorKind::instability, os.str());
    }
    if (!std::isfinite(e)) fail(ErrorKind::instability, "non-finite energy");
    if (s == steps) break;
    rhs.head(n) = x / opts.dt;
    if (amp.size() > 0) rhs.head(n) += profiles.fields * amp;
    x = lu.solve(rhs).head(n);
  }
  tr.final_state = x;
  return tr;
}

void check_time_step(const UnstableProjection& p, const FeedbackGain* gain, double dt) {
  double rate = p.retained_radius;
  if (gain) {
    for (double pole : gain->poles) rate = std::max(rate, std::abs(pole));
  }
  if (dt * rate > 0.5) {
    std::ostringstream os;
    os << "dt=" << dt << " does not resolve the fastest retained rate " << rate
       << " (dt * rate must be <= 0.5)";
    fail(ErrorKind::precondition, os.str());
  }
}

}  // namespace

UnstableProjection build_unstable_projection(const LinearOperator& generator,
                                             const SpectrumReport& forward,
                                             const SpectrumReport& adjoint) {
  if (!generator.layout) fail(ErrorKind::shape, "generator has no layout");
  if (forward.n_unstable != adjoint.n_unstable) {
    std::ostringstream os;
    os << "forward and adjoint spectra disagree on N: " << forward.n_unstable << " vs "
       << adjoint.n_unstable;
    fail(ErrorKind::projection, os.str());
  }
  UnstableProjection p;
  p.layout = generator.layout;
  const double area = p.layout->cell_area();
  p.forward = real_unstable_basis(forward, "forward");
  p.adjoint = real_unstable_basis(adjoint, "adjoint");
  for (const EigenPair& e : forward.pairs) p.retained_radius = std::max(p.retained_radius, std::abs(e.lambda));
  for (int c : forward.unstable_clusters) {
    for (int m : forward.clusters[c].members) p.eigenvalues.push_back(forward.pairs[m].lambda);
  }
  const int dim = p.dimension();
  p.pairing = area * p.adjoint.transpose() * p.forward;
  p.condition = condition_number(p.pairing);
  if (p.condition > 1e10) {
    std::ostringstream os;
    os << "pairing matrix is ill-conditioned: cond=" << p.condition;
    fail(ErrorKind::projection, os.str());
  }
  Eigen::MatrixXd av(generator.size(), dim);
  for (int j = 0; j < dim; ++j) av.col(j) = generator.apply(VecD(p.forward.col(j)));
  p.block = dim ? Eigen::MatrixXd(p.pairing.partialPivLu().solve(area * p.adjoint.transpose() * av))
                : Eigen::MatrixXd(0, 0);
  return p;
}

VecD project_unstable(const VecD& x, const UnstableProjection& p) {
  if (p.dimension() == 0) return VecD(0);
  if (x.size() != p.forward.rows()) fail(ErrorKind::shape, "state size mismatch");
  return p.pairing.partialPivLu().solve(p.layout->cell_area() * (p.adjoint.transpose() * x));
}

VecD unstable_part(const VecD& x, const UnstableProjection& p) {
  if (p.dimension() == 0) return VecD::Zero(x.size());
  return p.forward * project_unstable(x, p);
}

ControlProfiles control_profiles(const LinearOperator& generator, const Eigen::MatrixXd& actuators,
                                 const NodeSet& omega) {
  if (!generator.projector || !generator.layout) {
    fail(ErrorKind::shape, "control profiles need an assembled generator");
  }
  if (actuators.rows() != generator.size()) fail(ErrorKind::shape, "actuator size mismatch");
  const std::vector<int> inside = omega_unknowns(*generator.layout, omega);
  std::vector<char> mask(static_cast<std::size_t>(generator.size()), 0);
  for (int k : inside) mask[k] = 1;
  ControlProfiles out;
  out.fields = Eigen::MatrixXd::Zero(actuators.rows(), actuators.cols());
  for (Eigen::Index j = 0; j < actuators.cols(); ++j) {
    const VecD pu = generator.projector->project(VecD(actuators.col(j)));
    for (int k : inside) out.fields(k, j) = pu[k];
    const VecD spread = generator.projector->project(VecD(out.fields.col(j)));
    double outside = 0.0;
    for (Eigen::Index k = 0; k < spread.size(); ++k) {
      if (!mask[k]) outside = std::max(outside, std::abs(spread[k]));
    }
    const double top = spread.cwiseAbs().maxCoeff();
    if (top > 0.0) out.leakage = std::max(out.leakage, outside / top);
  }
  return out;
}

Eigen::MatrixXd input_map(const LinearOperator& generator, const UnstableProjection& p,
                          const ControlProfiles& profiles) {
  const int dim = p.dimension();
  const Eigen::Index k = profiles.fields.cols();
  if (dim == 0) return Eigen::MatrixXd(0, k);
  Eigen::MatrixXd pf(profiles.fields.rows(), k);
  for (Eigen::Index j = 0; j < k; ++j) {
    pf.col(j) = generator.projector->project(VecD(profiles.fields.col(j)));
  }
  return p.pairing.partialPivLu().solve(p.layout->cell_area() * (p.adjoint.transpose() * pf));
}

FeedbackGain synthesize_feedback(const Eigen::MatrixXd& block, const Eigen::MatrixXd& input,
                                 double gamma, std::uint64_t seed) {
  if (!(gamma > 0.0)) fail(ErrorKind::config, "target decay gamma must be positive");
  const Eigen::Index n = block.rows();
  if (block.cols() != n || input.rows() != n) fail(ErrorKind::shape, "block/input shape mismatch");
  const Eigen::Index k = input.cols();
  FeedbackGain out;
  out.gamma = gamma;
  out.gain = Eigen::MatrixXd::Zero(k, n);
  out.max_real = -std::numeric_limits<double>::infinity();
  if (n == 0) return out;

  // PBH: rank [lambda I - block, input] = n at every eigenvalue.
  Eigen::MatrixXcd pbh(n, n + k);
  const double scale = std::max(1.0, std::max(block.norm(), input.norm()));
  for (Complex lambda : eigenvalues_of(block)) {
    pbh.leftCols(n) = lambda * Eigen::MatrixXcd::Identity(n, n) - block.cast<Complex>();
    pbh.rightCols(k) = input.cast<Complex>();
    const VecD s = Eigen::JacobiSVD<Eigen::MatrixXcd>(pbh).singularValues();
    if (k == 0 || s[n - 1] <= 1e-8 * scale) {
      std::ostringstream os;
      os << "unstable mode at lambda=" << lambda.real() << (lambda.imag() < 0 ? "" : "+")
         << lambda.imag() << "i is not reachable from the actuators";
      fail(ErrorKind::uncontrollable, os.str());
    }
  }

  for (Eigen::Index i = 0; i < n; ++i) {
    out.poles.push_back(-gamma * (1.0 + 0.5 * static_cast<double>(i) /
                                            static_cast<double>(std::max<Eigen::Index>(n - 1, 1))));
  }
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const Eigen::MatrixXd id = Eigen::MatrixXd::Identity(n, n);
  for (int attempt = 0; attempt < 50; ++attempt) {
    Eigen::MatrixXd g(k, n);
    for (Eigen::Index j = 0; j < n; ++j) {
      for (Eigen::Index i = 0; i < k; ++i) g(i, j) = normal(rng);
    }
    Eigen::MatrixXd v(n, n);
    for (Eigen::Index j = 0; j < n; ++j) {
      v.col(j) = (out.poles[j] * id - block).partialPivLu().solve(input * g.col(j));
    }
    if (condition_number(v) > 1e10) continue;
    // (block + input F) v_j = pole_j v_j with F = g v^{-1}.
    const Eigen::MatrixXd f = v.transpose().partialPivLu().solve(g.transpose()).transpose();
    out.gain = -f;
    out.closed_loop = eigenvalues_of(block - input * out.gain);
    out.max_real = out.closed_loop.front().real();
    if (out.max_real <= -gamma + 1e-8) return out;
  }
  std::ostringstream os;
  os << "pole placement missed the target: max Re = " << out.max_real << " > " << -gamma;
  fail(ErrorKind::numerical, os.str());
}

SimulationTrace simulate_closed_loop(const LinearOperator& generator, const UnstableProjection& p,
                                     const FeedbackGain& gain, const ControlProfiles& profiles,
                                     const VecD& y0, const SimulationOptions& opts) {
  check_time_step(p, opts.feedback ? &gain : nullptr, opts.dt);
  const Eigen::Index k = profiles.fields.cols();
  if (opts.feedback && (gain.gain.rows() != k || gain.gain.cols() != p.dimension())) {
    fail(ErrorKind::shape, "gain does not match the actuators and the unstable dimension");
  }
  const AmplitudeRule rule = [&](const VecD& x, std::size_t) -> VecD {
    if (!opts.feedback || p.dimension() == 0) return VecD::Zero(k);
    return -(gain.gain * project_unstable(x, p));
  };
  return run_scheme(generator, p, profiles, rule, y0, opts, nullptr);
}

SimulationTrace simulate_forced(const LinearOperator& generator, const UnstableProjection& p,
                                const ControlProfiles& profiles,
                                const std::vector<VecD>& amplitudes, const VecD& y0,
                                const SimulationOptions& opts) {
  check_time_step(p, nullptr, opts.dt);
  const Eigen::Index k = profiles.fields.cols();
  const AmplitudeRule rule = [&](const VecD&, std::size_t step) -> VecD {
    if (step < amplitudes.size()) return amplitudes[step];
    return VecD::Zero(k);
  };
  return run_scheme(generator, p, profiles, rule, y0, opts, nullptr);
}

double variation_of_constants_residual(const LinearOperator& generator,
                                       const UnstableProjection& p, const FeedbackGain& gain,
                                       const ControlProfiles& profiles, const VecD& y0,
                                       const SimulationOptions& opts) {
  check_time_step(p, &gain, opts.dt);
  const Eigen::Index k = profiles.fields.cols();
  std::vector<VecD> closed, open, forced;
  const SimulationTrace tc = run_scheme(
      generator, p, profiles,
      [&](const VecD& x, std::size_t) -> VecD {
        if (p.dimension() == 0) return VecD::Zero(k);
        return -(gain.gain * project_unstable(x, p));
      },
      y0, opts, &closed);
  run_scheme(
      generator, p, profiles, [&](const VecD&, std::size_t) -> VecD { return VecD::Zero(k); }, y0,
      opts, &open);
  run_scheme(
      generator, p, profiles,
      [&](const VecD&, std::size_t s) -> VecD { return tc.amplitudes[s]; },
      VecD::Zero(y0.size()), opts, &forced);
  double worst = 0.0;
  double scale = 0.0;
  for (std::size_t s = 0; s < closed.size(); ++s) {
    worst = std::max(worst, (closed[s] - open[s] - forced[s]).norm());
    scale = std::max(scale, closed[s].norm());
  }
  return scale > 0.0 ? worst / scale : worst;
}

DecayFit measure_decay(const std::vector<double>& times, const std::vector<double>& energies,
                       double t_start, double t_end) {
  if (times.size() != energies.size()) fail(ErrorKind::shape, "trace columns differ in length");
  std::vector<double> t;
  std::vector<double> y;
  for (std::size_t i = 0; i < times.size(); ++i) {
    if (times[i] < t_start || times[i] > t_end) continue;
    if (!(energies[i] > 0.0)) {
      std::ostringstream os;
      os << "non-positive energy " << energies[i] << " at t=" << times[i];
      fail(ErrorKind::fit, os.str());
    }
    t.push_back(times[i]);
    y.push_back(std::log(energies[i]));
  }
  const int n = static_cast<int>(t.size());
  if (n < 10) {
    std::ostringstream os;
    os << "decay fit needs at least 10 samples in [" << t_start << ", " << t_end << "], got " << n;
    fail(ErrorKind::fit, os.str());
  }
  double tm = 0.0, ym = 0.0;
  for (int i = 0; i < n; ++i) {
    tm += t[i];
    ym += y[i];
  }
  tm /= n;
  ym /= n;
  double sxx = 0.0, sxy = 0.0;
  for (int i = 0; i < n; ++i) {
    sxx += (t[i] - tm) * (t[i] - tm);
    sxy += (t[i] - tm) * (y[i] - ym);
  }
  if (!(sxx > 0.0)) fail(ErrorKind::fit, "decay window has no time spread");
  const double slope = sxy / sxx;
  double rss = 0.0;
  for (int i = 0; i < n; ++i) {
    const double r = y[i] - ym - slope * (t[i] - tm);
    rss += r * r;
  }
  DecayFit fit;
  fit.rate = -slope;
  fit.half_width = 1.96 * std::sqrt(rss / (n - 2) / sxx);
  fit.samples = n;
  return fit;
}

DecayFit measure_decay(const SimulationTrace& trace, double t_start, double t_end) {
  return measure_decay(trace.times, trace.energies, t_start, t_end);
}

void write_trace(std::ostream& os, const SimulationTrace& trace) {
  os << "# t energy_total energy_unstable";
  const Eigen::Index k = trace.amplitudes.empty() ? 0 : trace.amplitudes.front().size();
  for (Eigen::Index j = 0; j < k; ++j) os << " a_" << j + 1;
  os << '\n' << std::setprecision(12);
  for (std::size_t i = 0; i < trace.times.size(); ++i) {
    os << trace.times[i] << ' ' << trace.energies[i] << ' ' << trace.unstable_energies[i];
    for (Eigen::Index j = 0; j < trace.amplitudes[i].size(); ++j) os << ' ' << trace.amplitudes[i][j];
    os << '\n';
  }
}

void write_gain(std::ostream& os, const FeedbackGain& gain) {
  os << "# gain " << gain.gain.rows() << " x " << gain.gain.cols() << ", gamma " << gain.gamma
     << '\n'
     << std::setprecision(17);
  for (Eigen::Index i = 0; i < gain.gain.rows(); ++i) {
    for (Eigen::Index j = 0; j < gain.gain.cols(); ++j) {
      os << (j ? " " : "") << gain.gain(i, j);
    }
    os << '\n';
  }
}

}  // namespace mhdlab
