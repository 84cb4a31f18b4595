#include "mhdlab/carleman.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>
#include <random>
#include <sstream>

namespace mhdlab {

namespace {

constexpr double kPassTolerance = 1e-8;
constexpr double kGaussianReach = 7.5;  // truncation radius in widths
constexpr int kMaxQuadraturePoints = 1200;

struct Box {
  double x0, x1, y0, y1;
};

double grad_psi_max(const WeightField& psi, const Box& b) {
  // |grad psi| = 2 |x - center| is largest at a corner.
  double best = 0.0;
  for (double x : {b.x0, b.x1}) {
    for (double y : {b.y0, b.y1}) {
      best = std::max(best, 2.0 * std::hypot(x - psi.center[0], y - psi.center[1]));
    }
  }
  return best;
}

double psi_max(const WeightField& psi, const Box& b) {
  // psi is convex, so its maximum over a box sits at a corner.
  double best = -std::numeric_limits<double>::infinity();
  for (double x : {b.x0, b.x1}) {
    for (double y : {b.y0, b.y1}) best = std::max(best, psi.at(x, y));
  }
  return best;
}

struct Integrals {
  double grad = 0.0;
  double zero = 0.0;
  double lap = 0.0;
  double log_shift = 0.0;
};

// Midpoint rule for the three weighted integrals over a box. The weight
// exp(2 tau (psi - psi_max)) factors into x and y parts.
template <class Field>
Integrals integrate(const Field& w, const Box& b, const WeightField& psi, double tau, double hq) {
  const int nx = std::clamp(static_cast<int>(std::ceil((b.x1 - b.x0) / hq)), 8, kMaxQuadraturePoints);
  const int ny = std::clamp(static_cast<int>(std::ceil((b.y1 - b.y0) / hq)), 8, kMaxQuadraturePoints);
  const double hx = (b.x1 - b.x0) / nx;
  const double hy = (b.y1 - b.y0) / ny;
  Integrals out;
  const double pmax = psi_max(psi, b);
  out.log_shift = 2.0 * tau * pmax;

  // psi - pmax = (x - c0)^2 + (y - c1)^2 - offset - pmax.
  const double base = -psi.offset - pmax;
  std::vector<double> ex(static_cast<std::size_t>(nx));
  std::vector<double> ey(static_cast<std::size_t>(ny));
  std::vector<double> xs(static_cast<std::size_t>(nx));
  std::vector<double> ys(static_cast<std::size_t>(ny));
  // Split the constant so neither factor under- or overflows.
  for (int i = 0; i < nx; ++i) {
    xs[i] = b.x0 + (i + 0.5) * hx;
    const double d = xs[i] - psi.center[0];
    ex[i] = 2.0 * tau * (d * d + 0.5 * base);
  }
  for (int j = 0; j < ny; ++j) {
    ys[j] = b.y0 + (j + 0.5) * hy;
    const double d = ys[j] - psi.center[1];
    ey[j] = 2.0 * tau * (d * d + 0.5 * base);
  }
  for (double& v : ex) v = std::exp(v);
  for (double& v : ey) v = std::exp(v);

  for (int j = 0; j < ny; ++j) {
    double g = 0.0;
    double z = 0.0;
    double l = 0.0;
    for (int i = 0; i < nx; ++i) {
      const double v = w.value(xs[i], ys[j]);
      if (v == 0.0) continue;
      const auto gr = w.gradient(xs[i], ys[j]);
      const double lp = w.laplacian(xs[i], ys[j]);
      g += ex[i] * (gr[0] * gr[0] + gr[1] * gr[1]);
      z += ex[i] * v * v;
      l += ex[i] * lp * lp;
    }
    out.grad += ey[j] * g;
    out.zero += ey[j] * z;
    out.lap += ey[j] * l;
  }
  const double area = hx * hy;
  out.grad *= area;
  out.zero *= area;
  out.lap *= area;
  return out;
}

EstimateReport assemble_report(const Integrals& in, const CarlemanParams& p, double c2) {
  EstimateReport r;
  r.tau = p.tau;
  r.coeffs = coefficients(p);
  r.correction = c2 * p.tau * p.tau;
  r.weighted_grad = in.grad;
  r.weighted_zero = in.zero;
  r.weighted_lap = in.lap;
  r.log_shift = in.log_shift;
  r.lhs_grad = r.coeffs.c_grad * in.grad;
  r.lhs_zero = std::max(0.0, r.coeffs.c_zero - r.correction) * in.zero;
  r.rhs_main = r.coeffs.c_rhs * in.lap;
  r.margin = r.rhs_main - r.lhs_grad - r.lhs_zero;
  r.pass = r.margin >= -kPassTolerance * r.rhs_main;
  return r;
}

Box bump_box(const Bump& w) {
  return {w.cx - w.radius, w.cx + w.radius, w.cy - w.radius, w.cy + w.radius};
}

Box gaussian_box(const Gaussian& w) {
  const double r = kGaussianReach * w.width;
  return {w.cx - r, w.cx + r, w.cy - r, w.cy + r};
}

double grid_spacing(const Grid& g) { return std::max(g.hx(), g.hy()); }

// True when every node within `reach` of (cx, cy) lies in G and the disc
// stays inside the domain.
bool disc_in_g(const RegionSet& regions, double cx, double cy, double reach) {
  const Grid& g = regions.grid;
  if (cx - reach < 0.0 || cx + reach > g.lx() || cy - reach < 0.0 || cy + reach > g.ly()) {
    return false;
  }
  const int i0 = std::max(0, static_cast<int>(std::floor((cx - reach) / g.hx())));
  const int i1 = std::min(g.points_x() - 1, static_cast<int>(std::ceil((cx + reach) / g.hx())));
  const int j0 = std::max(0, static_cast<int>(std::floor((cy - reach) / g.hy())));
  const int j1 = std::min(g.points_y() - 1, static_cast<int>(std::ceil((cy + reach) / g.hy())));
  for (int j = j0; j <= j1; ++j) {
    for (int i = i0; i <= i1; ++i) {
      if (std::hypot(g.x(i) - cx, g.y(j) - cy) <= reach && !regions.in_g(g.index(i, j))) {
        return false;
      }
    }
  }
  return true;
}

double quadrature_spacing(double scale, double tau, double grad_max) {
  double h = scale / 32.0;
  if (tau > 0.0 && grad_max > 0.0) h = std::min(h, 1.0 / (16.0 * tau * grad_max));
  return h;
}

double sq(double v) { return v * v; }

}  // namespace

CarlemanCoefficients coefficients(const CarlemanParams& p) {
  if (!(p.tau > 0.0) || !(p.delta0 > 0.0 && p.delta0 < 1.0) || !(p.epsilon > 0.0)) {
    std::ostringstream os;
    os << "Carleman parameters out of range: tau=" << p.tau << " delta0=" << p.delta0
       << " epsilon=" << p.epsilon;
    fail(ErrorKind::precondition, os.str());
  }
  CarlemanCoefficients c;
  c.c_grad = p.delta0 * (2.0 * p.rho * p.tau - p.epsilon / 2.0);
  c.c_zero = 4.0 * p.rho * p.k * p.k * p.tau * p.tau * p.tau * (1.0 - p.delta0);
  c.c_rhs = 1.0 + 1.0 / p.epsilon;
  c.tau_too_small = !(c.c_grad > 0.0);
  return c;
}

double Bump::value(double x, double y) const {
  const double r2 = sq(x - cx) + sq(y - cy);
  const double rr = radius * radius;
  if (r2 >= rr) return 0.0;
  const double s = 1.0 - r2 / rr;
  return amplitude * s * s * s * s;
}

std::array<double, 2> Bump::gradient(double x, double y) const {
  const double r2 = sq(x - cx) + sq(y - cy);
  const double rr = radius * radius;
  if (r2 >= rr) return {0.0, 0.0};
  const double s = 1.0 - r2 / rr;
  const double f = amplitude * 4.0 * s * s * s * (-2.0 / rr);
  return {f * (x - cx), f * (y - cy)};
}

double Bump::laplacian(double x, double y) const {
  const double r2 = sq(x - cx) + sq(y - cy);
  const double rr = radius * radius;
  if (r2 >= rr) return 0.0;
  const double s = 1.0 - r2 / rr;
  return amplitude * (-16.0 * s * s * s / rr + 48.0 * s * s * r2 / (rr * rr));
}

namespace {

struct GaussianEval {
  const Gaussian& g;
  double value(double x, double y) const {
    return std::exp(-(sq(x - g.cx) + sq(y - g.cy)) / (2.0 * g.width * g.width));
  }
  std::array<double, 2> gradient(double x, double y) const {
    const double v = value(x, y);
    const double s2 = g.width * g.width;
    return {-(x - g.cx) / s2 * v, -(y - g.cy) / s2 * v};
  }
  double laplacian(double x, double y) const {
    const double s2 = g.width * g.width;
    const double r2 = sq(x - g.cx) + sq(y - g.cy);
    return (r2 / (s2 * s2) - 2.0 / s2) * value(x, y);
  }
};

}  // namespace

std::vector<Bump> random_bumps(const RegionSet& regions, int count, std::uint64_t seed) {
  if (count < 0) fail(ErrorKind::config, "bump count must be nonnegative");
  const NodeSet g_nodes = regions.g_nodes();
  if (g_nodes.empty()) fail(ErrorKind::empty_input, "G has no nodes");
  const Grid& g = regions.grid;
  const double h = grid_spacing(g);
  const double r_min = 4.0 * h;
  const double r_max = std::max(r_min, 0.15 * regions.g_diameter());
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, g_nodes.size() - 1);
  std::uniform_real_distribution<double> radius(r_min, r_max);
  std::uniform_real_distribution<double> amp(0.5, 2.0);
  std::vector<Bump> out;
  out.reserve(static_cast<std::size_t>(count));
  long tries = 0;
  const long max_tries = 2000L * std::max(count, 1);
  while (static_cast<int>(out.size()) < count) {
    if (++tries > max_tries) {
      fail(ErrorKind::geometry, "cannot place bumps of radius >= 4h inside G");
    }
    const int idx = g_nodes[pick(rng)];
    Bump b;
    b.cx = g.x(g.ix(idx));
    b.cy = g.y(g.jy(idx));
    b.radius = radius(rng);
    b.amplitude = amp(rng);
    if (disc_in_g(regions, b.cx, b.cy, b.radius + h)) out.push_back(b);
  }
  return out;
}

std::vector<Gaussian> calibration_gaussians(const RegionSet& regions, int count,
                                            std::uint64_t seed) {
  if (count < 0) fail(ErrorKind::config, "Gaussian count must be nonnegative");
  const NodeSet g_nodes = regions.g_nodes();
  if (g_nodes.empty()) fail(ErrorKind::empty_input, "G has no nodes");
  const Grid& g = regions.grid;
  const double h = grid_spacing(g);
  const double diam = regions.g_diameter();
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, g_nodes.size() - 1);
  std::uniform_real_distribution<double> log_width(std::log(diam / 1000.0), std::log(diam / 40.0));
  std::vector<Gaussian> out;
  long tries = 0;
  const long max_tries = 2000L * std::max(count, 1);
  while (static_cast<int>(out.size()) < count) {
    if (++tries > max_tries) fail(ErrorKind::geometry, "cannot place calibration Gaussians in G");
    const int idx = g_nodes[pick(rng)];
    Gaussian w;
    w.cx = g.x(g.ix(idx));
    w.cy = g.y(g.jy(idx));
    w.width = std::exp(log_width(rng));
    if (disc_in_g(regions, w.cx, w.cy, kGaussianReach * w.width + h)) out.push_back(w);
  }
  return out;
}

EstimateReport integrated_inequality_check(const Bump& w, const WeightField& psi,
                                           const CarlemanParams& p, const RegionSet& regions,
                                           double c2) {
  if (w.amplitude != 0.0 &&
      !disc_in_g(regions, w.cx, w.cy, w.radius + grid_spacing(regions.grid))) {
    fail(ErrorKind::precondition, "test field support is not inside G; Cauchy data do not vanish");
  }
  if (w.amplitude == 0.0) return assemble_report(Integrals{}, p, c2);
  const Box b = bump_box(w);
  const double hq = quadrature_spacing(w.radius, p.tau, grad_psi_max(psi, b));
  return assemble_report(integrate(w, b, psi, p.tau, hq), p, c2);
}

EstimateReport integrated_inequality_check(const Gaussian& w, const WeightField& psi,
                                           const CarlemanParams& p, double c2) {
  const Box b = gaussian_box(w);
  const double hq =
      quadrature_spacing(2.0 * kGaussianReach * w.width / 4.0, p.tau, grad_psi_max(psi, b));
  return assemble_report(integrate(GaussianEval{w}, b, psi, p.tau, hq), p, c2);
}

double calibrate_tau2_correction(const std::vector<Gaussian>& gaussians, const WeightField& psi,
                                 const std::vector<double>& taus, double delta0, double epsilon) {
  double c2 = 0.0;
  for (double tau : taus) {
    const CarlemanParams p{tau, delta0, epsilon, psi.rho, psi.k};
    if (coefficients(p).tau_too_small) continue;
    for (const Gaussian& w : gaussians) {
      // The weight shifts the mass by about 2 tau |grad psi| s^2; keep it
      // within one width so the truncated tails stay negligible.
      if (tau * grad_psi_max(psi, gaussian_box(w)) * w.width > 1.0) continue;
      const EstimateReport r = integrated_inequality_check(w, psi, p, 0.0);
      if (r.margin >= 0.0 || !(r.weighted_zero > 0.0)) continue;
      c2 = std::max(c2, -r.margin / (tau * tau * r.weighted_zero));
    }
  }
  return c2;
}

std::vector<double> tau_grid(const RegionSet& regions, int j_min, int j_max) {
  if (j_max < j_min) fail(ErrorKind::config, "empty tau grid");
  const double diam = regions.g_diameter();
  std::vector<double> out;
  for (int j = j_min; j <= j_max; ++j) out.push_back(std::ldexp(1.0, j) / diam);
  return out;
}

InequalitySweep integrated_inequality_sweep(const std::vector<Bump>& fields,
                                            const WeightField& psi, const RegionSet& regions,
                                            const std::vector<double>& taus, double c2,
                                            double delta0, double epsilon) {
  if (taus.empty()) fail(ErrorKind::empty_input, "tau list is empty");
  if (fields.empty()) fail(ErrorKind::empty_input, "no test fields");
  InequalitySweep s;
  s.taus = taus;
  std::sort(s.taus.begin(), s.taus.end());
  s.c2 = c2;
  s.fields = static_cast<int>(fields.size());
  std::vector<double> log_tau;
  std::vector<double> log_coef;
  for (double tau : s.taus) {
    const CarlemanParams p{tau, delta0, epsilon, psi.rho, psi.k};
    int passed = 0;
    EstimateReport worst;
    double worst_rel = std::numeric_limits<double>::infinity();
    double coef_sum = 0.0;
    int coef_count = 0;
    for (const Bump& w : fields) {
      const EstimateReport r = integrated_inequality_check(w, psi, p, regions, c2);
      if (r.pass) ++passed;
      const double rel = r.rhs_main > 0.0 ? r.margin / r.rhs_main : r.margin;
      if (rel < worst_rel) {
        worst_rel = rel;
        worst = r;
      }
      if (r.lhs_zero > 0.0 && r.weighted_zero > 0.0) {
        coef_sum += std::log(r.lhs_zero / r.weighted_zero);
        ++coef_count;
      }
    }
    s.pass_count.push_back(passed);
    s.worst.push_back(worst);
    log_tau.push_back(std::log(tau));
    log_coef.push_back(coef_count ? coef_sum / coef_count
                                  : std::numeric_limits<double>::quiet_NaN());
  }
  // tau0: start of the trailing run of all-pass grid values.
  int first = static_cast<int>(s.taus.size());
  while (first > 0 && s.pass_count[static_cast<std::size_t>(first - 1)] == s.fields) --first;
  if (first < static_cast<int>(s.taus.size())) s.tau0 = s.taus[static_cast<std::size_t>(first)];

  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  int n = 0;
  for (std::size_t t = static_cast<std::size_t>(std::max(first, 0)); t < s.taus.size(); ++t) {
    if (!std::isfinite(log_coef[t])) continue;
    sx += log_tau[t];
    sy += log_coef[t];
    sxx += log_tau[t] * log_tau[t];
    sxy += log_tau[t] * log_coef[t];
    ++n;
  }
  if (n >= 2) {
    s.zero_order_slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  } else {
    s.zero_order_slope = std::numeric_limits<double>::quiet_NaN();
  }
  return s;
}

void write_sweep_table(std::ostream& os, const InequalitySweep& sweep) {
  os << "# tau lhs_grad lhs_zero rhs margin pass passed_fields\n";
  os << std::setprecision(10);
  for (std::size_t t = 0; t < sweep.taus.size(); ++t) {
    const EstimateReport& r = sweep.worst[t];
    os << sweep.taus[t] << ' ' << r.lhs_grad << ' ' << r.lhs_zero << ' ' << r.rhs_main << ' '
       << r.margin << ' ' << (sweep.pass_count[t] == sweep.fields ? 1 : 0) << ' '
       << sweep.pass_count[t] << '\n';
  }
}

SyntheticSolution omega_vanishing_state(const RegionSet& regions, std::uint64_t seed) {
  const Grid& g = regions.grid;
  if (regions.omega.empty()) fail(ErrorKind::empty_input, "omega has no nodes");
  const int n = g.size();
  const double h = grid_spacing(g);
  // Stencil reach in cells, with room for one-sided wall stencils.
  const double reach = (g.order() + 1) * h;
  const double ramp = std::max(4.0 * h, 0.05 * std::min(g.lx(), g.ly()));

  auto gap = [&](double d, double period, bool periodic) {
    d = std::abs(d);
    return periodic ? std::min(d, period - d) : d;
  };
  VecD eta(n);
  for (int idx = 0; idx < n; ++idx) {
    const double x = g.x(g.ix(idx));
    const double y = g.y(g.jy(idx));
    double d = std::numeric_limits<double>::infinity();
    for (int o : regions.omega) {
      d = std::min(d, std::hypot(gap(x - g.x(g.ix(o)), g.lx(), !g.wall_x()),
                                 gap(y - g.y(g.jy(o)), g.ly(), !g.wall_y())));
    }
    eta[idx] = 1.0 - quintic_step((d - reach) / ramp);
  }

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * M_PI);
  auto smooth = [&]() {
    VecD s = VecD::Zero(n);
    for (int a = 0; a <= 2; ++a) {
      for (int b = 0; b <= 2; ++b) {
        const double c = normal(rng);
        const double px = phase(rng);
        const double py = phase(rng);
        for (int idx = 0; idx < n; ++idx) {
          s[idx] += c * std::cos(2.0 * M_PI * a * g.x(g.ix(idx)) / g.lx() + px) *
                    std::cos(2.0 * M_PI * b * g.y(g.jy(idx)) / g.ly() + py);
        }
      }
    }
    return VecD(s.cwiseProduct(eta));
  };
  const DiffOps& d = g.ops();
  const VecD s1 = smooth();
  const VecD s2 = smooth();
  const VecD pr = smooth();
  SyntheticSolution out{StateVector(g), ScalarField(g, pr)};
  out.state.phi.u1 = d.dy * s1;
  out.state.phi.u2 = -(d.dx * s1);
  out.state.xi.u1 = d.dy * s2;
  out.state.xi.u2 = -(d.dx * s2);
  return out;
}

TauSweep tau_sweep_vanishing(const StateVector& s, const ScalarField& p, const RegionSet& regions,
                             const std::vector<double>& taus, double c_big, double c_const) {
  if (taus.empty()) fail(ErrorKind::empty_input, "tau list is empty");
  const Grid& g = regions.grid;
  require_same_grid(g, s.phi.grid);
  require_same_grid(g, p.grid);
  for (double t : taus) {
    if (!(t > 0.0)) fail(ErrorKind::config, "tau values must be positive");
  }

  auto max_over = [&](const NodeSet* nodes) {
    double m = 0.0;
    auto visit = [&](int idx) {
      m = std::max({m, std::abs(s.phi.u1[idx]), std::abs(s.phi.u2[idx]), std::abs(s.xi.u1[idx]),
                    std::abs(s.xi.u2[idx]), std::abs(p.values[idx])});
    };
    if (nodes) {
      for (int idx : *nodes) visit(idx);
    } else {
      for (int idx = 0; idx < g.size(); ++idx) visit(idx);
    }
    return m;
  };
  const double on_omega = max_over(&regions.omega);
  const double overall = max_over(nullptr);
  if (on_omega > 1e-10 * overall) {
    std::ostringstream os;
    os << "state does not vanish on omega: max " << on_omega << " against " << overall;
    fail(ErrorKind::precondition, os.str());
  }

  const DiffOps& d = g.ops();
  const VecD px = d.dx * p.values;
  const VecD py = d.dy * p.values;
  const VecD grad_u = (d.dx * s.phi.u1).cwiseAbs2() + (d.dy * s.phi.u1).cwiseAbs2() +
                      (d.dx * s.phi.u2).cwiseAbs2() + (d.dy * s.phi.u2).cwiseAbs2() +
                      (d.dx * s.xi.u1).cwiseAbs2() + (d.dy * s.xi.u1).cwiseAbs2() +
                      (d.dx * s.xi.u2).cwiseAbs2() + (d.dy * s.xi.u2).cwiseAbs2();
  TauSweep out;
  for (int idx : regions.omega_star) {
    const double w = g.quad_weight(idx);
    const double u2 = sq(s.phi.u1[idx]) + sq(s.phi.u2[idx]) + sq(s.xi.u1[idx]) + sq(s.xi.u2[idx]);
    const double p2 = sq(p.values[idx]);
    out.c1 += w * (sq(px[idx]) + sq(py[idx]) + p2 + u2);
    out.c2 += w * (grad_u[idx] + u2 + p2);
  }

  std::vector<double> sorted = taus;
  std::sort(sorted.begin(), sorted.end());
  for (double t : sorted) {
    TauBound b;
    b.tau = t;
    b.state_bound = c_big / std::pow(t, 4) * out.c1 + c_const / std::pow(t, 3) * out.c2;
    b.pressure_bound = c_big / std::pow(t, 3) * out.c1 + c_const / std::pow(t, 2) * out.c2;
    out.rows.push_back(b);
  }
  out.monotone = true;
  for (std::size_t i = 1; i < out.rows.size(); ++i) {
    if (!(out.rows[i].state_bound < out.rows[i - 1].state_bound) ||
        !(out.rows[i].pressure_bound < out.rows[i - 1].pressure_bound)) {
      out.monotone = false;
    }
  }
  bool found = false;
  double se = std::numeric_limits<double>::infinity();
  double pe = std::numeric_limits<double>::infinity();
  for (const TauBound& a : out.rows) {
    for (const TauBound& b : out.rows) {
      if (std::abs(b.tau / a.tau - 2.0) > 1e-9) continue;
      found = true;
      se = std::min(se, std::log2(a.state_bound / b.state_bound));
      pe = std::min(pe, std::log2(a.pressure_bound / b.pressure_bound));
    }
  }
  if (found) {
    out.state_exponent = se;
    out.pressure_exponent = pe;
  }
  return out;
}

void write_tau_table(std::ostream& os, const TauSweep& sweep) {
  os << "# tau state_bound pressure_bound\n";
  os << std::setprecision(10);
  for (const TauBound& b : sweep.rows) {
    os << b.tau << ' ' << b.state_bound << ' ' << b.pressure_bound << '\n';
  }
}

FinalConstants default_final_constants(const Equilibrium& eq, const CutoffField& chi, Complex mu,
                                       double c2) {
  const Grid& g = chi.values.grid;
  auto sup_norm = [](const VectorField2& v) {
    return v.u1.size() ? std::sqrt((v.u1.cwiseAbs2() + v.u2.cwiseAbs2()).maxCoeff()) : 0.0;
  };
  const VectorField2 gc = gradient(chi.values);
  const double grad_chi = sup_norm(gc);
  const double lap_chi = (g.ops().lap * chi.values.values).cwiseAbs().maxCoeff();
  FinalConstants c;
  c.c_lambda_e = 1.0 + std::abs(mu) + eq.grad_bound;
  c.c_equilibrium = sq(sup_norm(eq.velocity) + sup_norm(eq.magnetic));
  c.c_chi_big = sq(grad_chi + lap_chi);
  c.c_chi = 1.0 + grad_chi * grad_chi;
  c.c2 = c2;
  return c;
}

std::vector<FinalEstimateRow> final_estimate_eval(const ComplexStateVector& s,
                                                  const ComplexScalarField& p,
                                                  const CutoffField& chi, const WeightField& psi,
                                                  const RegionSet& regions,
                                                  const FinalConstants& constants,
                                                  const std::vector<double>& taus, double delta0,
                                                  double epsilon) {
  const Grid& g = regions.grid;
  require_same_grid(g, s.phi.grid);
  require_same_grid(g, p.grid);
  require_same_grid(g, chi.values.grid);
  require_same_grid(g, psi.psi.grid);
  const DiffOps& d = g.ops();
  const VecD& c = chi.values.values;
  const VecC cc = c.cast<Complex>();

  auto grad2 = [&](const VecC& v) -> VecD {
    return (d.dx * v).cwiseAbs2() + (d.dy * v).cwiseAbs2();
  };
  const VecC cphi1 = cc.cwiseProduct(s.phi.u1), cphi2 = cc.cwiseProduct(s.phi.u2);
  const VecC cxi1 = cc.cwiseProduct(s.xi.u1), cxi2 = cc.cwiseProduct(s.xi.u2);
  const VecD chi_grad = grad2(cphi1) + grad2(cphi2) + grad2(cxi1) + grad2(cxi2);
  const VecD chi_zero = cphi1.cwiseAbs2() + cphi2.cwiseAbs2() + cxi1.cwiseAbs2() + cxi2.cwiseAbs2();
  const VecD chi_p = cc.cwiseProduct(p.values).cwiseAbs2();
  const VecD grad_u = grad2(s.phi.u1) + grad2(s.phi.u2) + grad2(s.xi.u1) + grad2(s.xi.u2);
  const VecD zero_u = s.phi.u1.cwiseAbs2() + s.phi.u2.cwiseAbs2() + s.xi.u1.cwiseAbs2() +
                      s.xi.u2.cwiseAbs2();
  const VecD grad_p = grad2(p.values);
  const VecD zero_p = p.values.cwiseAbs2();

  const NodeSet gset = regions.g_nodes();
  double psi_top = -std::numeric_limits<double>::infinity();
  for (int idx : gset) psi_top = std::max(psi_top, psi.psi.values[idx]);
  if (gset.empty()) psi_top = 0.0;

  std::vector<FinalEstimateRow> rows;
  for (double tau : taus) {
    const CarlemanParams prm{tau, delta0, epsilon, psi.rho, psi.k};
    const CarlemanCoefficients co = coefficients(prm);
    const double shift = 2.0 * tau * psi_top;
    auto weight = [&](int idx) {
      return std::exp(2.0 * tau * psi.psi.values[idx] - shift) * g.quad_weight(idx);
    };
    double l_grad = 0.0, l_zero = 0.0, l_p = 0.0;
    for (int idx : gset) {
      const double w = weight(idx);
      l_grad += w * chi_grad[idx];
      l_zero += w * chi_zero[idx];
      l_p += w * chi_p[idx];
    }
    double r_big = 0.0, r_small = 0.0;
    for (int idx : regions.omega_star) {
      const double w = weight(idx);
      r_big += w * (grad_p[idx] + zero_p[idx] + zero_u[idx]);
      r_small += w * (grad_u[idx] + zero_u[idx] + zero_p[idx]);
    }
    FinalEstimateRow row;
    row.tau = tau;
    row.log_shift = shift;
    row.tau_too_small = co.tau_too_small;
    if (!co.tau_too_small) {
      // The brackets divide by c_grad, which plays the role of rho tau - 1/8.
      const double a = co.c_grad;
      const double cubic = co.c_zero - constants.c2 * tau * tau;
      const double eq_term = constants.c_equilibrium / a;
      row.lhs = (a - constants.c_lambda_e - eq_term) * l_grad +
                (cubic - constants.c_lambda_e - eq_term) * l_zero + cubic / a * l_p;
      row.rhs = constants.c_chi_big / a * r_big + constants.c_chi * r_small;
      row.pass = row.lhs <= row.rhs + kPassTolerance * std::abs(row.rhs);
    }
    rows.push_back(row);
  }
  return rows;
}

}  // namespace mhdlab
