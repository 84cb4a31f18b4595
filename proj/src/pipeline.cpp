#include "mhdlab/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <random>
#include <set>
#include <sstream>

#include "mhdlab/pressure.hpp"

namespace mhdlab {

using nlohmann::json;

namespace {

constexpr double kPi = 3.141592653589793;

[[noreturn]] void config_error(const std::string& what) { fail(ErrorKind::config, what); }

void check_keys(const json& obj, const std::string& where, std::initializer_list<const char*> keys) {
  if (!obj.is_object()) config_error(where + " must be an object");
  const std::set<std::string> allowed(keys.begin(), keys.end());
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    if (!allowed.count(it.key())) config_error("unknown key '" + it.key() + "' in " + where);
  }
}

// Numbers, or strings such as "pi", "2pi", "0.5pi".
double length_value(const json& v, const std::string& where) {
  if (v.is_number()) return v.get<double>();
  if (v.is_string()) {
    const std::string s = v.get<std::string>();
    if (s.size() >= 2 && s.compare(s.size() - 2, 2, "pi") == 0) {
      const std::string head = s.substr(0, s.size() - 2);
      if (head.empty()) return kPi;
      std::size_t used = 0;
      try {
        const double f = std::stod(head, &used);
        if (used == head.size()) return f * kPi;
      } catch (const std::exception&) {
      }
    }
  }
  config_error(where + " must be a number or a multiple of pi such as \"2pi\"");
}

template <class T>
T get(const json& obj, const char* key, T fallback, const std::string& where) {
  if (!obj.contains(key)) return fallback;
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception&) {
    config_error(where + "." + key + " has the wrong type");
  }
}

double get_number(const json& obj, const char* key, double fallback, const std::string& where) {
  if (!obj.contains(key)) return fallback;
  return length_value(obj.at(key), where + "." + key);
}

BoundaryKind parse_boundary(const std::string& s) {
  if (s == "periodic") return BoundaryKind::periodic;
  if (s == "wall") return BoundaryKind::wall;
  config_error("boundary kind must be 'periodic' or 'wall', got '" + s + "'");
}

const char* boundary_name(BoundaryKind k) { return k == BoundaryKind::wall ? "wall" : "periodic"; }

std::vector<StreamMode> parse_modes(const json& arr, const std::string& where) {
  if (!arr.is_array()) config_error(where + " must be an array");
  std::vector<StreamMode> out;
  for (const json& m : arr) {
    check_keys(m, where, {"kx", "ky", "amplitude", "phase"});
    StreamMode s;
    s.kx = get_number(m, "kx", s.kx, where);
    s.ky = get_number(m, "ky", s.ky, where);
    s.amplitude = get_number(m, "amplitude", s.amplitude, where);
    s.phase = get_number(m, "phase", s.phase, where);
    out.push_back(s);
  }
  return out;
}

json modes_json(const std::vector<StreamMode>& modes) {
  json arr = json::array();
  for (const StreamMode& m : modes) {
    arr.push_back({{"kx", m.kx}, {"ky", m.ky}, {"amplitude", m.amplitude}, {"phase", m.phase}});
  }
  return arr;
}

std::vector<double> parse_positive_list(const json& arr, const std::string& where) {
  if (!arr.is_array()) config_error(where + " must be an array");
  if (arr.empty()) config_error(where + " is empty");
  std::vector<double> out;
  for (const json& v : arr) {
    if (!v.is_number() || !(v.get<double>() > 0.0)) config_error(where + " entries must be positive");
    out.push_back(v.get<double>());
  }
  return out;
}

json complex_json(Complex z) { return json::array({z.real(), z.imag()}); }

// Non-finite values become null so the report stays valid JSON.
json number(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

void write_file(const RunConfig& cfg, const std::string& name, const std::string& text) {
  const std::filesystem::path path = std::filesystem::path(cfg.output_dir) / name;
  std::ofstream os(path);
  if (!os) fail(ErrorKind::config, "cannot write " + path.string());
  os << text;
}

template <class F>
void write_table(const RunConfig& cfg, const std::string& name, F&& writer) {
  std::ostringstream os;
  writer(os);
  write_file(cfg, name, os.str());
}

struct Problem {
  Grid grid;
  Equilibrium eq;
  LinearOperator generator;

  explicit Problem(const RunConfig& cfg)
      : grid(build_grid(cfg.grid)),
        eq(make_equilibrium(cfg.equilibrium, grid, cfg.equilibrium_params, cfg.nu, cfg.eta)),
        generator(assemble_generator(eq, GeneratorOptions{cfg.sigma})) {}
};

SpectrumOptions spectrum_options(const RunConfig& cfg) {
  SpectrumOptions o;
  o.seed = cfg.seed;
  return o;
}

// Control region: the omega disc for an interior patch, the collar itself
// otherwise.
NodeSet control_region(const RunConfig& cfg, const Grid& grid) {
  if (cfg.geometry == GeometryCase::interior_patch) {
    return disc_nodes(grid, cfg.omega.center_x, cfg.omega.center_y, cfg.omega.radius);
  }
  return build_nested_regions(grid, cfg.omega, cfg.geometry).omega;
}

json spectrum_summary(const SpectrumReport& r) {
  json eig = json::array();
  for (const EigenPair& p : r.pairs) eig.push_back(complex_json(p.lambda));
  return {{"N", r.n_unstable},         {"M", r.m_distinct},
          {"multiplicities", r.multiplicities}, {"K", r.k_max},
          {"complete", r.complete},    {"eigenvalues", eig},
          {"iterations", r.iterations}, {"operator", r.operator_label}};
}

std::optional<Complex> first_stable(const SpectrumReport& r) {
  for (const EigenPair& p : r.pairs) {
    if (p.lambda.real() < 0.0) return p.lambda;
  }
  return std::nullopt;
}

VecD initial_state(const LinearOperator& gen, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  VecD y(gen.size());
  for (Eigen::Index i = 0; i < y.size(); ++i) y[i] = normal(rng);
  y = gen.projector->project(y);
  const double e = gen.layout->cell_area() * y.squaredNorm();
  return e > 0.0 ? VecD(y / std::sqrt(e)) : y;
}

}  // namespace

RunConfig parse_config(const json& doc) {
  check_keys(doc, "config",
             {"grid", "equilibrium", "physics", "geometry", "spectral", "carleman", "stabilize",
              "seed", "output"});
  RunConfig cfg;
  const json empty = json::object();
  auto block = [&](const char* key) -> const json& { return doc.contains(key) ? doc.at(key) : empty; };

  const json& g = block("grid");
  check_keys(g, "grid", {"lx", "ly", "nx", "ny", "bc_x", "bc_y", "stencil_order"});
  cfg.grid.lx = get_number(g, "lx", cfg.grid.lx, "grid");
  cfg.grid.ly = get_number(g, "ly", cfg.grid.ly, "grid");
  cfg.grid.nx = get<int>(g, "nx", cfg.grid.nx, "grid");
  cfg.grid.ny = get<int>(g, "ny", cfg.grid.ny, "grid");
  cfg.grid.bc_x = parse_boundary(get<std::string>(g, "bc_x", "periodic", "grid"));
  cfg.grid.bc_y = parse_boundary(get<std::string>(g, "bc_y", "periodic", "grid"));
  cfg.grid.stencil_order = get<int>(g, "stencil_order", cfg.grid.stencil_order, "grid");
  if (!(cfg.grid.lx > 0.0) || !(cfg.grid.ly > 0.0)) config_error("grid lengths must be positive");
  if (cfg.grid.nx < 8 || cfg.grid.ny < 8) config_error("grid needs at least 8 cells per direction");
  if (cfg.grid.stencil_order != 2 && cfg.grid.stencil_order != 4) {
    config_error("stencil_order must be 2 or 4");
  }

  const json& e = block("equilibrium");
  check_keys(e, "equilibrium",
             {"kind", "velocity_amplitude", "magnetic_amplitude", "mode", "velocity_modes",
              "magnetic_modes"});
  try {
    cfg.equilibrium = parse_equilibrium_kind(get<std::string>(e, "kind", "zero", "equilibrium"));
  } catch (const Error& err) {
    config_error(err.what());
  }
  EquilibriumParams& ep = cfg.equilibrium_params;
  ep.velocity_amplitude = get_number(e, "velocity_amplitude", ep.velocity_amplitude, "equilibrium");
  ep.magnetic_amplitude = get_number(e, "magnetic_amplitude", ep.magnetic_amplitude, "equilibrium");
  ep.mode = get<int>(e, "mode", ep.mode, "equilibrium");
  if (e.contains("velocity_modes")) ep.velocity_modes = parse_modes(e.at("velocity_modes"), "equilibrium.velocity_modes");
  if (e.contains("magnetic_modes")) ep.magnetic_modes = parse_modes(e.at("magnetic_modes"), "equilibrium.magnetic_modes");

  const json& ph = block("physics");
  check_keys(ph, "physics", {"nu", "eta", "sigma"});
  cfg.nu = get_number(ph, "nu", cfg.nu, "physics");
  cfg.eta = get_number(ph, "eta", cfg.eta, "physics");
  cfg.sigma = get_number(ph, "sigma", cfg.sigma, "physics");
  if (!(cfg.nu > 0.0) || !(cfg.eta > 0.0)) config_error("nu and eta must be positive");

  const json& ge = block("geometry");
  check_keys(ge, "geometry",
             {"case", "center", "radius", "collar_width", "side", "omega1_width", "star_width",
              "anchor_offset"});
  try {
    cfg.geometry = parse_geometry_case(get<std::string>(ge, "case", "interior_patch", "geometry"));
  } catch (const Error& err) {
    config_error(err.what());
  }
  OmegaSpec& om = cfg.omega;
  om.center_x = cfg.grid.lx / 2.0;
  om.center_y = cfg.grid.ly / 2.0;
  if (ge.contains("center")) {
    const json& c = ge.at("center");
    if (!c.is_array() || c.size() != 2) config_error("geometry.center must be [x, y]");
    om.center_x = length_value(c[0], "geometry.center");
    om.center_y = length_value(c[1], "geometry.center");
  }
  om.radius = get_number(ge, "radius", 0.15 * cfg.grid.lx, "geometry");
  om.collar_width = get_number(ge, "collar_width", 0.1 * cfg.grid.lx, "geometry");
  om.side = get<std::string>(ge, "side", om.side, "geometry");
  om.omega1_width = get_number(ge, "omega1_width", om.omega1_width, "geometry");
  om.star_width = get_number(ge, "star_width", om.star_width, "geometry");
  om.anchor_offset = get_number(ge, "anchor_offset", om.anchor_offset, "geometry");
  if (!(om.radius > 0.0) || !(om.collar_width > 0.0)) config_error("omega sizes must be positive");
  if (om.side != "left" && om.side != "right" && om.side != "bottom" && om.side != "top") {
    config_error("geometry.side must be left, right, bottom or top");
  }

  const json& sp = block("spectral");
  check_keys(sp, "spectral", {"count", "strategy", "gram_threshold"});
  cfg.eigen_count = get<int>(sp, "count", cfg.eigen_count, "spectral");
  try {
    cfg.strategy = parse_eigen_strategy(get<std::string>(sp, "strategy", "shift_invert", "spectral"));
  } catch (const Error& err) {
    config_error(err.what());
  }
  cfg.gram_threshold = get_number(sp, "gram_threshold", cfg.gram_threshold, "spectral");
  if (cfg.eigen_count < 1) config_error("spectral.count must be at least 1");
  if (!(cfg.gram_threshold > 0.0)) config_error("spectral.gram_threshold must be positive");

  const json& ca = block("carleman");
  check_keys(ca, "carleman",
             {"delta0", "epsilon", "tau_list", "fields", "calibration_fields", "final_taus", "nx",
              "ny"});
  CarlemanConfig& cc = cfg.carleman;
  cc.delta0 = get_number(ca, "delta0", cc.delta0, "carleman");
  cc.epsilon = get_number(ca, "epsilon", cc.epsilon, "carleman");
  // null keeps the default dyadic grid; an explicit empty list is an error.
  if (ca.contains("tau_list") && !ca.at("tau_list").is_null()) cc.tau_list = parse_positive_list(ca.at("tau_list"), "carleman.tau_list");
  if (ca.contains("final_taus")) cc.final_taus = parse_positive_list(ca.at("final_taus"), "carleman.final_taus");
  cc.fields = get<int>(ca, "fields", cc.fields, "carleman");
  cc.calibration_fields = get<int>(ca, "calibration_fields", cc.calibration_fields, "carleman");
  cc.nx = get<int>(ca, "nx", cfg.grid.nx, "carleman");
  cc.ny = get<int>(ca, "ny", cfg.grid.ny, "carleman");
  if (cc.nx < 8 || cc.ny < 8) config_error("carleman grid needs at least 8 cells per direction");
  if (!(cc.delta0 > 0.0 && cc.delta0 < 1.0)) config_error("carleman.delta0 must lie in (0, 1)");
  if (!(cc.epsilon > 0.0)) config_error("carleman.epsilon must be positive");
  if (cc.fields < 1 || cc.calibration_fields < 0) config_error("carleman field counts out of range");

  const json& st = block("stabilize");
  check_keys(st, "stabilize",
             {"gamma", "T", "dt", "feedback", "window_start", "open_loop_time", "actuators"});
  StabilizeConfig& sc = cfg.stabilize;
  sc.gamma = get_number(st, "gamma", sc.gamma, "stabilize");
  sc.t_final = get_number(st, "T", sc.t_final, "stabilize");
  sc.dt = get_number(st, "dt", sc.dt, "stabilize");
  sc.feedback = get<bool>(st, "feedback", sc.feedback, "stabilize");
  sc.window_start = get_number(st, "window_start", sc.window_start, "stabilize");
  sc.open_loop_time = get_number(st, "open_loop_time", sc.open_loop_time, "stabilize");
  sc.actuators = get<int>(st, "actuators", sc.actuators, "stabilize");
  if (!(sc.gamma > 0.0)) config_error("stabilize.gamma must be positive");
  if (!(sc.dt > 0.0) || !(sc.t_final > sc.dt) || !(sc.open_loop_time > sc.dt)) {
    config_error("stabilize time parameters out of range");
  }
  if (sc.window_start <= 0.0) sc.window_start = sc.t_final / 2.0;
  if (sc.window_start >= sc.t_final) config_error("stabilize.window_start must be below T");
  if (sc.actuators < 0) config_error("stabilize.actuators must be nonnegative");

  if (doc.contains("seed")) {
    if (!doc.at("seed").is_number_unsigned()) config_error("seed must be a nonnegative integer");
    cfg.seed = doc.at("seed").get<std::uint64_t>();
  }
  cfg.output_dir = get<std::string>(doc, "output", cfg.output_dir, "config");
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) config_error("cannot open config file " + path);
  json doc;
  try {
    doc = json::parse(is);
  } catch (const json::parse_error& e) {
    config_error(std::string("malformed config: ") + e.what());
  }
  return parse_config(doc);
}

json config_to_json(const RunConfig& cfg) {
  const EquilibriumParams& ep = cfg.equilibrium_params;
  const CarlemanConfig& cc = cfg.carleman;
  const StabilizeConfig& sc = cfg.stabilize;
  return {
      {"grid",
       {{"lx", cfg.grid.lx},
        {"ly", cfg.grid.ly},
        {"nx", cfg.grid.nx},
        {"ny", cfg.grid.ny},
        {"bc_x", boundary_name(cfg.grid.bc_x)},
        {"bc_y", boundary_name(cfg.grid.bc_y)},
        {"stencil_order", cfg.grid.stencil_order}}},
      {"equilibrium",
       {{"kind", to_string(cfg.equilibrium)},
        {"velocity_amplitude", ep.velocity_amplitude},
        {"magnetic_amplitude", ep.magnetic_amplitude},
        {"mode", ep.mode},
        {"velocity_modes", modes_json(ep.velocity_modes)},
        {"magnetic_modes", modes_json(ep.magnetic_modes)}}},
      {"physics", {{"nu", cfg.nu}, {"eta", cfg.eta}, {"sigma", cfg.sigma}}},
      {"geometry",
       {{"case", to_string(cfg.geometry)},
        {"center", {cfg.omega.center_x, cfg.omega.center_y}},
        {"radius", cfg.omega.radius},
        {"collar_width", cfg.omega.collar_width},
        {"side", cfg.omega.side},
        {"omega1_width", cfg.omega.omega1_width},
        {"star_width", cfg.omega.star_width},
        {"anchor_offset", cfg.omega.anchor_offset}}},
      {"spectral",
       {{"count", cfg.eigen_count},
        {"strategy", to_string(cfg.strategy)},
        {"gram_threshold", cfg.gram_threshold}}},
      {"carleman",
       {{"delta0", cc.delta0},
        {"epsilon", cc.epsilon},
        {"tau_list", cc.tau_list.empty() ? json(nullptr) : json(cc.tau_list)},
        {"fields", cc.fields},
        {"calibration_fields", cc.calibration_fields},
        {"final_taus", cc.final_taus},
        {"nx", cc.nx},
        {"ny", cc.ny}}},
      {"stabilize",
       {{"gamma", sc.gamma},
        {"T", sc.t_final},
        {"dt", sc.dt},
        {"feedback", sc.feedback},
        {"window_start", sc.window_start},
        {"open_loop_time", sc.open_loop_time},
        {"actuators", sc.actuators}}},
      {"seed", cfg.seed},
      {"output", cfg.output_dir},
  };
}

std::string config_hash(const RunConfig& cfg) {
  json canonical = config_to_json(cfg);
  // The output location does not change any result.
  canonical.erase("output");
  const std::string text = canonical.dump();
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

json module_versions() {
  return {{"geometry", "1.0.0"}, {"fields", "1.0.0"},    {"mhd_operators", "1.0.0"},
          {"spectral", "1.0.0"}, {"carleman", "1.0.0"},  {"stabilize", "1.0.0"},
          {"cli", "1.0.0"}};
}

json run_spectrum(const RunConfig& cfg) {
  const Problem pb(cfg);
  const SpectrumReport r =
      compute_spectrum(pb.generator, cfg.eigen_count, cfg.strategy, spectrum_options(cfg));
  write_table(cfg, "spectrum.txt", [&](std::ostream& os) { write_spectrum_table(os, r); });
  double max_residual = 0.0;
  double max_pde = 0.0;
  for (const EigenPair& p : r.pairs) {
    max_residual = std::max(max_residual, p.residual);
    max_pde = std::max(max_pde, pde_eigen_residual(pb.generator, pb.eq, p.lambda, p.vector).relative_residual);
  }
  json out = spectrum_summary(r);
  out["max_residual"] = max_residual;
  out["max_pde_residual"] = max_pde;
  out["equilibrium_projection_change"] = pb.eq.projection_change;
  const auto next = first_stable(r);
  out["first_stable"] = next ? complex_json(*next) : json(nullptr);
  return out;
}

json run_ucp(const RunConfig& cfg) {
  const Problem pb(cfg);
  const SpectrumReport adj = adjoint_spectrum(adjoint_of(pb.generator), cfg.eigen_count,
                                              cfg.strategy, spectrum_options(cfg));
  const NodeSet omega = control_region(cfg, pb.grid);
  const std::vector<GramMatrix> grams = ucp_gram_tests(adj, omega, cfg.gram_threshold);
  json out;
  out["N"] = adj.n_unstable;
  out["omega_nodes"] = omega.size();
  bool gram_ok = true;
  for (const GramMatrix& gm : grams) gram_ok = gram_ok && gm.passed;

  std::vector<KalmanMatrix> kal;
  int k_used = 0;
  if (gram_ok && adj.n_unstable > 0) {
    const Eigen::MatrixXd act =
        select_actuators(adj, omega, cfg.stabilize.actuators, cfg.seed, cfg.gram_threshold);
    k_used = static_cast<int>(act.cols());
    kal = kalman_rank(act, adj, omega);
  }
  bool kalman_ok = gram_ok;
  json clusters = json::array();
  for (std::size_t i = 0; i < grams.size(); ++i) {
    json c = {{"cluster", grams[i].cluster},
              {"lambda", complex_json(grams[i].lambda)},
              {"multiplicity", grams[i].entries.rows()},
              {"sigma_min", grams[i].sigma_min},
              {"gram_passed", grams[i].passed}};
    if (i < kal.size()) {
      c["kalman_rank"] = kal[i].rank;
      c["kalman_full_rank"] = kal[i].full_rank;
      kalman_ok = kalman_ok && kal[i].full_rank;
    }
    clusters.push_back(c);
  }
  out["clusters"] = clusters;
  out["actuators"] = k_used;
  out["vacuous"] = adj.n_unstable == 0;
  out["passed"] = gram_ok && kalman_ok;

  // Degenerate fixture: two unstable functions forced to agree on omega.
  Eigen::MatrixXcd cols(adj.layout->size(), 0);
  int fixture_cluster = -1;
  for (int c : adj.unstable_clusters) {
    const Eigen::MatrixXcd& b = adj.clusters[c].basis;
    for (Eigen::Index j = 0; j < b.cols() && cols.cols() < 2; ++j) {
      cols.conservativeResize(Eigen::NoChange, cols.cols() + 1);
      cols.col(cols.cols() - 1) = b.col(j);
      if (fixture_cluster < 0) fixture_cluster = c;
    }
  }
  if (cols.cols() == 2) {
    const GramMatrix fx = ucp_gram_test(make_omega_degenerate(cols, *adj.layout, omega), *adj.layout,
                                        omega, cfg.gram_threshold);
    out["degenerate_fixture"] = {{"cluster", fixture_cluster},
                                 {"sigma_min", fx.sigma_min},
                                 {"passed", fx.passed}};
  } else {
    out["degenerate_fixture"] = nullptr;
  }

  write_table(cfg, "ucp.txt", [&](std::ostream& os) {
    os << "# cluster re im multiplicity sigma_min gram_pass kalman_rank kalman_full\n";
    os.precision(12);
    for (std::size_t i = 0; i < grams.size(); ++i) {
      os << grams[i].cluster << ' ' << grams[i].lambda.real() << ' ' << grams[i].lambda.imag()
         << ' ' << grams[i].entries.rows() << ' ' << grams[i].sigma_min << ' '
         << (grams[i].passed ? 1 : 0) << ' ' << (i < kal.size() ? kal[i].rank : -1) << ' '
         << (i < kal.size() && kal[i].full_rank ? 1 : 0) << '\n';
    }
  });
  return out;
}

json run_carleman(const RunConfig& cfg) {
  const CarlemanConfig& cc = cfg.carleman;
  GridSpec spec = cfg.grid;
  spec.nx = cc.nx;
  spec.ny = cc.ny;
  const Grid grid = build_grid(spec);
  const RegionSet regions = build_nested_regions(grid, cfg.omega, cfg.geometry);
  const WeightField psi = build_weight(regions);
  const double diam = regions.g_diameter();

  std::vector<double> taus;
  if (cc.tau_list.empty()) {
    taus = tau_grid(regions);
  } else {
    for (double t : cc.tau_list) taus.push_back(t / diam);
  }
  const std::vector<Gaussian> gaussians =
      calibration_gaussians(regions, cc.calibration_fields, cfg.seed + 1);
  const double c2 = calibrate_tau2_correction(gaussians, psi, taus, cc.delta0, cc.epsilon);
  const std::vector<Bump> bumps = random_bumps(regions, cc.fields, cfg.seed);
  const InequalitySweep sweep =
      integrated_inequality_sweep(bumps, psi, regions, taus, c2, cc.delta0, cc.epsilon);
  write_table(cfg, "carleman_sweep.txt", [&](std::ostream& os) { write_sweep_table(os, sweep); });

  const SyntheticSolution syn = omega_vanishing_state(regions, cfg.seed + 2);
  const TauSweep ts = tau_sweep_vanishing(syn.state, syn.pressure, regions, taus);
  write_table(cfg, "carleman_tau.txt", [&](std::ostream& os) { write_tau_table(os, ts); });

  json out;
  out["rho"] = psi.rho;
  out["k"] = psi.k;
  out["diam_g"] = diam;
  out["weight_ordering_holds"] = psi.ordering_holds;
  out["weight_ordering_violation"] = psi.ordering_violation;
  out["c2"] = c2;
  out["c2_note"] = "calibrated bound for the second-order correction of the cubic coefficient";
  out["taus"] = sweep.taus;
  out["pass_counts"] = sweep.pass_count;
  out["fields"] = sweep.fields;
  out["tau0"] = sweep.tau0 > 0.0 ? json(sweep.tau0) : json(nullptr);
  out["tau0_times_diam"] = sweep.tau0 > 0.0 ? json(sweep.tau0 * diam) : json(nullptr);
  out["zero_order_slope"] = number(sweep.zero_order_slope);
  out["vanishing"] = {{"c1", ts.c1},
                      {"c2", ts.c2},
                      {"monotone", ts.monotone},
                      {"state_exponent", ts.state_exponent},
                      {"pressure_exponent", ts.pressure_exponent}};

  // The combined estimate needs the cutoff, which needs enough resolution.
  try {
    const CutoffField chi = build_cutoff(regions);
    const Equilibrium eq =
        make_equilibrium(cfg.equilibrium, grid, cfg.equilibrium_params, cfg.nu, cfg.eta);
    const FinalConstants fc = default_final_constants(eq, chi, Complex(0.0, 0.0), c2);
    std::vector<double> final_taus;
    for (double t : cc.final_taus) final_taus.push_back(t / diam);
    const ComplexStateVector s(
        ComplexVectorField2(grid, syn.state.phi.u1.cast<Complex>(), syn.state.phi.u2.cast<Complex>()),
        ComplexVectorField2(grid, syn.state.xi.u1.cast<Complex>(), syn.state.xi.u2.cast<Complex>(),
                            BcTag::magnetic_tangential));
    const ComplexScalarField p(grid, syn.pressure.values.cast<Complex>());
    const auto rows = final_estimate_eval(s, p, chi, psi, regions, fc, final_taus, cc.delta0, cc.epsilon);
    json jr = json::array();
    for (const FinalEstimateRow& r : rows) {
      jr.push_back({{"tau", r.tau}, {"lhs", r.lhs}, {"rhs", r.rhs}, {"log_shift", r.log_shift},
                    {"pass", r.pass}, {"tau_too_small", r.tau_too_small}});
    }
    out["final_estimate"] = {{"rows", jr},
                             {"constants",
                              {{"c_lambda_e", fc.c_lambda_e},
                               {"c_equilibrium", fc.c_equilibrium},
                               {"c_chi_big", fc.c_chi_big},
                               {"c_chi", fc.c_chi}}}};
    write_table(cfg, "carleman_final.txt", [&](std::ostream& os) {
      os << "# tau lhs rhs log_shift pass\n";
      os.precision(10);
      for (const FinalEstimateRow& r : rows) {
        os << r.tau << ' ' << r.lhs << ' ' << r.rhs << ' ' << r.log_shift << ' ' << (r.pass ? 1 : 0)
           << '\n';
      }
    });
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::resolution) throw;
    out["final_estimate"] = {{"skipped", e.what()}};
  }
  return out;
}

json run_stabilize(const RunConfig& cfg) {
  const StabilizeConfig& sc = cfg.stabilize;
  const Problem pb(cfg);
  const SpectrumOptions so = spectrum_options(cfg);
  const SpectrumReport fw = compute_spectrum(pb.generator, cfg.eigen_count, cfg.strategy, so);
  const SpectrumReport adj =
      adjoint_spectrum(adjoint_of(pb.generator), cfg.eigen_count, cfg.strategy, so);
  const NodeSet omega = control_region(cfg, pb.grid);
  const Eigen::MatrixXd act =
      select_actuators(adj, omega, sc.actuators, cfg.seed, cfg.gram_threshold);
  const UnstableProjection proj = build_unstable_projection(pb.generator, fw, adj);
  const ControlProfiles prof = control_profiles(pb.generator, act, omega);
  const Eigen::MatrixXd b = input_map(pb.generator, proj, prof);

  json out;
  out["N"] = proj.dimension();
  out["K"] = act.cols();
  out["pairing_condition"] = proj.condition;
  out["control_leakage"] = prof.leakage;
  const auto next = first_stable(fw);
  const double target =
      next ? std::min(sc.gamma, std::abs(next->real())) : std::numeric_limits<double>::quiet_NaN();
  out["first_stable"] = next ? complex_json(*next) : json(nullptr);
  out["target_rate"] = number(target);

  FeedbackGain gain;
  gain.gamma = sc.gamma;
  gain.gain = Eigen::MatrixXd::Zero(act.cols(), proj.dimension());
  if (sc.feedback) {
    gain = synthesize_feedback(proj.block, b, sc.gamma, cfg.seed);
    json cl = json::array();
    for (Complex z : gain.closed_loop) cl.push_back(complex_json(z));
    out["poles"] = gain.poles;
    out["closed_loop"] = cl;
    out["closed_loop_max_real"] = number(gain.max_real);
    write_table(cfg, "gain.txt", [&](std::ostream& os) { write_gain(os, gain); });
  }

  const VecD y0 = initial_state(pb.generator, cfg.seed);
  SimulationOptions opts;
  opts.dt = sc.dt;
  opts.t_final = sc.t_final;
  opts.feedback = sc.feedback;
  const SimulationTrace tr = simulate_closed_loop(pb.generator, proj, gain, prof, y0, opts);
  write_table(cfg, sc.feedback ? "trace_closed.txt" : "trace_open_long.txt",
              [&](std::ostream& os) { write_trace(os, tr); });
  const DecayFit fit = measure_decay(tr, sc.window_start, sc.t_final);
  out["energy_rate"] = fit.rate;
  out["energy_rate_half_width"] = fit.half_width;
  out["amplitude_rate"] = fit.rate / 2.0;
  out["rate_error"] = std::isfinite(target) ? number(std::abs(fit.rate / 2.0 - target) / target)
                                            : json(nullptr);

  SimulationOptions open = opts;
  open.feedback = false;
  open.t_final = sc.open_loop_time;
  const SimulationTrace to = simulate_closed_loop(pb.generator, proj, gain, prof, y0, open);
  write_table(cfg, "trace_open.txt", [&](std::ostream& os) { write_trace(os, to); });
  const DecayFit ofit = measure_decay(to, open.t_final / 2.0, open.t_final);
  out["open_loop_energy_rate"] = ofit.rate;
  out["open_loop_grows"] = ofit.rate < 0.0;

  if (sc.feedback) {
    SimulationOptions vc = opts;
    vc.t_final = std::min(sc.t_final, 2.0);
    out["variation_of_constants_residual"] =
        variation_of_constants_residual(pb.generator, proj, gain, prof, y0, vc);
  }
  return out;
}

json run_command(const std::string& command, const RunConfig& cfg) {
  std::filesystem::create_directories(cfg.output_dir);
  // A report from an earlier failed run would contradict this one.
  std::filesystem::remove(std::filesystem::path(cfg.output_dir) / "error.json");
  json results;
  if (command == "spectrum") {
    results["spectrum"] = run_spectrum(cfg);
  } else if (command == "ucp") {
    results["ucp"] = run_ucp(cfg);
  } else if (command == "carleman") {
    results["carleman"] = run_carleman(cfg);
  } else if (command == "stabilize") {
    results["stabilize"] = run_stabilize(cfg);
  } else if (command == "all") {
    results["spectrum"] = run_spectrum(cfg);
    results["ucp"] = run_ucp(cfg);
    results["carleman"] = run_carleman(cfg);
    results["stabilize"] = run_stabilize(cfg);
  } else {
    config_error("unknown command '" + command + "'");
  }
  json summary = {{"command", command},
                  {"config_hash", config_hash(cfg)},
                  {"module_versions", module_versions()},
                  {"config", config_to_json(cfg)},
                  {"results", results}};
  write_file(cfg, "summary.json", summary.dump(2) + "\n");
  return summary;
}

int exit_status(ErrorKind kind) { return 2 + static_cast<int>(kind); }

json error_document(const Error& e, const std::string& hash) {
  json doc = {{"error", to_string(e.kind())},
              {"message", e.what()},
              {"exit_status", exit_status(e.kind())}};
  if (!e.detail().empty()) doc["detail"] = e.detail();
  if (!hash.empty()) doc["config_hash"] = hash;
  return doc;
}

}  // namespace mhdlab
