#include "mhdlab/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include <Eigen/Eigenvalues>

namespace mhdlab {

GeometryCase parse_geometry_case(const std::string& name) {
  if (name == "interior_patch") return GeometryCase::interior_patch;
  if (name == "full_collar") return GeometryCase::full_collar;
  if (name == "partial_collar") return GeometryCase::partial_collar;
  fail(ErrorKind::config, "unknown geometry case '" + name + "'");
}

const char* to_string(GeometryCase c) {
  switch (c) {
    case GeometryCase::interior_patch: return "interior_patch";
    case GeometryCase::full_collar: return "full_collar";
    case GeometryCase::partial_collar: return "partial_collar";
  }
  return "unknown";
}

NodeSet RegionSet::g_nodes() const {
  NodeSet g;
  g.reserve(omega1.size() + omega_star.size());
  g.insert(g.end(), omega1.begin(), omega1.end());
  g.insert(g.end(), omega_star.begin(), omega_star.end());
  std::sort(g.begin(), g.end());
  return g;
}

double RegionSet::g_diameter() const {
  double diam = 0.0;
  for (int a = 0; a < 360; ++a) {
    const double t = a * std::numbers::pi / 360.0;
    const double ex = std::cos(t);
    const double ey = std::sin(t);
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (int idx : omega1) {
      const double p = ex * grid.x(grid.ix(idx)) + ey * grid.y(grid.jy(idx));
      lo = std::min(lo, p);
      hi = std::max(hi, p);
    }
    for (int idx : omega_star) {
      const double p = ex * grid.x(grid.ix(idx)) + ey * grid.y(grid.jy(idx));
      lo = std::min(lo, p);
      hi = std::max(hi, p);
    }
    if (hi > lo) diam = std::max(diam, hi - lo);
  }
  return diam;
}

namespace {

double wall_distance(const Grid& g, int idx) {
  double d = std::numeric_limits<double>::infinity();
  const double x = g.x(g.ix(idx));
  const double y = g.y(g.jy(idx));
  if (g.wall_x()) d = std::min({d, x, g.lx() - x});
  if (g.wall_y()) d = std::min({d, y, g.ly() - y});
  return d;
}

double side_distance(const Grid& g, int idx, const std::string& side) {
  const double x = g.x(g.ix(idx));
  const double y = g.y(g.jy(idx));
  if (side == "left") return x;
  if (side == "right") return g.lx() - x;
  if (side == "bottom") return y;
  if (side == "top") return g.ly() - y;
  fail(ErrorKind::config, "unknown collar side '" + side + "'");
}

void require(bool ok, const std::string& msg) {
  if (!ok) fail(ErrorKind::geometry, msg);
}

void collect_facets(RegionSet& r) {
  const Grid& g = r.grid;
  const int px = g.points_x();
  const int py = g.points_y();
  for (int idx = 0; idx < g.size(); ++idx) {
    if (!r.in_g(idx)) continue;
    const int i = g.ix(idx);
    const int j = g.jy(idx);
    const std::array<std::array<int, 2>, 4> steps{{{1, 0}, {-1, 0}, {0, 1}, {0, -1}}};
    for (const auto& s : steps) {
      int ni = i + s[0];
      int nj = j + s[1];
      if (g.wall_x() && (ni < 0 || ni >= px)) continue;
      if (g.wall_y() && (nj < 0 || nj >= py)) continue;
      ni = (ni + px) % px;
      nj = (nj + py) % py;
      const int nb = g.index(ni, nj);
      if (!r.in_g(nb)) r.facets.emplace_back(idx, nb);
    }
  }
}

}  // namespace

RegionSet build_nested_regions(const Grid& grid, const OmegaSpec& spec, GeometryCase c) {
  RegionSet r(grid);
  r.geometry_case = c;
  const int n = grid.size();
  r.label.assign(static_cast<std::size_t>(n), Region::omega0);
  r.depth.assign(static_cast<std::size_t>(n), 0.0);
  std::vector<char> in_omega(static_cast<std::size_t>(n), 0);
  const double h = std::max(grid.hx(), grid.hy());

  if (c == GeometryCase::interior_patch) {
    require(spec.radius > 0.0, "omega radius must be positive");
    const double w1 = spec.omega1_width > 0.0 ? spec.omega1_width : 0.5 * spec.radius;
    const double ws = spec.star_width > 0.0 ? spec.star_width : spec.radius;
    const double cx = spec.center_x;
    const double cy = spec.center_y;
    // Room available before a wall or the periodic seam.
    const double room = std::min({cx, grid.lx() - cx, cy, grid.ly() - cy});
    require(spec.radius < room, "omega disc does not fit strictly inside the domain");
    const double outer = spec.radius + w1 + ws;
    const double reach = h * grid.order();
    std::ostringstream msg;
    msg << "omega too large: bands reach radius " << outer << " but only " << room - reach
        << " is available";
    require(outer < room - reach, msg.str());
    r.anchor = {cx, cy};
    r.level_inner = spec.radius + w1;
    r.level_outer = outer;
    for (int idx = 0; idx < n; ++idx) {
      const double dx = grid.x(grid.ix(idx)) - cx;
      const double dy = grid.y(grid.jy(idx)) - cy;
      r.depth[idx] = std::hypot(dx, dy);
      in_omega[idx] = r.depth[idx] < spec.radius;
    }
  } else {
    require(grid.wall_x() && grid.wall_y(),
            "collar geometries need walls in both directions for a convex weight");
    const double w = spec.collar_width;
    require(w > 0.0, "collar width must be positive");
    const double w1 = spec.omega1_width > 0.0 ? spec.omega1_width : 0.5 * w;
    const double ws = spec.star_width > 0.0 ? spec.star_width : w;
    double radius = 0.0;
    if (c == GeometryCase::full_collar) {
      r.anchor = {0.5 * grid.lx(), 0.5 * grid.ly()};
      radius = 0.5 * std::min(grid.lx(), grid.ly()) - w - w1;
      for (int idx = 0; idx < n; ++idx) in_omega[idx] = wall_distance(grid, idx) < w;
    } else {
      const std::string& side = spec.side;
      const bool horizontal = side == "left" || side == "right";
      const double length = horizontal ? grid.lx() : grid.ly();
      const double offset = spec.anchor_offset > 0.0 ? spec.anchor_offset : length;
      if (side == "left") r.anchor = {grid.lx() + offset, 0.5 * grid.ly()};
      else if (side == "right") r.anchor = {-offset, 0.5 * grid.ly()};
      else if (side == "bottom") r.anchor = {0.5 * grid.lx(), grid.ly() + offset};
      else if (side == "top") r.anchor = {0.5 * grid.lx(), -offset};
      else fail(ErrorKind::config, "unknown collar side '" + side + "'");
      radius = length + offset - w - w1;
      require(w + w1 + ws < length, "collar bands do not fit in the domain");
      for (int idx = 0; idx < n; ++idx) in_omega[idx] = side_distance(grid, idx, side) < w;
    }
    require(radius - ws > 0.0, "collar too wide to leave a nonempty omega0");
    r.level_inner = -radius;
    r.level_outer = -(radius - ws);
    for (int idx = 0; idx < n; ++idx) {
      const double dx = grid.x(grid.ix(idx)) - r.anchor[0];
      const double dy = grid.y(grid.jy(idx)) - r.anchor[1];
      r.depth[idx] = -std::hypot(dx, dy);
      // Omega must stay in the psi >= 0 side.
      require(!in_omega[idx] || r.depth[idx] < r.level_inner,
              "collar omega intersects the inner bands");
    }
  }

  for (int idx = 0; idx < n; ++idx) {
    Region lab = Region::omega0;
    if (in_omega[idx]) lab = Region::omega;
    else if (r.depth[idx] < r.level_inner) lab = Region::omega1;
    else if (r.depth[idx] < r.level_outer) lab = Region::omega_star;
    r.label[idx] = lab;
    switch (lab) {
      case Region::omega: r.omega.push_back(idx); break;
      case Region::omega1: r.omega1.push_back(idx); break;
      case Region::omega_star: r.omega_star.push_back(idx); break;
      case Region::omega0: r.omega0.push_back(idx); break;
    }
  }
  require(!r.omega.empty(), "omega contains no grid nodes");
  require(!r.omega1.empty() && !r.omega_star.empty() && !r.omega0.empty(),
          "omega too large to admit nonempty omega1, omega_star and omega0");
  collect_facets(r);
  return r;
}

ScalarField omega_indicator(const RegionSet& regions) {
  ScalarField m(regions.grid);
  for (int idx : regions.omega) m.values[idx] = 1.0;
  return m;
}

NodeSet disc_nodes(const Grid& grid, double cx, double cy, double radius) {
  if (!(radius > 0.0)) fail(ErrorKind::geometry, "disc radius must be positive");
  auto gap = [](double d, double length, bool wall) {
    if (wall) return d;
    d = std::fmod(std::abs(d), length);
    return std::min(d, length - d);
  };
  NodeSet out;
  for (int idx = 0; idx < grid.size(); ++idx) {
    const double dx = gap(grid.x(grid.ix(idx)) - cx, grid.lx(), grid.wall_x());
    const double dy = gap(grid.y(grid.jy(idx)) - cy, grid.ly(), grid.wall_y());
    if (std::hypot(dx, dy) < radius) out.push_back(idx);
  }
  if (out.empty()) fail(ErrorKind::geometry, "disc contains no grid nodes");
  return out;
}

double quintic_step(double u) {
  if (u <= 0.0) return 1.0;
  if (u >= 1.0) return 0.0;
  const double u3 = u * u * u;
  return 1.0 - u3 * (10.0 - 15.0 * u + 6.0 * u * u);
}

int cutoff_layer_cells(int stencil_order) { return std::max(3, stencil_order); }

CutoffField build_cutoff(const RegionSet& regions) {
  const Grid& g = regions.grid;
  const double h = std::max(g.hx(), g.hy());
  CutoffField chi{ScalarField(g)};
  chi.layer = cutoff_layer_cells(g.order()) * h;
  chi.transition_start = regions.level_inner + chi.layer;
  chi.transition_end = regions.level_outer - chi.layer;
  const double band = chi.transition_end - chi.transition_start;
  if (band < 3.0 * h) {
    std::ostringstream os;
    os << "cutoff transition band of width " << band << " is thinner than 3 cells (h=" << h
       << ")";
    fail(ErrorKind::resolution, os.str());
  }
  for (int idx = 0; idx < g.size(); ++idx) {
    switch (regions.label[idx]) {
      case Region::omega:
      case Region::omega1: chi.values.values[idx] = 1.0; break;
      case Region::omega0: chi.values.values[idx] = 0.0; break;
      case Region::omega_star: {
        const double u = (regions.depth[idx] - chi.transition_start) / band;
        chi.values.values[idx] = quintic_step(u);
        break;
      }
    }
  }
  return chi;
}

WeightField build_weight(const RegionSet& regions) {
  const Grid& g = regions.grid;
  WeightField w{ScalarField(g)};
  const double r0 = std::abs(regions.level_inner);
  w.center = regions.anchor;
  w.offset = r0 * r0;
  for (int idx = 0; idx < g.size(); ++idx) {
    const double dx = g.x(g.ix(idx)) - regions.anchor[0];
    const double dy = g.y(g.jy(idx)) - regions.anchor[1];
    w.psi.values[idx] = dx * dx + dy * dy - r0 * r0;
  }
  const DiffOps& d = g.ops();
  const VecD px = d.dx * w.psi.values;
  const VecD py = d.dy * w.psi.values;
  const VecD pxx = d.dxx * w.psi.values;
  const VecD pyy = d.dyy * w.psi.values;
  const VecD pxy = d.dx * py;
  double rho = std::numeric_limits<double>::infinity();
  double k = std::numeric_limits<double>::infinity();
  for (int idx : regions.g_nodes()) {
    Eigen::Matrix2d hess;
    hess << pxx[idx], pxy[idx], pxy[idx], pyy[idx];
    rho = std::min(rho, Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d>(hess).eigenvalues()[0]);
    k = std::min(k, std::hypot(px[idx], py[idx]));
  }
  w.rho = rho;
  w.k = k;
  if (!(rho > 0.0) || !(k > 0.0)) {
    std::ostringstream os;
    os << "weight is not admissible on G: rho=" << rho << ", k=" << k;
    fail(ErrorKind::weight, os.str());
  }
  for (int idx : regions.omega1) {
    w.ordering_violation = std::max(w.ordering_violation, -w.psi.values[idx]);
  }
  for (int idx : regions.omega_star) {
    w.ordering_violation = std::max(w.ordering_violation, w.psi.values[idx]);
  }
  for (int idx : regions.omega0) {
    w.ordering_violation = std::max(w.ordering_violation, w.psi.values[idx]);
  }
  w.ordering_holds = w.ordering_violation == 0.0;
  return w;
}

}  // namespace mhdlab
