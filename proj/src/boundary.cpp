#include "mhdlab/boundary.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <ostream>

namespace mhdlab {

BcTag parse_bc_tag(const std::string& name) {
  if (name == "velocity_dirichlet") return BcTag::velocity_dirichlet;
  if (name == "magnetic_tangential") return BcTag::magnetic_tangential;
  fail(ErrorKind::config, "unknown boundary tag '" + name + "'");
}

const char* to_string(BcTag tag) {
  return tag == BcTag::velocity_dirichlet ? "velocity_dirichlet" : "magnetic_tangential";
}

namespace {

// Weights for t0 in terms of t1..t4 that zero the one-sided derivative of
// the grid's order.
std::vector<double> neumann_weights(int order) {
  if (order == 2) return {4.0 / 3.0, -1.0 / 3.0};
  return {48.0 / 25.0, -36.0 / 25.0, 16.0 / 25.0, -3.0 / 25.0};
}

}  // namespace

BoundaryMap boundary_map(const Grid& grid, BcTag tag) {
  const int n = grid.size();
  const int m = static_cast<int>(grid.interior_nodes().size());
  std::vector<Eigen::Triplet<double>> ext;
  std::vector<Eigen::Triplet<double>> res;
  ext.reserve(2 * static_cast<std::size_t>(n));
  res.reserve(2 * static_cast<std::size_t>(m));
  const std::vector<double> w = neumann_weights(grid.order());

  for (int c = 0; c < 2; ++c) {
    for (int idx = 0; idx < n; ++idx) {
      const int pos = grid.interior_position(idx);
      if (pos >= 0) {
        ext.emplace_back(c * n + idx, c * m + pos, 1.0);
        res.emplace_back(c * m + pos, c * n + idx, 1.0);
        continue;
      }
      if (tag == BcTag::velocity_dirichlet) continue;
      const bool normal = (c == 0 && grid.on_wall_x(idx)) || (c == 1 && grid.on_wall_y(idx));
      if (normal) continue;
      // Tangential component on a wall normal to the other direction.
      const int i = grid.ix(idx);
      const int j = grid.jy(idx);
      for (std::size_t k = 0; k < w.size(); ++k) {
        const int step = static_cast<int>(k) + 1;
        int src = 0;
        if (c == 0) {
          src = grid.index(i, j == 0 ? step : grid.ny() - step);
        } else {
          src = grid.index(i == 0 ? step : grid.nx() - step, j);
        }
        ext.emplace_back(c * n + idx, c * m + grid.interior_position(src), w[k]);
      }
    }
  }
  BoundaryMap map;
  map.extend.resize(2 * n, 2 * m);
  map.extend.setFromTriplets(ext.begin(), ext.end());
  map.restriction.resize(2 * m, 2 * n);
  map.restriction.setFromTriplets(res.begin(), res.end());
  return map;
}

double boundary_violation(const VectorField2& v, BcTag tag) {
  double worst = 0.0;
  if (v.grid.fully_periodic()) return worst;
  const VecD curl = v.grid.ops().dx * v.u2 - v.grid.ops().dy * v.u1;
  for (int idx : v.grid.boundary_nodes()) {
    if (tag == BcTag::velocity_dirichlet) {
      worst = std::max({worst, std::abs(v.u1[idx]), std::abs(v.u2[idx])});
    } else {
      if (v.grid.on_wall_x(idx)) worst = std::max(worst, std::abs(v.u1[idx]));
      if (v.grid.on_wall_y(idx)) worst = std::max(worst, std::abs(v.u2[idx]));
      worst = std::max(worst, std::abs(curl[idx]));
    }
  }
  return worst;
}

NodeSet all_nodes(const Grid& grid) {
  NodeSet s(static_cast<std::size_t>(grid.size()));
  for (int i = 0; i < grid.size(); ++i) s[i] = i;
  return s;
}

namespace {

void write_prefix(std::ostream& os, const Grid& g, int idx) {
  os << idx << ' ' << g.x(g.ix(idx)) << ' ' << g.y(g.jy(idx));
}

}  // namespace

void write_snapshot(std::ostream& os, const VectorField2& v) {
  os << "# index x y u1 u2\n";
  os.precision(17);
  for (int idx = 0; idx < v.grid.size(); ++idx) {
    write_prefix(os, v.grid, idx);
    os << ' ' << v.u1[idx] << ' ' << v.u2[idx] << '\n';
  }
}

void write_snapshot(std::ostream& os, const ScalarField& s) {
  os << "# index x y value\n";
  os.precision(17);
  for (int idx = 0; idx < s.grid.size(); ++idx) {
    write_prefix(os, s.grid, idx);
    os << ' ' << s.values[idx] << '\n';
  }
}

void write_snapshot(std::ostream& os, const ComplexStateVector& s) {
  os << "# index x y re_phi1 im_phi1 re_phi2 im_phi2 re_xi1 im_xi1 re_xi2 im_xi2\n";
  os.precision(17);
  const Grid& g = s.phi.grid;
  for (int idx = 0; idx < g.size(); ++idx) {
    write_prefix(os, g, idx);
    for (const Complex z : {s.phi.u1[idx], s.phi.u2[idx], s.xi.u1[idx], s.xi.u2[idx]}) {
      os << ' ' << z.real() << ' ' << z.imag();
    }
    os << '\n';
  }
}

}  // namespace mhdlab
