#pragma once

#include <array>
#include <string>
#include <utility>
#include <vector>

#include "mhdlab/field.hpp"

namespace mhdlab {

enum class GeometryCase { interior_patch, full_collar, partial_collar };
enum class Region : unsigned char { omega, omega1, omega_star, omega0 };

GeometryCase parse_geometry_case(const std::string& name);
const char* to_string(GeometryCase c);

struct OmegaSpec {
  /// Disc center (interior patch).
  double center_x = 3.141592653589793;
  double center_y = 3.141592653589793;
  double radius = 0.15 * 6.283185307179586;
  /// Collar width measured from the wall (collar cases).
  double collar_width = 0.1 * 6.283185307179586;
  /// Wall carrying a partial collar: "left", "right", "bottom" or "top".
  std::string side = "left";
  /// Widths of the bands omega1 and omega_star measured along the depth
  /// coordinate. Non-positive values select defaults derived from omega.
  double omega1_width = 0.0;
  double star_width = 0.0;
  /// Distance of the partial-collar anchor beyond the opposite wall.
  /// Non-positive selects the domain length in that direction.
  double anchor_offset = 0.0;
};

/// Nested decomposition omega, omega1, omega_star, omega0 of the grid nodes.
///
/// Bands are level sets of a scalar depth coordinate that increases away
/// from omega: |x - c| for an interior disc, and -|x - a| for collars, where
/// a is the weight anchor. omega1 = {depth < level_inner}, omega_star =
/// {level_inner <= depth < level_outer}, omega0 = the rest (omega excluded).
struct RegionSet {
  Grid grid;
  GeometryCase geometry_case = GeometryCase::interior_patch;
  NodeSet omega, omega1, omega_star, omega0;
  std::vector<Region> label;
  std::vector<double> depth;
  double level_inner = 0.0;
  double level_outer = 0.0;
  /// Disc center or weight anchor.
  std::array<double, 2> anchor{};
  /// Neighbor pairs (inside G, outside G) with G = omega1 + omega_star.
  std::vector<std::pair<int, int>> facets;

  explicit RegionSet(Grid g) : grid(std::move(g)) {}

  bool in_g(int idx) const {
    return label[idx] == Region::omega1 || label[idx] == Region::omega_star;
  }
  NodeSet g_nodes() const;
  /// Approximate diameter of G from projections on 360 directions.
  double g_diameter() const;
};

RegionSet build_nested_regions(const Grid& grid, const OmegaSpec& spec, GeometryCase c);

/// Indicator m(x) of omega.
ScalarField omega_indicator(const RegionSet& regions);

/// Nodes strictly inside a disc, measured with the periodic minimum image in
/// periodic directions. Used where only omega is needed.
NodeSet disc_nodes(const Grid& grid, double cx, double cy, double radius);

struct CutoffField {
  ScalarField values;
  /// Depth band [start, end] where the profile varies.
  double transition_start = 0.0;
  double transition_end = 0.0;
  /// Width of the flat layers at both ends of omega_star.
  double layer = 0.0;
};

/// Quintic C^2 profile: 1 at u <= 0, 0 at u >= 1.
double quintic_step(double u);

/// Layer cell count for a stencil order: the composite reach of the
/// operators entering the commutators, and never below 3.
int cutoff_layer_cells(int stencil_order);

CutoffField build_cutoff(const RegionSet& regions);

struct WeightField {
  ScalarField psi;
  double rho = 0.0;
  double k = 0.0;
  /// psi >= 0 on omega1 and psi <= 0 on omega_star + omega0.
  bool ordering_holds = false;
  /// Largest sign violation of the ordering (0 when it holds).
  double ordering_violation = 0.0;
  /// psi(x) = |x - center|^2 - offset, also evaluable off the grid.
  std::array<double, 2> center{};
  double offset = 0.0;

  double at(double x, double y) const {
    const double dx = x - center[0];
    const double dy = y - center[1];
    return dx * dx + dy * dy - offset;
  }
};

/// Shifted squared distance to the disc center (interior patch) or to the
/// collar anchor; rho and k are minima of the discrete Hessian eigenvalue and
/// gradient norm over G.
WeightField build_weight(const RegionSet& regions);

}  // namespace mhdlab
