#pragma once

#include <cmath>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "mhdlab/projection.hpp"

namespace mhdlab {

// ---------------------------------------------------------------------------
// Equilibria

enum class EquilibriumKind { zero, shear, taylor_vortex, custom };

EquilibriumKind parse_equilibrium_kind(const std::string& name);
const char* to_string(EquilibriumKind kind);

/// One term a*sin(kx*x + ky*y + phase) of a stream function.
struct StreamMode {
  double kx = 1.0;
  double ky = 0.0;
  double amplitude = 1.0;
  double phase = 0.0;
};

struct EquilibriumParams {
  double velocity_amplitude = 1.0;
  double magnetic_amplitude = 0.0;
  /// Integer mode number of the shear / vortex profile.
  int mode = 1;
  /// Stream-function modes for kind == custom.
  std::vector<StreamMode> velocity_modes;
  std::vector<StreamMode> magnetic_modes;
};

struct Equilibrium {
  VectorField2 velocity;
  VectorField2 magnetic;
  double nu = 1.0;
  double eta = 1.0;
  /// Forcings that make the pair an exact discrete steady state.
  VectorField2 f;
  VectorField2 g;
  /// sup over nodes of |grad y_e| + |grad B_e| (Frobenius norms).
  double grad_bound = 0.0;
  /// Change of the sampled fields under the Helmholtz projection.
  double projection_change = 0.0;
};

/// Samples an analytic divergence-free pair, applies boundary conditions,
/// projects, and records the forcing residuals of the steady equations
/// (the equilibrium pressure is taken as zero).
Equilibrium make_equilibrium(EquilibriumKind kind, const Grid& grid,
                             const EquilibriumParams& params, double nu = 1.0,
                             double eta = 1.0);

// ---------------------------------------------------------------------------
// Operators

/// Shape of the vectors an operator maps between.
struct FieldShape {
  enum class Kind { vector_nodes, vector_unknowns, state_unknowns };
  Kind kind = Kind::vector_nodes;
  int size = 0;
  bool operator==(const FieldShape&) const = default;
};

/// Interior-unknown layout of a state (phi, xi): [phi1 phi2 xi1 xi2], each on
/// the interior nodes.
class StateLayout {
 public:
  explicit StateLayout(const Grid& grid);

  const Grid& grid() const { return grid_; }
  int block() const { return m_; }
  int size() const { return 4 * m_; }
  const BoundaryMap& velocity_map() const { return velocity_; }
  const BoundaryMap& magnetic_map() const { return magnetic_; }
  /// Quadrature weight shared by every unknown.
  double cell_area() const { return grid_.hx() * grid_.hy(); }

  ComplexStateVector to_state(const VecC& x) const;
  StateVector to_state(const VecD& x) const;
  VecC from_state(const ComplexStateVector& s) const;
  VecD from_state(const StateVector& s) const;

  /// Unknown indices whose node lies in the given node set.
  std::vector<int> unknowns_in(const NodeSet& nodes) const;

  /// Discrete L2 inner product and norm over the unknowns.
  Complex inner(const VecC& a, const VecC& b) const { return cell_area() * a.dot(b); }
  double norm(const VecC& a) const { return std::sqrt(cell_area()) * a.norm(); }

 private:
  Grid grid_;
  int m_;
  BoundaryMap velocity_;
  BoundaryMap magnetic_;
};

/// Sparse matrix with shape descriptors. When a projector is attached the
/// operator is x -> P (matrix x), restricted to the projector's range.
struct LinearOperator {
  std::string label;
  SparseMatrix matrix;
  FieldShape dom;
  FieldShape codom;
  std::shared_ptr<const ConstraintProjector> projector;
  std::shared_ptr<const StateLayout> layout;
  double shift = 0.0;

  VecD apply(const VecD& x) const;
  VecC apply(const VecC& x) const;
  int size() const { return static_cast<int>(matrix.rows()); }
};

/// Coordinate text export, one "row col value" line per nonzero.
void write_coo(std::ostream& os, const LinearOperator& op);

/// (e.grad) v + (v.grad) e on stacked node vectors [v1; v2].
LinearOperator oseen_plus(const VectorField2& e);
/// (e.grad) v - (v.grad) e on stacked node vectors [v1; v2].
LinearOperator oseen_minus(const VectorField2& e);
/// Componentwise Laplacian on stacked node vectors.
LinearOperator vector_laplacian(const Grid& grid);

struct GeneratorOptions {
  double sigma = 0.0;
  /// Constrain the magnetic row to the solenoidal space as well.
  bool project_magnetic_row = true;
  /// On fully periodic grids, exclude the constant modes.
  bool remove_mean_modes = true;
};

/// Labeled blocks on interior unknowns: A1 = -lap (velocity), A2 = -lap
/// (magnetic), L1 = oseen_plus(y_e), L2 = oseen_plus(B_e) acting on xi,
/// M1 = oseen_minus(y_e) on xi, M2 = oseen_minus(B_e) on phi.
struct GeneratorBlocks {
  LinearOperator a1, a2, l1, l2, m1, m2;
};

GeneratorBlocks assemble_blocks(const Equilibrium& eq);

/// Constraint rows of the state space (divergence of phi, optionally of xi,
/// optionally the mean rows).
SparseMatrix state_constraints(const StateLayout& layout, const GeneratorOptions& opts);

LinearOperator assemble_generator(const Equilibrium& eq, const GeneratorOptions& opts);
LinearOperator assemble_adjoint(const Equilibrium& eq, const GeneratorOptions& opts);
/// Adjoint from an already assembled generator (shares projector and layout).
LinearOperator adjoint_of(const LinearOperator& generator);

}  // namespace mhdlab
