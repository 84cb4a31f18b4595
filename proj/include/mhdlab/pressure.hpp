#pragma once

#include "mhdlab/operators.hpp"

namespace mhdlab {

struct PressureSolution {
  ComplexScalarField p;
  /// max |lap p + div L1 phi - div L2 xi| over the nodes where the Poisson
  /// equation is imposed, relative to max |right-hand side|.
  double residual = 0.0;
  /// Constant removed from the Neumann data to make the wall problem
  /// solvable (zero on periodic grids).
  double compatibility_defect = 0.0;
};

/// Solves lap p = -div L1(phi) + div L2(xi) with zero mean. Periodic grids
/// use the periodic Laplacian; at walls the normal derivative of p is set by
/// the normal momentum balance. Throws ErrorKind::numerical if the solve
/// fails.
PressureSolution pressure_from_state(const ComplexStateVector& s, const Equilibrium& eq);
PressureSolution pressure_from_state(const StateVector& s, const Equilibrium& eq);

/// max over nodes of |div L1(phi) - 2 sum_ij d_i y_j d_j phi_i|, where L1 is
/// the Oseen operator of the equilibrium velocity y. For divergence-free y
/// and phi the two sides agree up to discretization error.
double oseen_divergence_gap(const VectorField2& y, const VectorField2& phi);

/// An eigenpair of the generator read as a solution of the eigenproblem
/// -nu lap phi + L1 phi - L2 xi + grad p = mu phi,
/// -eta lap xi + M1 xi - M2 phi = mu xi, with mu = sigma - lambda.
struct EigenSolution {
  Complex lambda;
  Complex mu;
  ComplexStateVector state;
  /// Pressure recovered from the divergence multipliers. On periodic grids
  /// grad p is exactly the discrete gradient force; null modes are removed.
  ComplexScalarField pressure;
  /// Constraint force not carried by grad p: the magnetic-row force and, on
  /// periodic grids, the mean-mode forces.
  ComplexStateVector extra_force;
  /// Discrete L2 norms of the two residual rows relative to the state norm.
  double momentum_residual = 0.0;
  double induction_residual = 0.0;
  double relative_residual = 0.0;
};

/// Evaluates the eigenproblem terms with node-level operators built from the
/// equilibrium (independently of the assembled matrix) and reports the
/// residual. The generator supplies the constraints, layout and shift.
EigenSolution pde_eigen_residual(const LinearOperator& generator, const Equilibrium& eq,
                                 Complex lambda, const VecC& x);

}  // namespace mhdlab
