#pragma once

#include "mhdlab/geometry.hpp"
#include "mhdlab/pressure.hpp"

namespace mhdlab {

/// chi lap v - lap(chi v), componentwise on a vector field.
template <class T>
BasicVectorField2<T> commutator_chi_laplacian(const ScalarField& chi, const BasicVectorField2<T>& v) {
  const BasicVectorField2<T> a = multiply(chi, laplacian(v));
  const BasicVectorField2<T> b = laplacian(multiply(chi, v));
  return BasicVectorField2<T>(v.grid, a.u1 - b.u1, a.u2 - b.u2, v.tag);
}

/// L(chi v) - chi L(v) for an operator on stacked node vectors.
template <class T>
BasicVectorField2<T> commutator_operator_chi(const SparseMatrix& op, const ScalarField& chi,
                                             const BasicVectorField2<T>& v) {
  const Vec<T> a = op * multiply(chi, v).stacked();
  const Vec<T> lv = op * v.stacked();
  const BasicVectorField2<T> b =
      multiply(chi, BasicVectorField2<T>::from_stacked(v.grid, lv, v.tag));
  return BasicVectorField2<T>::from_stacked(v.grid, a - b.stacked(), v.tag);
}

/// grad(chi p) - chi grad p.
template <class T>
BasicVectorField2<T> commutator_gradient_chi(const ScalarField& chi, const BasicScalarField<T>& p) {
  const BasicVectorField2<T> a = gradient(multiply(chi, p));
  const BasicVectorField2<T> b = multiply(chi, gradient(p));
  return BasicVectorField2<T>(p.grid, a.u1 - b.u1, a.u2 - b.u2);
}

/// Forcings of the cut-off system. With chi u in place of u:
///   f = nu [chi, lap] phi + [L1, chi] phi - [L2, chi] xi + [grad, chi] p
///   g = eta [chi, lap] xi + [M1, chi] xi - [M2, chi] phi
///   t = [lap, chi] p + [div L1, chi] phi - [div L2, chi] xi
/// Each commutator is the literal difference of the two operator orderings.
struct CommutatorForcing {
  ComplexVectorField2 f;
  ComplexVectorField2 g;
  ComplexScalarField t;
  /// Largest magnitude among the operator terms entering the differences.
  double scale = 0.0;
  /// max |f|, |g|, |t| over omega, omega1 and omega0 (filled when regions
  /// are supplied).
  double leakage = 0.0;
};

CommutatorForcing build_commutators(const CutoffField& chi, const ComplexStateVector& s,
                                    const ComplexScalarField& p, const Equilibrium& eq);

/// As above, and raises ErrorKind::commutator when the forcings leak out of
/// omega_star by more than tolerance * scale.
CommutatorForcing build_commutators(const RegionSet& regions, const CutoffField& chi,
                                    const ComplexStateVector& s, const ComplexScalarField& p,
                                    const Equilibrium& eq, double tolerance = 1e-12);

/// Largest forcing magnitude outside omega_star.
double commutator_leakage(const CommutatorForcing& forcing, const RegionSet& regions);

struct ChiSystemResidual {
  /// Max-norm residuals of the cut-off momentum and induction rows over the
  /// interior nodes.
  double momentum = 0.0;
  double induction = 0.0;
  /// Same rows for the bare eigenproblem.
  double bare_momentum = 0.0;
  double bare_induction = 0.0;
  /// max |cut-off residual - chi * bare residual|; zero up to rounding.
  double identity_gap = 0.0;
  /// Largest operator term, for relative comparisons.
  double scale = 0.0;
};

/// Residual of the cut-off system for an eigen-solution: the cut-off
/// state chi u with pressure chi p must satisfy the eigenproblem with the
/// commutator forcings as right-hand sides.
ChiSystemResidual assemble_chi_system_residual(const EigenSolution& sol, const CutoffField& chi,
                                               const Equilibrium& eq);

}  // namespace mhdlab
