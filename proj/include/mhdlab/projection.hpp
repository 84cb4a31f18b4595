#pragma once

#include <memory>
#include <vector>

#include <Eigen/SparseCholesky>

#include "mhdlab/boundary.hpp"

namespace mhdlab {

/// Euclidean-orthogonal projector onto the null space of a sparse
/// constraint matrix C.
///
/// Rows are normalized and linearly dependent rows are dropped, so the kept
/// matrix has full row rank and its Gram matrix is factored once by sparse
/// LDL^T. Dependent rows are found from the near-null space of C C^T,
/// computed by regularized block inverse iteration.
class ConstraintProjector {
 public:
  explicit ConstraintProjector(const SparseMatrix& constraints);

  int unknowns() const { return static_cast<int>(kept_.cols()); }
  int rank() const { return static_cast<int>(kept_.rows()); }
  /// Number of original rows found to be dependent.
  int dropped() const { return static_cast<int>(dropped_rows_.size()); }

  /// Normalized full-row-rank constraint rows.
  const SparseMatrix& kept() const { return kept_; }
  /// Original row index of every kept row.
  const std::vector<int>& kept_rows() const { return kept_rows_; }
  /// 2-norm of every kept original row before normalization.
  const VecD& kept_norms() const { return kept_norms_; }
  const std::vector<int>& dropped_rows() const { return dropped_rows_; }

  /// Multipliers q with x - project(x) = kept()^T q.
  VecD multipliers(const VecD& x) const;
  VecC multipliers(const VecC& x) const;

  VecD project(const VecD& x) const;
  VecC project(const VecC& x) const;
  Eigen::MatrixXcd project(const Eigen::MatrixXcd& x) const;

  /// Max |C x| over the original rows, relative to |x|.
  double constraint_defect(const VecD& x) const;

 private:
  SparseMatrix original_;
  SparseMatrix kept_;
  std::vector<int> kept_rows_;
  std::vector<int> dropped_rows_;
  VecD kept_norms_;
  std::shared_ptr<Eigen::SimplicialLDLT<SparseMatrix>> gram_;
};

/// Discrete divergence on interior nodes as a matrix on the interior unknowns
/// of a field with the given tag.
SparseMatrix divergence_constraint(const Grid& grid, BcTag tag);

/// Two rows summing each component over the interior unknowns.
SparseMatrix mean_constraint(const Grid& grid);

/// Saddle matrix [[block, C^T], [C, 0]] for a constraint matrix C with full
/// row rank.
SparseMatrix saddle_matrix(const SparseMatrix& block, const SparseMatrix& constraints);

/// Helmholtz projection for fields of one boundary family on one grid.
/// The result is discretely divergence-free at interior nodes and satisfies
/// the boundary condition of the tag (zero normal trace in both cases).
class HelmholtzProjector {
 public:
  HelmholtzProjector(const Grid& grid, BcTag tag);

  VectorField2 project(const VectorField2& v) const;
  /// Gradient part removed by the projection.
  VectorField2 removed(const VectorField2& v) const;

  const ConstraintProjector& constraints() const { return *projector_; }
  const BoundaryMap& map() const { return map_; }

 private:
  Grid grid_;
  BcTag tag_;
  BoundaryMap map_;
  std::shared_ptr<const ConstraintProjector> projector_;
};

/// One-shot projection using the field's own tag.
VectorField2 helmholtz_project(const VectorField2& v);

}  // namespace mhdlab
