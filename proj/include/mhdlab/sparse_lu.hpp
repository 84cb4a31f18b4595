#pragma once

#include <memory>

#include "mhdlab/field.hpp"

namespace mhdlab {

/// Sparse LU factorization of a square matrix, backed by UMFPACK.
///
/// The factorization is checked on construction: a singular warning or a
/// failed trial solve raises ErrorKind::numerical.
class SparseLu {
 public:
  explicit SparseLu(const SparseMatrix& m);
  ~SparseLu();
  SparseLu(const SparseLu&) = delete;
  SparseLu& operator=(const SparseLu&) = delete;

  int rows() const { return static_cast<int>(matrix_.rows()); }
  /// Reciprocal condition estimate reported by the factorization.
  double rcond() const { return rcond_; }

  VecD solve(const VecD& b) const;
  /// Solves with the transposed matrix using the same factors.
  VecD solve_transpose(const VecD& b) const;
  VecC solve(const VecC& b) const;
  VecC solve_transpose(const VecC& b) const;
  Eigen::MatrixXcd solve(const Eigen::MatrixXcd& b) const;
  Eigen::MatrixXcd solve_transpose(const Eigen::MatrixXcd& b) const;

 private:
  VecD solve_system(const VecD& b, bool transpose) const;

  SparseMatrix matrix_;
  void* symbolic_ = nullptr;
  void* numeric_ = nullptr;
  double rcond_ = 0.0;
};

/// Some OpenBLAS builds select a faulty kernel family on CPUs they do not
/// know (the cooperlake kernels on newer Xeons). When that family is active
/// and OPENBLAS_CORETYPE is unset, the process re-executes itself with a
/// compatible core type. Call first thing in main().
void ensure_blas_runtime(int argc, char** argv);

}  // namespace mhdlab
