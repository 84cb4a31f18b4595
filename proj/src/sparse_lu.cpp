#include "mhdlab/sparse_lu.hpp"

#include <dlfcn.h>
#include <unistd.h>

#include <cctype>
#include <cmath>
#include <cstdlib>
#include <string>

#include <umfpack.h>

#include "mhdlab/error.hpp"

namespace mhdlab {

SparseLu::SparseLu(const SparseMatrix& m) : matrix_(m) {
  if (m.rows() != m.cols() || m.rows() == 0) fail(ErrorKind::shape, "LU needs a nonempty square matrix");
  matrix_.makeCompressed();
  double control[UMFPACK_CONTROL];
  double info[UMFPACK_INFO];
  umfpack_di_defaults(control);
  const int n = rows();
  int status = umfpack_di_symbolic(n, n, matrix_.outerIndexPtr(), matrix_.innerIndexPtr(),
                                   matrix_.valuePtr(), &symbolic_, control, info);
  if (status != UMFPACK_OK) fail(ErrorKind::numerical, "sparse LU analysis failed");
  status = umfpack_di_numeric(matrix_.outerIndexPtr(), matrix_.innerIndexPtr(),
                              matrix_.valuePtr(), symbolic_, &numeric_, control, info);
  rcond_ = info[UMFPACK_RCOND];
  if (status != UMFPACK_OK) {
    fail(ErrorKind::numerical, "sparse LU factorization failed (matrix singular to working precision)");
  }

  // Trial solve against a smooth right-hand side.
  VecD b(n);
  for (int i = 0; i < n; ++i) b[i] = std::sin(0.37 * i + 0.1) + 0.5;
  const VecD x = solve(b);
  const double scale = matrix_.cwiseAbs().sum() / n * x.norm() + b.norm();
  if (!x.allFinite() || (matrix_ * x - b).norm() > 1e-8 * scale) {
    fail(ErrorKind::numerical,
         "sparse LU trial solve failed; if OpenBLAS is in use, try OPENBLAS_CORETYPE=SkylakeX "
         "or Haswell");
  }
}

SparseLu::~SparseLu() {
  if (numeric_) umfpack_di_free_numeric(&numeric_);
  if (symbolic_) umfpack_di_free_symbolic(&symbolic_);
}

VecD SparseLu::solve_system(const VecD& b, bool transpose) const {
  if (b.size() != rows()) fail(ErrorKind::shape, "LU right-hand side size mismatch");
  VecD x(b.size());
  double control[UMFPACK_CONTROL];
  double info[UMFPACK_INFO];
  umfpack_di_defaults(control);
  control[UMFPACK_IRSTEP] = 0;
  const int status = umfpack_di_solve(transpose ? UMFPACK_At : UMFPACK_A, matrix_.outerIndexPtr(),
                                      matrix_.innerIndexPtr(), matrix_.valuePtr(), x.data(),
                                      b.data(), numeric_, control, info);
  if (status != UMFPACK_OK) fail(ErrorKind::numerical, "sparse LU solve failed");
  return x;
}

VecD SparseLu::solve(const VecD& b) const { return solve_system(b, false); }
VecD SparseLu::solve_transpose(const VecD& b) const { return solve_system(b, true); }

VecC SparseLu::solve(const VecC& b) const {
  VecC x(b.size());
  x.real() = solve_system(b.real(), false);
  x.imag() = solve_system(b.imag(), false);
  return x;
}

VecC SparseLu::solve_transpose(const VecC& b) const {
  VecC x(b.size());
  x.real() = solve_system(b.real(), true);
  x.imag() = solve_system(b.imag(), true);
  return x;
}

Eigen::MatrixXcd SparseLu::solve(const Eigen::MatrixXcd& b) const {
  Eigen::MatrixXcd x(b.rows(), b.cols());
  for (Eigen::Index c = 0; c < b.cols(); ++c) x.col(c) = solve(VecC(b.col(c)));
  return x;
}

Eigen::MatrixXcd SparseLu::solve_transpose(const Eigen::MatrixXcd& b) const {
  Eigen::MatrixXcd x(b.rows(), b.cols());
  for (Eigen::Index c = 0; c < b.cols(); ++c) x.col(c) = solve_transpose(VecC(b.col(c)));
  return x;
}

void ensure_blas_runtime(int /*argc*/, char** argv) {
  using CoreName = char* (*)();
  auto core = reinterpret_cast<CoreName>(dlsym(RTLD_DEFAULT, "openblas_get_corename"));
  if (core == nullptr || std::getenv("OPENBLAS_CORETYPE") != nullptr) return;
  std::string name = core();
  for (char& ch : name) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  if (name != "cooperlake") return;
  setenv("OPENBLAS_CORETYPE", "SkylakeX", 1);
  execv("/proc/self/exe", argv);
  // exec failed: carry on; the LU trial solve reports a broken kernel.
}

}  // namespace mhdlab
