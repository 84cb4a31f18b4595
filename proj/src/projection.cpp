#include "mhdlab/projection.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include <Eigen/QR>

namespace mhdlab {

namespace {

constexpr double kRegularization = 1e-12;
constexpr double kNullThreshold = 1e-9;

SparseMatrix select_rows(const SparseMatrix& m, const std::vector<int>& rows,
                         const VecD& scale) {
  std::vector<int> slot(static_cast<std::size_t>(m.rows()), -1);
  for (std::size_t r = 0; r < rows.size(); ++r) slot[rows[r]] = static_cast<int>(r);
  std::vector<Eigen::Triplet<double>> t;
  t.reserve(static_cast<std::size_t>(m.nonZeros()));
  for (int k = 0; k < m.outerSize(); ++k) {
    for (SparseMatrix::InnerIterator it(m, k); it; ++it) {
      const int s = slot[it.row()];
      if (s >= 0) t.emplace_back(s, it.col(), it.value() / scale[s]);
    }
  }
  SparseMatrix out(static_cast<Eigen::Index>(rows.size()), m.cols());
  out.setFromTriplets(t.begin(), t.end());
  out.makeCompressed();
  return out;
}

// Orthonormal basis for the near-null space of a C^T with unit rows.
Eigen::MatrixXd near_null_space(const SparseMatrix& unit_rows) {
  const Eigen::Index m = unit_rows.rows();
  SparseMatrix gram = unit_rows * SparseMatrix(unit_rows.transpose());
  SparseMatrix shifted = gram;
  for (Eigen::Index i = 0; i < m; ++i) shifted.coeffRef(i, i) += kRegularization;
  Eigen::SimplicialLDLT<SparseMatrix> ldlt(shifted);
  if (ldlt.info() != Eigen::Success) {
    fail(ErrorKind::numerical, "constraint Gram factorization failed");
  }
  std::mt19937_64 rng(12345);
  std::normal_distribution<double> normal;
  Eigen::Index block = std::min<Eigen::Index>(16, m);
  while (true) {
    Eigen::MatrixXd x(m, block);
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = normal(rng);
    for (int it = 0; it < 4; ++it) {
      x = ldlt.solve(x);
      Eigen::HouseholderQR<Eigen::MatrixXd> qr(x);
      x = qr.householderQ() * Eigen::MatrixXd::Identity(m, block);
    }
    const Eigen::MatrixXd h = x.transpose() * (gram * x);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(0.5 * (h + h.transpose()));
    Eigen::Index count = 0;
    for (Eigen::Index i = 0; i < block; ++i) {
      if (eig.eigenvalues()[i] < kNullThreshold) ++count;
    }
    if (count < block || block == m) {
      return x * eig.eigenvectors().leftCols(count);
    }
    block = std::min<Eigen::Index>(2 * block, m);
  }
}

}  // namespace

ConstraintProjector::ConstraintProjector(const SparseMatrix& constraints)
    : original_(constraints) {
  const Eigen::Index m = constraints.rows();
  VecD norms = VecD::Zero(m);
  for (int k = 0; k < constraints.outerSize(); ++k) {
    for (SparseMatrix::InnerIterator it(constraints, k); it; ++it) {
      norms[it.row()] += it.value() * it.value();
    }
  }
  norms = norms.cwiseSqrt();
  std::vector<int> nonzero_rows;
  for (Eigen::Index r = 0; r < m; ++r) {
    if (norms[r] > 0.0) nonzero_rows.push_back(static_cast<int>(r));
    else dropped_rows_.push_back(static_cast<int>(r));
  }
  VecD nz_norms(static_cast<Eigen::Index>(nonzero_rows.size()));
  for (std::size_t r = 0; r < nonzero_rows.size(); ++r) nz_norms[r] = norms[nonzero_rows[r]];
  const SparseMatrix unit = select_rows(constraints, nonzero_rows, nz_norms);

  std::vector<char> drop(nonzero_rows.size(), 0);
  if (unit.rows() > 0) {
    const Eigen::MatrixXd null = near_null_space(unit);
    if (null.cols() > 0) {
      Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(null.transpose());
      for (Eigen::Index k = 0; k < null.cols(); ++k) {
        drop[qr.colsPermutation().indices()[k]] = 1;
      }
    }
  }
  std::vector<int> kept_local;
  for (std::size_t r = 0; r < nonzero_rows.size(); ++r) {
    if (drop[r]) {
      dropped_rows_.push_back(nonzero_rows[r]);
    } else {
      kept_rows_.push_back(nonzero_rows[r]);
      kept_local.push_back(static_cast<int>(r));
    }
  }
  std::sort(dropped_rows_.begin(), dropped_rows_.end());
  kept_norms_.resize(static_cast<Eigen::Index>(kept_rows_.size()));
  for (std::size_t r = 0; r < kept_rows_.size(); ++r) kept_norms_[r] = norms[kept_rows_[r]];
  kept_ = select_rows(constraints, kept_rows_, kept_norms_);

  gram_ = std::make_shared<Eigen::SimplicialLDLT<SparseMatrix>>();
  SparseMatrix g = kept_ * SparseMatrix(kept_.transpose());
  gram_->compute(g);
  if (gram_->info() != Eigen::Success) {
    fail(ErrorKind::numerical, "projection Gram factorization failed");
  }
  const VecD d = gram_->vectorD();
  if (d.size() > 0 && d.minCoeff() <= 1e-13 * d.maxCoeff()) {
    std::ostringstream os;
    os << "constraint rows remain dependent after pruning (pivot ratio "
       << d.minCoeff() / d.maxCoeff() << ")";
    fail(ErrorKind::projection, os.str());
  }
}

VecD ConstraintProjector::multipliers(const VecD& x) const {
  if (x.size() != unknowns()) fail(ErrorKind::shape, "projector input size mismatch");
  if (rank() == 0) return VecD();
  const VecD rhs = kept_ * x;
  VecD q = gram_->solve(rhs);
  // One step of refinement keeps the projection at the rounding level.
  const SparseMatrix kt = kept_.transpose();
  const VecD r = rhs - kept_ * (kt * q);
  q += gram_->solve(r);
  return q;
}

VecC ConstraintProjector::multipliers(const VecC& x) const {
  const VecD re = multipliers(VecD(x.real()));
  const VecD im = multipliers(VecD(x.imag()));
  VecC q(re.size());
  q.real() = re;
  q.imag() = im;
  return q;
}

VecD ConstraintProjector::project(const VecD& x) const {
  if (rank() == 0) return x;
  return x - kept_.transpose() * multipliers(x);
}

VecC ConstraintProjector::project(const VecC& x) const {
  if (rank() == 0) return x;
  return x - kept_.transpose() * multipliers(x);
}

Eigen::MatrixXcd ConstraintProjector::project(const Eigen::MatrixXcd& x) const {
  Eigen::MatrixXcd out(x.rows(), x.cols());
  for (Eigen::Index c = 0; c < x.cols(); ++c) out.col(c) = project(VecC(x.col(c)));
  return out;
}

double ConstraintProjector::constraint_defect(const VecD& x) const {
  const double nx = x.norm();
  if (nx == 0.0) return 0.0;
  return (original_ * x).cwiseAbs().maxCoeff() / nx;
}

SparseMatrix divergence_constraint(const Grid& grid, BcTag tag) {
  const BoundaryMap map = boundary_map(grid, tag);
  const int n = grid.size();
  const auto& interior = grid.interior_nodes();
  SparseMatrix sel(static_cast<Eigen::Index>(interior.size()), n);
  std::vector<Eigen::Triplet<double>> t;
  for (std::size_t r = 0; r < interior.size(); ++r) {
    t.emplace_back(static_cast<int>(r), interior[r], 1.0);
  }
  sel.setFromTriplets(t.begin(), t.end());
  SparseMatrix div(n, 2 * n);
  {
    std::vector<Eigen::Triplet<double>> d;
    const DiffOps& ops = grid.ops();
    for (int k = 0; k < n; ++k) {
      for (SparseMatrix::InnerIterator it(ops.dx, k); it; ++it) {
        d.emplace_back(it.row(), it.col(), it.value());
      }
      for (SparseMatrix::InnerIterator it(ops.dy, k); it; ++it) {
        d.emplace_back(it.row(), n + it.col(), it.value());
      }
    }
    div.setFromTriplets(d.begin(), d.end());
  }
  SparseMatrix out = sel * div * map.extend;
  out.prune(0.0);
  return out;
}

SparseMatrix mean_constraint(const Grid& grid) {
  const int m = static_cast<int>(grid.interior_nodes().size());
  std::vector<Eigen::Triplet<double>> t;
  t.reserve(2 * static_cast<std::size_t>(m));
  for (int c = 0; c < 2; ++c) {
    for (int k = 0; k < m; ++k) t.emplace_back(c, c * m + k, 1.0);
  }
  SparseMatrix out(2, 2 * m);
  out.setFromTriplets(t.begin(), t.end());
  return out;
}

HelmholtzProjector::HelmholtzProjector(const Grid& grid, BcTag tag)
    : grid_(grid),
      tag_(tag),
      map_(boundary_map(grid, tag)),
      projector_(std::make_shared<ConstraintProjector>(divergence_constraint(grid, tag))) {}

VectorField2 HelmholtzProjector::project(const VectorField2& v) const {
  require_same_grid(grid_, v.grid);
  const VecD x = map_.restriction * v.stacked();
  const VecD full = map_.extend * projector_->project(x);
  return VectorField2::from_stacked(grid_, full, tag_);
}

VectorField2 HelmholtzProjector::removed(const VectorField2& v) const {
  require_same_grid(grid_, v.grid);
  const VecD x = map_.restriction * v.stacked();
  const VecD full = map_.extend * (x - projector_->project(x));
  return VectorField2::from_stacked(grid_, full, tag_);
}

VectorField2 helmholtz_project(const VectorField2& v) {
  return HelmholtzProjector(v.grid, v.tag).project(v);
}

SparseMatrix saddle_matrix(const SparseMatrix& block, const SparseMatrix& constraints) {
  const int n = static_cast<int>(block.rows());
  const int r = static_cast<int>(constraints.rows());
  if (block.cols() != n || constraints.cols() != n) fail(ErrorKind::shape, "saddle block mismatch");
  std::vector<Eigen::Triplet<double>> t;
  t.reserve(static_cast<std::size_t>(block.nonZeros() + 2 * constraints.nonZeros()));
  for (int k = 0; k < block.outerSize(); ++k) {
    for (SparseMatrix::InnerIterator it(block, k); it; ++it) {
      t.emplace_back(it.row(), it.col(), it.value());
    }
  }
  for (int k = 0; k < constraints.outerSize(); ++k) {
    for (SparseMatrix::InnerIterator it(constraints, k); it; ++it) {
      t.emplace_back(n + it.row(), it.col(), it.value());
      t.emplace_back(it.col(), n + it.row(), it.value());
    }
  }
  SparseMatrix k(n + r, n + r);
  k.setFromTriplets(t.begin(), t.end());
  k.makeCompressed();
  return k;
}

}  // namespace mhdlab
