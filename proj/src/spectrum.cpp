#include "mhdlab/spectrum.hpp"

#include <memory>

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>

#include <Eigen/Eigenvalues>
#include <Eigen/QR>
#include <Eigen/SVD>

#include "mhdlab/sparse_lu.hpp"

namespace mhdlab {

EigenStrategy parse_eigen_strategy(const std::string& name) {
  if (name == "dense") return EigenStrategy::dense;
  if (name == "shift_invert") return EigenStrategy::shift_invert;
  fail(ErrorKind::config, "unknown eigen strategy '" + name + "'");
}

const char* to_string(EigenStrategy s) {
  return s == EigenStrategy::dense ? "dense" : "shift_invert";
}

namespace {

using MatC = Eigen::MatrixXcd;
using MatD = Eigen::MatrixXd;

// Unit discrete L2 norm and a deterministic phase: the largest entry is made
// real and positive.
VecC normalize_vector(const VecC& v, double cell_area) {
  Eigen::Index imax = 0;
  v.cwiseAbs().maxCoeff(&imax);
  const Complex phase = std::abs(v[imax]) > 0.0 ? std::conj(v[imax]) / std::abs(v[imax])
                                                : Complex(1.0, 0.0);
  VecC out = v * phase;
  out /= std::sqrt(cell_area) * out.norm();
  return out;
}

struct RitzResult {
  std::vector<Complex> values;
  std::vector<VecC> vectors;
  std::vector<double> residuals;
};

// (P A P - s)^{-1} on the constrained subspace through the saddle system
// [[A - s, C^T], [C, 0]].
class ShiftInvert {
 public:
  ShiftInvert(const LinearOperator& a, double shift) : n_(a.size()) {
    SparseMatrix block = a.matrix;
    for (int i = 0; i < n_; ++i) block.coeffRef(i, i) -= shift;
    lu_ = std::make_unique<SparseLu>(saddle_matrix(block, a.projector->kept()));
  }

  VecD apply(const VecD& x) const {
    VecD rhs = VecD::Zero(lu_->rows());
    rhs.head(n_) = x;
    return lu_->solve(rhs).head(n_);
  }

 private:
  int n_;
  std::unique_ptr<SparseLu> lu_;
};

MatD project_block(const ConstraintProjector& p, const MatD& x) {
  MatD out(x.rows(), x.cols());
  for (Eigen::Index c = 0; c < x.cols(); ++c) out.col(c) = p.project(VecD(x.col(c)));
  return out;
}

// Orthonormal basis of the part of w orthogonal to v (v orthonormal). The
// directions are projected again after the cancellation, which would
// otherwise amplify rounding-level constraint violations.
MatD orthogonal_complement(const ConstraintProjector& p, const MatD& v, MatD w) {
  for (int pass = 0; pass < 2; ++pass) w -= v * (v.transpose() * w);
  for (Eigen::Index c = 0; c < w.cols(); ++c) {
    const double nc = w.col(c).norm();
    if (nc > 0.0) w.col(c) = p.project(VecD(w.col(c) / nc));
  }
  for (int pass = 0; pass < 2; ++pass) w -= v * (v.transpose() * w);
  Eigen::ColPivHouseholderQR<MatD> qr(w);
  const auto& r = qr.matrixR();
  const Eigen::Index k = std::min(r.rows(), r.cols());
  Eigen::Index rank = 0;
  for (Eigen::Index i = 0; i < k; ++i) {
    if (std::abs(r(i, i)) > 1e-8) ++rank;
  }
  MatD q = qr.householderQ() * MatD::Identity(w.rows(), rank);
  q -= v * (v.transpose() * q);
  Eigen::HouseholderQR<MatD> again(q);
  return again.householderQ() * MatD::Identity(w.rows(), rank);
}

// Block Davidson expansion with exact shift-invert corrections and thick
// restart, on a real basis V of ker C. The operator is real, so complex Ritz
// vectors enter the basis through their real and imaginary parts and only
// one member of each conjugate pair is expanded. PAV is kept alongside V,
// which makes Ritz residuals free of extra projections.
RitzResult shift_invert(const LinearOperator& a, int how_many, const SpectrumOptions& opts,
                        int& iterations, std::string& log) {
  const int n = a.size();
  const ConstraintProjector& proj = *a.projector;
  const int dim = n - proj.rank();
  const double shift = opts.target.value_or(a.shift + 1.0);
  const int guard = opts.guard_vectors > 0 ? opts.guard_vectors : std::max(8, how_many / 2);
  const int b = std::min(how_many + guard, dim);
  const int max_dim = std::min(dim, std::max(5 * b, b + 80));
  const ShiftInvert op(a, shift);
  // Projection rounding puts a floor under attainable residuals that grows
  // with the operator norm.
  double anorm = 0.0;
  {
    const Eigen::SparseMatrix<double, Eigen::RowMajor> rows = a.matrix;
    for (int r = 0; r < rows.outerSize(); ++r) {
      double sum = 0.0;
      for (decltype(rows)::InnerIterator it(rows, r); it; ++it) sum += std::abs(it.value());
      anorm = std::max(anorm, sum);
    }
  }
  const double tol = std::max(opts.tolerance, 1e-11 * anorm);

  std::mt19937_64 rng(opts.seed);
  std::normal_distribution<double> normal;
  MatD start(n, b);
  for (Eigen::Index i = 0; i < start.size(); ++i) start.data()[i] = normal(rng);
  MatD v = orthogonal_complement(proj, MatD(n, 0), start);
  MatD pav = project_block(proj, a.matrix * v);

  std::ostringstream trace;
  RitzResult out;
  for (int it = 1; it <= opts.max_iterations; ++it) {
    iterations = it;
    const MatD h = v.transpose() * pav;
    Eigen::EigenSolver<MatD> es(h);
    if (es.info() != Eigen::Success) fail(ErrorKind::numerical, "Ritz eigensolve failed");
    const VecC theta = es.eigenvalues();
    const MatC yc = es.eigenvectors();
    std::vector<int> order(static_cast<std::size_t>(theta.size()));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int p, int q) {
      const double dp = std::abs(theta[p] - shift);
      const double dq = std::abs(theta[q] - shift);
      if (dp != dq) return dp < dq;
      return theta[p].imag() < theta[q].imag();
    });
    const int keep = std::min<int>(b, static_cast<int>(theta.size()));
    MatD yr(v.cols(), keep);
    MatD yi(v.cols(), keep);
    for (int j = 0; j < keep; ++j) {
      yr.col(j) = yc.col(order[j]).real();
      yi.col(j) = yc.col(order[j]).imag();
    }
    const MatD ur = v * yr;
    const MatD ui = v * yi;
    const MatD pur = pav * yr;
    const MatD pui = pav * yi;
    std::vector<double> res(static_cast<std::size_t>(keep));
    std::vector<VecC> u(static_cast<std::size_t>(keep));
    std::vector<int> open;
    double worst = 0.0;
    for (int j = 0; j < keep; ++j) {
      const Complex th = theta[order[j]];
      u[j].resize(n);
      u[j].real() = ur.col(j);
      u[j].imag() = ui.col(j);
      // (P A - theta) u split into real and imaginary parts.
      const VecD rr = pur.col(j) - th.real() * ur.col(j) + th.imag() * ui.col(j);
      const VecD ri = pui.col(j) - th.real() * ui.col(j) - th.imag() * ur.col(j);
      res[j] = std::sqrt(rr.squaredNorm() + ri.squaredNorm()) / u[j].norm();
      const double scaled = res[j] / std::max(1.0, std::abs(th));
      if (j < how_many) worst = std::max(worst, scaled);
      if (scaled <= tol) continue;
      bool partner = false;
      for (int o : open) {
        if (th.imag() != 0.0 && std::abs(theta[order[o]] - std::conj(th)) <= 1e-12 * std::abs(th)) {
          partner = true;
        }
      }
      if (!partner) open.push_back(j);
    }
    trace << "iter " << it << " dim " << v.cols() << " open " << open.size()
          << " worst_scaled_residual " << worst << '\n';
    const bool done = worst <= tol;
    if (done || it == opts.max_iterations) {
      for (int j = 0; j < how_many && j < keep; ++j) {
        out.values.push_back(theta[order[j]]);
        out.vectors.push_back(u[j]);
        out.residuals.push_back(res[j]);
      }
      log = trace.str();
      if (!done) {
        throw Error(ErrorKind::numerical, "shift-invert eigensolver did not converge")
            .with_detail(log);
      }
      return out;
    }

    // Real directions spanned by the kept Ritz vectors, one per real value
    // and two per conjugate pair.
    auto real_parts = [&](const std::vector<int>& which) {
      MatD dirs(n, 2 * static_cast<Eigen::Index>(which.size()));
      Eigen::Index c = 0;
      for (int j : which) {
        dirs.col(c++) = u[j].real();
        if (theta[order[j]].imag() != 0.0) dirs.col(c++) = u[j].imag();
      }
      return MatD(dirs.leftCols(c));
    };

    if (v.cols() + std::min<Eigen::Index>(b, 2 * static_cast<Eigen::Index>(open.size())) > max_dim) {
      std::vector<int> all(static_cast<std::size_t>(keep));
      std::iota(all.begin(), all.end(), 0);
      // Coefficients of the kept directions in the current basis.
      const MatD coeff = v.transpose() * real_parts(all);
      Eigen::HouseholderQR<MatD> qr(coeff);
      const Eigen::Index k = std::min(coeff.rows(), coeff.cols());
      const MatD q = qr.householderQ() * MatD::Identity(coeff.rows(), k);
      v = v * q;
      pav = pav * q;
    }
    MatD w = real_parts(open);
    if (w.cols() > b) w = MatD(w.leftCols(b));
    for (Eigen::Index c = 0; c < w.cols(); ++c) w.col(c) = op.apply(VecD(w.col(c)));
    const MatD added = orthogonal_complement(proj, v, w);
    if (added.cols() == 0) {
      log = trace.str();
      throw Error(ErrorKind::numerical, "eigensolver subspace stagnated").with_detail(log);
    }
    const Eigen::Index old = v.cols();
    v.conservativeResize(n, old + added.cols());
    v.rightCols(added.cols()) = added;
    pav.conservativeResize(n, old + added.cols());
    pav.rightCols(added.cols()) = project_block(proj, a.matrix * added);
  }
  log = trace.str();
  return out;
}

RitzResult dense_eigen(const LinearOperator& a, int how_many) {
  const int n = a.size();
  const SparseMatrix& c = a.projector->kept();
  const int r = static_cast<int>(c.rows());
  MatD z;
  if (r == 0) {
    z = MatD::Identity(n, n);
  } else {
    const MatD ct = MatD(c.transpose());
    Eigen::HouseholderQR<MatD> qr(ct);
    const MatD q = qr.householderQ();
    z = q.rightCols(n - r);
  }
  const MatD az = a.matrix * z;
  const MatD bmat = z.transpose() * az;
  Eigen::EigenSolver<MatD> es(bmat);
  if (es.info() != Eigen::Success) fail(ErrorKind::numerical, "dense eigensolve failed");
  const int m = static_cast<int>(bmat.rows());
  std::vector<int> order(static_cast<std::size_t>(m));
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int p, int q) {
    const Complex lp = es.eigenvalues()[p];
    const Complex lq = es.eigenvalues()[q];
    if (lp.real() != lq.real()) return lp.real() > lq.real();
    return lp.imag() < lq.imag();
  });
  RitzResult out;
  const MatC vecs = es.eigenvectors();
  for (int j = 0; j < std::min(how_many, m); ++j) {
    const int k = order[j];
    const VecC v = z.cast<Complex>() * vecs.col(k);
    out.values.push_back(es.eigenvalues()[k]);
    out.vectors.push_back(v);
    out.residuals.push_back((a.apply(v) - es.eigenvalues()[k] * v).norm() / v.norm());
  }
  return out;
}

bool before(Complex a, Complex b, double tol) {
  if (std::abs(a.real() - b.real()) > tol) return a.real() > b.real();
  return a.imag() < b.imag();
}

}  // namespace

double eigen_residual(const LinearOperator& a, Complex lambda, const VecC& v) {
  return (a.apply(v) - lambda * v).norm() / v.norm();
}

void organize_spectrum(SpectrumReport& report) {
  auto& pairs = report.pairs;
  double scale = 0.0;
  for (const auto& p : pairs) scale = std::max(scale, std::abs(p.lambda));
  const double tol = scale > 0.0 ? 1e-6 * scale : 1e-12;
  report.cluster_tolerance = tol;

  std::vector<int> idx(pairs.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(),
                   [&](int p, int q) { return before(pairs[p].lambda, pairs[q].lambda, 0.0); });
  std::vector<std::vector<int>> groups;
  std::vector<Complex> reps;
  for (int i : idx) {
    bool placed = false;
    for (std::size_t g = 0; g < groups.size(); ++g) {
      if (std::abs(pairs[i].lambda - reps[g]) <= tol) {
        groups[g].push_back(i);
        placed = true;
        break;
      }
    }
    if (!placed) {
      groups.push_back({i});
      reps.push_back(pairs[i].lambda);
    }
  }
  std::vector<Complex> means(groups.size());
  for (std::size_t g = 0; g < groups.size(); ++g) {
    Complex s = 0.0;
    for (int i : groups[g]) s += pairs[i].lambda;
    means[g] = s / static_cast<double>(groups[g].size());
  }
  std::vector<int> gorder(groups.size());
  std::iota(gorder.begin(), gorder.end(), 0);
  std::stable_sort(gorder.begin(), gorder.end(),
                   [&](int p, int q) { return before(means[p], means[q], tol); });

  std::vector<EigenPair> sorted;
  report.clusters.clear();
  const double area = report.layout ? report.layout->cell_area() : 1.0;
  for (int g : gorder) {
    auto members = groups[g];
    std::stable_sort(members.begin(), members.end(), [&](int p, int q) {
      if (pairs[p].lambda.imag() != pairs[q].lambda.imag()) {
        return pairs[p].lambda.imag() < pairs[q].lambda.imag();
      }
      return pairs[p].lambda.real() > pairs[q].lambda.real();
    });
    EigenCluster cl;
    cl.lambda = means[g];
    Eigen::MatrixXcd vs(pairs[members[0]].vector.size(), static_cast<Eigen::Index>(members.size()));
    for (std::size_t k = 0; k < members.size(); ++k) {
      pairs[members[k]].cluster = static_cast<int>(report.clusters.size());
      cl.members.push_back(static_cast<int>(sorted.size()));
      vs.col(static_cast<Eigen::Index>(k)) = pairs[members[k]].vector;
      sorted.push_back(pairs[members[k]]);
    }
    Eigen::JacobiSVD<Eigen::MatrixXcd> svd(vs, Eigen::ComputeThinU);
    const auto& sv = svd.singularValues();
    int rank = 0;
    for (Eigen::Index k = 0; k < sv.size(); ++k) {
      if (sv[k] > 1e-8 * sv[0]) ++rank;
    }
    cl.multiplicity = rank;
    cl.basis = svd.matrixU().leftCols(rank) / std::sqrt(area);
    cl.unstable = cl.lambda.real() >= -tol;
    report.clusters.push_back(std::move(cl));
  }
  pairs = std::move(sorted);

  report.n_unstable = 0;
  report.unstable_clusters.clear();
  report.multiplicities.clear();
  report.k_max = 0;
  for (std::size_t c = 0; c < report.clusters.size(); ++c) {
    const auto& cl = report.clusters[c];
    if (!cl.unstable) continue;
    report.unstable_clusters.push_back(static_cast<int>(c));
    report.multiplicities.push_back(cl.multiplicity);
    report.n_unstable += static_cast<int>(cl.members.size());
    report.k_max = std::max(report.k_max, cl.multiplicity);
  }
  report.m_distinct = static_cast<int>(report.unstable_clusters.size());
  const bool has_stable_after =
      !report.clusters.empty() && !report.clusters.back().unstable &&
      (report.unstable_clusters.empty() ||
       report.unstable_clusters.back() + 1 < static_cast<int>(report.clusters.size()));
  report.complete = has_stable_after;
}

SpectrumReport compute_spectrum(const LinearOperator& a, int how_many, EigenStrategy strategy,
                                const SpectrumOptions& opts) {
  if (!a.projector || !a.layout) {
    fail(ErrorKind::shape, "spectrum requires an assembled state operator");
  }
  const int dim = a.size() - a.projector->rank();
  if (how_many < 1 || how_many > dim) {
    fail(ErrorKind::precondition, "how_many must lie in [1, dimension of the solenoidal space]");
  }
  SpectrumReport report;
  report.layout = a.layout;
  report.operator_label = a.label;
  RitzResult ritz;
  if (strategy == EigenStrategy::dense) {
    ritz = dense_eigen(a, how_many);
  } else {
    ritz = shift_invert(a, how_many, opts, report.iterations, report.log);
  }
  const double area = a.layout->cell_area();
  for (std::size_t j = 0; j < ritz.values.size(); ++j) {
    EigenPair p;
    p.lambda = ritz.values[j];
    p.vector = normalize_vector(ritz.vectors[j], area);
    p.residual = eigen_residual(a, p.lambda, p.vector);
    report.pairs.push_back(std::move(p));
  }
  organize_spectrum(report);
  return report;
}

SpectrumReport adjoint_spectrum(const LinearOperator& a_adj, int how_many,
                                EigenStrategy strategy, const SpectrumOptions& opts) {
  return compute_spectrum(a_adj, how_many, strategy, opts);
}

void write_spectrum_table(std::ostream& os, const SpectrumReport& report) {
  os << "# index re_lambda im_lambda residual cluster multiplicity unstable\n";
  os << std::setprecision(12);
  for (std::size_t i = 0; i < report.pairs.size(); ++i) {
    const auto& p = report.pairs[i];
    const auto& cl = report.clusters[p.cluster];
    os << i << ' ' << p.lambda.real() << ' ' << p.lambda.imag() << ' ' << p.residual << ' '
       << p.cluster << ' ' << cl.multiplicity << ' ' << (cl.unstable ? 1 : 0) << '\n';
  }
}

}  // namespace mhdlab
