#pragma once

#include <complex>
#include <iosfwd>
#include <string>

#include <Eigen/Dense>

#include "mhdlab/error.hpp"
#include "mhdlab/grid.hpp"

namespace mhdlab {

using Complex = std::complex<double>;
template <class T>
using Vec = Eigen::Matrix<T, Eigen::Dynamic, 1>;
using VecD = Vec<double>;
using VecC = Vec<Complex>;

/// Boundary condition family carried by a vector field.
enum class BcTag { velocity_dirichlet, magnetic_tangential };

BcTag parse_bc_tag(const std::string& name);
const char* to_string(BcTag tag);

template <class T>
struct BasicScalarField {
  Grid grid;
  Vec<T> values;

  explicit BasicScalarField(Grid g) : grid(std::move(g)), values(Vec<T>::Zero(grid.size())) {}
  BasicScalarField(Grid g, Vec<T> v) : grid(std::move(g)), values(std::move(v)) {
    if (values.size() != grid.size()) fail(ErrorKind::shape, "scalar field size mismatch");
  }
};

template <class T>
struct BasicVectorField2 {
  Grid grid;
  Vec<T> u1;
  Vec<T> u2;
  BcTag tag = BcTag::velocity_dirichlet;

  explicit BasicVectorField2(Grid g, BcTag t = BcTag::velocity_dirichlet)
      : grid(std::move(g)),
        u1(Vec<T>::Zero(grid.size())),
        u2(Vec<T>::Zero(grid.size())),
        tag(t) {}
  BasicVectorField2(Grid g, Vec<T> a, Vec<T> b, BcTag t = BcTag::velocity_dirichlet)
      : grid(std::move(g)), u1(std::move(a)), u2(std::move(b)), tag(t) {
    if (u1.size() != grid.size() || u2.size() != grid.size()) {
      fail(ErrorKind::shape, "vector field size mismatch");
    }
  }

  /// Components stacked as [u1; u2].
  Vec<T> stacked() const {
    Vec<T> s(2 * u1.size());
    s << u1, u2;
    return s;
  }
  static BasicVectorField2 from_stacked(Grid g, const Vec<T>& s, BcTag t) {
    const Eigen::Index n = g.size();
    if (s.size() != 2 * n) fail(ErrorKind::shape, "stacked vector size mismatch");
    return BasicVectorField2(std::move(g), s.head(n), s.tail(n), t);
  }
};

/// Velocity-type and magnetic-type pair on a common grid.
template <class T>
struct BasicStateVector {
  BasicVectorField2<T> phi;
  BasicVectorField2<T> xi;

  explicit BasicStateVector(const Grid& g)
      : phi(g, BcTag::velocity_dirichlet), xi(g, BcTag::magnetic_tangential) {}
  BasicStateVector(BasicVectorField2<T> p, BasicVectorField2<T> x)
      : phi(std::move(p)), xi(std::move(x)) {
    if (!(phi.grid == xi.grid)) fail(ErrorKind::shape, "state components on different grids");
  }
};

using ScalarField = BasicScalarField<double>;
using VectorField2 = BasicVectorField2<double>;
using StateVector = BasicStateVector<double>;
using ComplexScalarField = BasicScalarField<Complex>;
using ComplexVectorField2 = BasicVectorField2<Complex>;
using ComplexStateVector = BasicStateVector<Complex>;

inline void require_same_grid(const Grid& a, const Grid& b) {
  if (!(a == b)) fail(ErrorKind::shape, "fields live on different grids");
}

template <class T>
BasicVectorField2<T> gradient(const BasicScalarField<T>& s) {
  const DiffOps& d = s.grid.ops();
  return BasicVectorField2<T>(s.grid, d.dx * s.values, d.dy * s.values);
}

template <class T>
BasicScalarField<T> divergence(const BasicVectorField2<T>& v) {
  const DiffOps& d = v.grid.ops();
  return BasicScalarField<T>(v.grid, d.dx * v.u1 + d.dy * v.u2);
}

template <class T>
BasicScalarField<T> curl2d(const BasicVectorField2<T>& v) {
  const DiffOps& d = v.grid.ops();
  return BasicScalarField<T>(v.grid, d.dx * v.u2 - d.dy * v.u1);
}

template <class T>
BasicScalarField<T> laplacian(const BasicScalarField<T>& s) {
  return BasicScalarField<T>(s.grid, s.grid.ops().lap * s.values);
}

template <class T>
BasicVectorField2<T> laplacian(const BasicVectorField2<T>& v) {
  const SparseMatrix& l = v.grid.ops().lap;
  return BasicVectorField2<T>(v.grid, l * v.u1, l * v.u2, v.tag);
}

/// Pointwise product with a real scalar field.
template <class T>
BasicVectorField2<T> multiply(const ScalarField& s, const BasicVectorField2<T>& v) {
  require_same_grid(s.grid, v.grid);
  return BasicVectorField2<T>(v.grid, s.values.cwiseProduct(v.u1), s.values.cwiseProduct(v.u2),
                              v.tag);
}

template <class T>
BasicScalarField<T> multiply(const ScalarField& s, const BasicScalarField<T>& f) {
  require_same_grid(s.grid, f.grid);
  return BasicScalarField<T>(f.grid, s.values.cwiseProduct(f.values));
}

/// Node-set description used by quadrature and region tests.
using NodeSet = std::vector<int>;

/// Sum over region nodes of weight * |f|^2 * quadrature weight.
/// `empty_region` (if given) is set when the region has no nodes.
template <class T>
double weighted_norm2(const BasicScalarField<T>& f, const ScalarField& weight,
                      const NodeSet& region, bool* empty_region = nullptr) {
  require_same_grid(f.grid, weight.grid);
  if (empty_region) *empty_region = region.empty();
  double sum = 0.0;
  for (int idx : region) {
    if (!(weight.values[idx] > 0.0)) fail(ErrorKind::precondition, "weight must be positive");
    sum += weight.values[idx] * std::norm(f.values[idx]) * f.grid.quad_weight(idx);
  }
  return sum;
}

template <class T>
double weighted_norm2(const BasicVectorField2<T>& v, const ScalarField& weight,
                      const NodeSet& region, bool* empty_region = nullptr) {
  require_same_grid(v.grid, weight.grid);
  if (empty_region) *empty_region = region.empty();
  double sum = 0.0;
  for (int idx : region) {
    if (!(weight.values[idx] > 0.0)) fail(ErrorKind::precondition, "weight must be positive");
    sum += weight.values[idx] * (std::norm(v.u1[idx]) + std::norm(v.u2[idx])) *
           v.grid.quad_weight(idx);
  }
  return sum;
}

NodeSet all_nodes(const Grid& grid);

/// Samples a function of (x, y) at every node.
template <class F>
ScalarField sample(const Grid& grid, F&& f) {
  ScalarField s(grid);
  for (int idx = 0; idx < grid.size(); ++idx) {
    s.values[idx] = f(grid.x(grid.ix(idx)), grid.y(grid.jy(idx)));
  }
  return s;
}

/// Columnar snapshot: index x y then the field components (real part, and
/// imaginary part for complex data), whitespace separated, one node per line.
void write_snapshot(std::ostream& os, const VectorField2& v);
void write_snapshot(std::ostream& os, const ScalarField& s);
void write_snapshot(std::ostream& os, const ComplexStateVector& s);

}  // namespace mhdlab
