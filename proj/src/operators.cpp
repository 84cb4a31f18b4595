#include "mhdlab/operators.hpp"

#include <ostream>

namespace mhdlab {

StateLayout::StateLayout(const Grid& grid)
    : grid_(grid),
      m_(static_cast<int>(grid.interior_nodes().size())),
      velocity_(boundary_map(grid, BcTag::velocity_dirichlet)),
      magnetic_(boundary_map(grid, BcTag::magnetic_tangential)) {}

ComplexStateVector StateLayout::to_state(const VecC& x) const {
  if (x.size() != size()) fail(ErrorKind::shape, "state vector size mismatch");
  const VecC phi = velocity_.extend * x.head(2 * m_);
  const VecC xi = magnetic_.extend * x.tail(2 * m_);
  return ComplexStateVector(
      ComplexVectorField2::from_stacked(grid_, phi, BcTag::velocity_dirichlet),
      ComplexVectorField2::from_stacked(grid_, xi, BcTag::magnetic_tangential));
}

StateVector StateLayout::to_state(const VecD& x) const {
  if (x.size() != size()) fail(ErrorKind::shape, "state vector size mismatch");
  const VecD phi = velocity_.extend * x.head(2 * m_);
  const VecD xi = magnetic_.extend * x.tail(2 * m_);
  return StateVector(VectorField2::from_stacked(grid_, phi, BcTag::velocity_dirichlet),
                     VectorField2::from_stacked(grid_, xi, BcTag::magnetic_tangential));
}

VecC StateLayout::from_state(const ComplexStateVector& s) const {
  require_same_grid(grid_, s.phi.grid);
  VecC x(size());
  x.head(2 * m_) = velocity_.restriction * s.phi.stacked();
  x.tail(2 * m_) = magnetic_.restriction * s.xi.stacked();
  return x;
}

VecD StateLayout::from_state(const StateVector& s) const {
  require_same_grid(grid_, s.phi.grid);
  VecD x(size());
  x.head(2 * m_) = velocity_.restriction * s.phi.stacked();
  x.tail(2 * m_) = magnetic_.restriction * s.xi.stacked();
  return x;
}

std::vector<int> StateLayout::unknowns_in(const NodeSet& nodes) const {
  std::vector<int> out;
  out.reserve(4 * nodes.size());
  for (int c = 0; c < 4; ++c) {
    for (int idx : nodes) {
      const int pos = grid_.interior_position(idx);
      if (pos >= 0) out.push_back(c * m_ + pos);
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

VecD LinearOperator::apply(const VecD& x) const {
  if (x.size() != matrix.cols()) fail(ErrorKind::shape, label + ": input size mismatch");
  VecD y = matrix * x;
  if (projector) y = projector->project(y);
  return y;
}

VecC LinearOperator::apply(const VecC& x) const {
  if (x.size() != matrix.cols()) fail(ErrorKind::shape, label + ": input size mismatch");
  VecC y = matrix * x;
  if (projector) y = projector->project(y);
  return y;
}

void write_coo(std::ostream& os, const LinearOperator& op) {
  os << "# " << op.label << ' ' << op.matrix.rows() << ' ' << op.matrix.cols() << ' '
     << op.matrix.nonZeros() << '\n';
  os.precision(17);
  for (int k = 0; k < op.matrix.outerSize(); ++k) {
    for (SparseMatrix::InnerIterator it(op.matrix, k); it; ++it) {
      os << it.row() << ' ' << it.col() << ' ' << it.value() << '\n';
    }
  }
}

namespace {

using Triplets = std::vector<Eigen::Triplet<double>>;

// Adds diag(w) * m to block (br, bc) of a 2x2 block matrix with block size n.
void add_scaled_rows(Triplets& t, const SparseMatrix& m, const VecD& w, int br, int bc, int n) {
  for (int k = 0; k < m.outerSize(); ++k) {
    for (SparseMatrix::InnerIterator it(m, k); it; ++it) {
      const double v = w[it.row()] * it.value();
      if (v != 0.0) t.emplace_back(br * n + it.row(), bc * n + it.col(), v);
    }
  }
}

void add_diag(Triplets& t, const VecD& w, int br, int bc, int n) {
  for (int i = 0; i < n; ++i) {
    if (w[i] != 0.0) t.emplace_back(br * n + i, bc * n + i, w[i]);
  }
}

LinearOperator oseen(const VectorField2& e, double zero_order_sign, const std::string& label) {
  const Grid& g = e.grid;
  const int n = g.size();
  const DiffOps& d = g.ops();
  Triplets t;
  for (int b = 0; b < 2; ++b) {
    add_scaled_rows(t, d.dx, e.u1, b, b, n);
    add_scaled_rows(t, d.dy, e.u2, b, b, n);
  }
  const VecD e1x = zero_order_sign * (d.dx * e.u1);
  const VecD e1y = zero_order_sign * (d.dy * e.u1);
  const VecD e2x = zero_order_sign * (d.dx * e.u2);
  const VecD e2y = zero_order_sign * (d.dy * e.u2);
  add_diag(t, e1x, 0, 0, n);
  add_diag(t, e1y, 0, 1, n);
  add_diag(t, e2x, 1, 0, n);
  add_diag(t, e2y, 1, 1, n);
  LinearOperator op;
  op.label = label;
  op.matrix.resize(2 * n, 2 * n);
  op.matrix.setFromTriplets(t.begin(), t.end());
  op.matrix.makeCompressed();
  op.dom = op.codom = {FieldShape::Kind::vector_nodes, 2 * n};
  return op;
}

SparseMatrix block_diag2(const SparseMatrix& a) {
  const int n = static_cast<int>(a.rows());
  Triplets t;
  for (int b = 0; b < 2; ++b) {
    for (int k = 0; k < a.outerSize(); ++k) {
      for (SparseMatrix::InnerIterator it(a, k); it; ++it) {
        t.emplace_back(b * n + it.row(), b * n + it.col(), it.value());
      }
    }
  }
  SparseMatrix m(2 * n, 2 * n);
  m.setFromTriplets(t.begin(), t.end());
  return m;
}

LinearOperator on_unknowns(const std::string& label, const SparseMatrix& nodes_op,
                           const BoundaryMap& out_map, const BoundaryMap& in_map) {
  LinearOperator op;
  op.label = label;
  op.matrix = out_map.restriction * nodes_op * in_map.extend;
  op.matrix.prune(0.0);
  op.dom = {FieldShape::Kind::vector_unknowns, static_cast<int>(op.matrix.cols())};
  op.codom = {FieldShape::Kind::vector_unknowns, static_cast<int>(op.matrix.rows())};
  return op;
}

void append_block(Triplets& t, const SparseMatrix& m, int r0, int c0, double scale) {
  for (int k = 0; k < m.outerSize(); ++k) {
    for (SparseMatrix::InnerIterator it(m, k); it; ++it) {
      t.emplace_back(r0 + it.row(), c0 + it.col(), scale * it.value());
    }
  }
}

}  // namespace

LinearOperator oseen_plus(const VectorField2& e) { return oseen(e, 1.0, "oseen_plus"); }
LinearOperator oseen_minus(const VectorField2& e) { return oseen(e, -1.0, "oseen_minus"); }

LinearOperator vector_laplacian(const Grid& grid) {
  LinearOperator op;
  op.label = "vector_laplacian";
  op.matrix = block_diag2(grid.ops().lap);
  op.dom = op.codom = {FieldShape::Kind::vector_nodes, 2 * grid.size()};
  return op;
}

GeneratorBlocks assemble_blocks(const Equilibrium& eq) {
  const Grid& g = eq.velocity.grid;
  const StateLayout layout(g);
  const BoundaryMap& vm = layout.velocity_map();
  const BoundaryMap& mm = layout.magnetic_map();
  const SparseMatrix lap = block_diag2(g.ops().lap);
  GeneratorBlocks b{
      on_unknowns("A1", -lap, vm, vm),
      on_unknowns("A2", -lap, mm, mm),
      on_unknowns("L1", oseen_plus(eq.velocity).matrix, vm, vm),
      on_unknowns("L2", oseen_plus(eq.magnetic).matrix, vm, mm),
      on_unknowns("M1", oseen_minus(eq.velocity).matrix, mm, mm),
      on_unknowns("M2", oseen_minus(eq.magnetic).matrix, mm, vm),
  };
  return b;
}

SparseMatrix state_constraints(const StateLayout& layout, const GeneratorOptions& opts) {
  const Grid& g = layout.grid();
  const int m = layout.block();
  const SparseMatrix dv = divergence_constraint(g, BcTag::velocity_dirichlet);
  const SparseMatrix dm = divergence_constraint(g, BcTag::magnetic_tangential);
  const bool means = opts.remove_mean_modes && g.fully_periodic();
  const SparseMatrix mean = mean_constraint(g);
  Triplets t;
  int row = 0;
  append_block(t, dv, row, 0, 1.0);
  row += static_cast<int>(dv.rows());
  if (means) {
    append_block(t, mean, row, 0, 1.0);
    row += 2;
  }
  if (opts.project_magnetic_row) {
    append_block(t, dm, row, 2 * m, 1.0);
    row += static_cast<int>(dm.rows());
    if (means) {
      append_block(t, mean, row, 2 * m, 1.0);
      row += 2;
    }
  }
  SparseMatrix c(row, layout.size());
  c.setFromTriplets(t.begin(), t.end());
  c.makeCompressed();
  return c;
}

LinearOperator assemble_generator(const Equilibrium& eq, const GeneratorOptions& opts) {
  const Grid& g = eq.velocity.grid;
  require_same_grid(g, eq.magnetic.grid);
  auto layout = std::make_shared<const StateLayout>(g);
  const GeneratorBlocks b = assemble_blocks(eq);
  const int m2 = 2 * layout->block();
  Triplets t;
  append_block(t, b.a1.matrix, 0, 0, -eq.nu);
  append_block(t, b.l1.matrix, 0, 0, -1.0);
  append_block(t, b.l2.matrix, 0, m2, 1.0);
  append_block(t, b.m2.matrix, m2, 0, 1.0);
  append_block(t, b.a2.matrix, m2, m2, -eq.eta);
  append_block(t, b.m1.matrix, m2, m2, -1.0);
  for (int i = 0; i < 2 * m2; ++i) t.emplace_back(i, i, opts.sigma);

  LinearOperator op;
  op.label = "Atilde";
  op.matrix.resize(2 * m2, 2 * m2);
  op.matrix.setFromTriplets(t.begin(), t.end());
  op.matrix.prune(0.0);
  op.matrix.makeCompressed();
  for (int k = 0; k < op.matrix.outerSize(); ++k) {
    for (SparseMatrix::InnerIterator it(op.matrix, k); it; ++it) {
      if (!std::isfinite(it.value())) fail(ErrorKind::numerical, "non-finite generator entry");
    }
  }
  op.dom = op.codom = {FieldShape::Kind::state_unknowns, 2 * m2};
  op.projector = std::make_shared<const ConstraintProjector>(state_constraints(*layout, opts));
  op.layout = std::move(layout);
  op.shift = opts.sigma;
  return op;
}

LinearOperator adjoint_of(const LinearOperator& generator) {
  LinearOperator op = generator;
  op.label = generator.label == "Atilde" ? "Atilde_adj" : generator.label + "_adj";
  op.matrix = SparseMatrix(generator.matrix.transpose());
  op.matrix.makeCompressed();
  return op;
}

LinearOperator assemble_adjoint(const Equilibrium& eq, const GeneratorOptions& opts) {
  return adjoint_of(assemble_generator(eq, opts));
}

}  // namespace mhdlab
