#pragma once

#include "mhdlab/field.hpp"

namespace mhdlab {

/// Relation between the interior unknowns of a two-component field and its
/// full node representation under a boundary condition family.
///
/// Unknowns are ordered [u1 at interior nodes; u2 at interior nodes].
/// Velocity fields vanish on walls. Magnetic fields have zero normal
/// component on walls and a tangential component extrapolated so that the
/// one-sided normal derivative vanishes, which makes the scalar curl zero on
/// the wall.
struct BoundaryMap {
  SparseMatrix extend;    ///< 2*size x 2*n_interior
  SparseMatrix restriction;  ///< 2*n_interior x 2*size
};

BoundaryMap boundary_map(const Grid& grid, BcTag tag);

/// Overwrites wall values according to the tag; interior values untouched.
template <class T>
BasicVectorField2<T> apply_bc(const BasicVectorField2<T>& v, BcTag tag) {
  if (v.grid.fully_periodic()) {
    BasicVectorField2<T> out = v;
    out.tag = tag;
    return out;
  }
  const BoundaryMap map = boundary_map(v.grid, tag);
  const Vec<T> full = map.extend * (map.restriction * v.stacked());
  return BasicVectorField2<T>::from_stacked(v.grid, full, tag);
}

/// Maximum violation of the tagged boundary condition on wall nodes:
/// |u| for velocity; max(|u.n|, |curl u|) for magnetic fields.
double boundary_violation(const VectorField2& v, BcTag tag);

}  // namespace mhdlab
