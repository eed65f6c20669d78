#pragma once

#include "shellflow/geometry.hpp"
#include "shellflow/grid.hpp"

namespace shellflow {

enum class MollifierTarget { Surface, Volume };

// Surface: K = (1 - eps Lap0)^(-p/2), eps has units of length^2.
// Volume: convolution with a compact bump of radius eps (a length).
struct MollifierSpec {
  double eps = 0.0;
  double p = 2.0;
  MollifierTarget target = MollifierTarget::Surface;
};

double surface_mollifier_symbol(const MollifierSpec& spec, double k1, double k2);

// Flat chart: exact Fourier multiplier. Curved chart: p/2 repeated conjugate
// gradient solves of (1 - eps Lap_g0) u = f; p must be an even integer there.
Field surface_mollify(const ReferenceSurface& s, const Field& f, const MollifierSpec& spec);
Field surface_mollify(const Grid2& g, const Field& f, const MollifierSpec& spec);

// Normalized discrete bump weights for offsets -r..r in units of the spacing.
std::vector<double> bump_weights(double radius, double spacing);

// Separable convolution of a nodal slab field, with even reflection across
// the bottom and top layers. Preserves constants exactly.
Field volume_mollify(const Grid3& g, const Field& f, const MollifierSpec& spec);

// kappa Lap0(Lap0 v) using D's Laplacian; with the compact stencil this is
// exactly the square of a symmetric matrix.
Field boundary_biharmonic(const Diff& D, const Field& v, double kappa);

}  // namespace shellflow
