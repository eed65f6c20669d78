#pragma once

#include <array>
#include <vector>

#include "shellflow/grid.hpp"

namespace shellflow {

// Trigonometric interpolation reproduces band-limited data exactly; the
// Nyquist mode is taken as a cosine so the interpolant is real. Cubic
// interpolation is the tensor product of periodic 4-point Lagrange stencils.
enum class InterpMethod { Trigonometric, Cubic };
const char* interp_name(InterpMethod m);
InterpMethod parse_interp(const std::string& s);

struct ValueGrad {
  double value = 0.0;
  std::array<double, 2> grad{0.0, 0.0};
};

// Pointwise evaluation of one periodic field at arbitrary chart points.
class Interpolant {
 public:
  Interpolant(const Grid2& g, const Field& f, InterpMethod m);
  double value(double y1, double y2) const { return eval(y1, y2, false).value; }
  ValueGrad eval(double y1, double y2, bool with_grad = true) const;
  const Grid2& grid() const { return g_; }

 private:
  Grid2 g_;
  InterpMethod m_;
  Field f_;
  std::vector<cplx> c_;  // normalized spectrum for the trigonometric method
};

// Several fields on one grid evaluated together at the same point, sharing
// the basis evaluation.
class InterpolantSet {
 public:
  InterpolantSet(const Grid2& g, const std::vector<Field>& fs, InterpMethod m);
  int count() const { return static_cast<int>(parts_.size()); }
  // out[i] receives the value and gradient of field i.
  void eval(double y1, double y2, std::vector<ValueGrad>& out, bool with_grad = true) const;

 private:
  Grid2 g_;
  InterpMethod m_;
  std::vector<Field> parts_;
  std::vector<std::vector<cplx>> c_;
};

// Batched evaluation of many fields at one fixed set of points; the basis
// weights are computed once.
class Resampler {
 public:
  Resampler(const Grid2& g, std::vector<std::array<double, 2>> points, InterpMethod m);
  Field operator()(const Field& f) const;
  // Transpose of operator() in the plain nodal inner product; cubic only.
  Field adjoint(const Field& values) const;
  int size() const { return static_cast<int>(pts_.size()); }
  const Grid2& grid() const { return g_; }

 private:
  Grid2 g_;
  InterpMethod m_;
  std::vector<std::array<double, 2>> pts_;
  // Trigonometric: per-point phase tables of length n1 and n2/2+1.
  std::vector<cplx> e1_, e2_;
  // Cubic: per-point 16 node indices and weights.
  std::vector<int> idx_;
  std::vector<double> w_;
};

}  // namespace shellflow
