#pragma once

#include <Eigen/Dense>
#include <array>
#include <functional>
#include <vector>

#include "shellflow/grid.hpp"

namespace shellflow {

using Mat2 = Eigen::Matrix2d;
using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;

// Field of symmetric 2x2 matrices stored by component.
struct SymField {
  Field xx, xy, yy;
  SymField() = default;
  explicit SymField(int n) : xx(n, 0.0), xy(n, 0.0), yy(n, 0.0) {}
  int size() const { return static_cast<int>(xx.size()); }
  Mat2 at(int k) const {
    Mat2 m;
    m << xx[k], xy[k], xy[k], yy[k];
    return m;
  }
  void set(int k, const Mat2& m) {
    xx[k] = m(0, 0);
    xy[k] = 0.5 * (m(0, 1) + m(1, 0));
    yy[k] = m(1, 1);
  }
};

SymField derivative(const Diff& D, const SymField& s, int a);

// Periodic chart of the reference surface Gamma. The embedding is
// X(y) = (y1, y2, 0) + Xp(y) with Xp periodic; N is the unit normal and
// C_ab = X_,ab . N so that the tubular metric is g0 - 2zC + z^2 C g0^-1 C.
struct ReferenceSurface {
  Grid2 grid;
  double thickness_eps = 1.0;
  bool flat = true;
  std::array<Field, 3> Xp;
  std::array<Field, 3> N;
  SymField g0, C, P;  // P = C g0^-1 C
  std::array<SymField, 2> dg0, dC, dP;

  Vec3 position(int k) const;
  Vec3 normal(int k) const { return {N[0][k], N[1][k], N[2][k]}; }
};

ReferenceSurface flat_surface(const Grid2& g, double thickness_eps);
// Graph of a periodic function f over the chart, derivatives taken spectrally.
ReferenceSurface graph_surface(const Grid2& g, const std::function<double(double, double)>& f,
                               double thickness_eps);
// User supplied (g0, C, N); the periodic embedding part may be empty.
ReferenceSurface surface_from_fields(const Grid2& g, const SymField& g0, const SymField& C,
                                     const std::array<Field, 3>& N, double thickness_eps,
                                     Backend backend);

struct MetricField {
  Grid2 grid;
  SymField values, inverse;
  Field sqrt_det;
};

// Completes inverse and sqrt_det, raising a degeneracy error at the first
// node that is not symmetric positive definite.
MetricField make_metric(const Grid2& g, const SymField& values, const char* what);

// G_z at a uniform height z.
MetricField metric_at(const ReferenceSurface& s, double z);
// G_z evaluated at z = h(y) node by node.
MetricField metric_at_height(const ReferenceSurface& s, const Field& h);
// d/dz of G_z at z = h(y); exact because G_z is quadratic in z.
SymField metric_dz_at_height(const ReferenceSurface& s, const Field& h);
// Partial chart derivative d/dy_a of G_z at fixed z, evaluated at z = h(y).
SymField metric_dy_at_height(const ReferenceSurface& s, const Field& h, int a);

// Christoffel symbols of G = G_z + dz^2 with index 2 standing for z.
struct ChristoffelField {
  Grid2 grid;
  double z = 0.0;
  std::vector<std::array<double, 27>> gamma;  // [k*9 + i*3 + j] = Gamma^k_ij
  double at(int node, int k, int i, int j) const { return gamma[node][k * 9 + i * 3 + j]; }
};

std::vector<ChristoffelField> tubular_christoffels(const ReferenceSurface& s,
                                                   const std::vector<double>& z_samples);

// (1/sqrt g) d_a (sqrt g g^ab d_b f) using the derivative operators of D.
Field laplace_beltrami(const MetricField& m, const Field& f, const Diff& D);

}  // namespace shellflow
