#pragma once

#include <Eigen/Dense>
#include <array>
#include <vector>

#include "shellflow/geometry.hpp"
#include "shellflow/interpolation.hpp"

namespace shellflow {

// Boundary motion of the shell: eta(y) = eta_tau(y) + h(eta_tau(y)) N(eta_tau(y)).

// Chart diffeomorphism eta_tau(y) = y + disp(y) with disp periodic.
struct TangentialMap {
  Grid2 grid;
  std::array<Field, 2> disp;
  std::array<double, 2> point(int k) const;
  std::vector<std::array<double, 2>> points() const;
};

TangentialMap identity_map(const Grid2& g);

// grad0 eta_tau node by node; a mesh-tangling error names the first node
// with det <= 0.
struct MapGradient {
  std::array<Field, 4> m;  // (0,0), (0,1), (1,0), (1,1); m[a*2+b] = d_b eta_tau^a
  Field det;
  Mat2 at(int k) const;
};
MapGradient map_gradient(const TangentialMap& tau, const Diff& D);

// Preimages eta_tau^-1(Y) of the given chart points by Newton iteration.
std::vector<std::array<double, 2>> inverse_points(const TangentialMap& tau,
                                                  const std::vector<std::array<double, 2>>& Y,
                                                  InterpMethod m);

// Material positions of boundary points: (y1, y2, 0) + disp(y).
struct BoundaryMap {
  Grid2 grid;
  std::array<Field, 3> disp;
  Vec3 position(int k) const;
};

BoundaryMap identity_boundary(const ReferenceSurface& s);

// The immersion B(y, z) = X(y) + z N(y) evaluated off the grid through
// interpolants of the reference fields.
class TubularMap {
 public:
  TubularMap(const ReferenceSurface& s, InterpMethod m);
  Vec3 position(const Vec2& y, double z) const;
  // Columns d_y1 B, d_y2 B, d_z B = N.
  Eigen::Matrix3d jacobian(const Vec2& y, double z) const;
  Vec3 normal(const Vec2& y) const;

  struct Point {
    Vec2 y;
    double z = 0.0;
    int iterations = 0;
  };
  // Damped Newton seeded by the nearest reference node; at most 50
  // iterations, step tolerance 1e-12 in chart units.
  Point project(const Vec3& p) const;

 private:
  const ReferenceSurface* s_;
  InterpolantSet fields_;  // Xp then N components
  void frame(const Vec2& y, std::vector<ValueGrad>& v) const;
};

TubularMap::Point tubular_project(const ReferenceSurface& s, const Vec3& p,
                                  InterpMethod m = InterpMethod::Trigonometric);

struct Decomposition {
  Field h;
  TangentialMap tau;
};

// Projects every material boundary point, reads eta_tau from the chart
// coordinates, and resamples the heights onto the chart grid through
// eta_tau^-1.
Decomposition decompose_boundary(const ReferenceSurface& s, const BoundaryMap& bmap,
                                 InterpMethod m = InterpMethod::Trigonometric);
BoundaryMap compose_boundary(const ReferenceSurface& s, const Field& h, const TangentialMap& tau,
                             InterpMethod m = InterpMethod::Trigonometric);

// Tubular-frame components of a material boundary velocity. The tangential
// part is u_tau; the normal part gives the height rate h_t = w_z - h_a w_a.
struct TangentialVelocity {
  std::array<Field, 2> u_tau;           // on the chart grid
  std::array<Field, 2> u_tau_material;  // u_tau o eta_tau on material nodes
  Field h_t;                            // on the chart grid
};
TangentialVelocity tangential_velocity(const ReferenceSurface& s,
                                       const std::array<Field, 3>& v_gamma, const Field& h,
                                       const TangentialMap& tau,
                                       InterpMethod m = InterpMethod::Trigonometric);

// Theta = sqrt(det g) (J_h^-1 o eta_tau) = det(grad0 eta_tau) sqrt(det G_h o eta_tau).
struct ThetaFactor {
  Field via_metric, via_jacobian;
};
ThetaFactor theta_factor(const ReferenceSurface& s, const Field& h, const TangentialMap& tau,
                         const Diff& D, InterpMethod m = InterpMethod::Trigonometric);

// Max relative residuals of the pullback identities. g is computed directly
// from the composed embedding in R^3, the other sides from chart quantities
// resampled through eta_tau.
struct IdentityReport {
  double gG = 0.0;      // g = grad eta_tau^T (Gind o eta_tau) grad eta_tau
  double detg = 0.0;    // det g = det(grad eta_tau)^2 (det G_h J_h^2) o eta_tau
  double theta = 0.0;   // the two Theta formulas
  double lapH = 0.0;    // (Lap_Gind H) o eta_tau = Lap_g (H o eta_tau)
  double H_invariance = 0.0;  // curvature of the composed embedding = H o eta_tau
};
IdentityReport identity_suite(const ReferenceSurface& s, const Field& h, const TangentialMap& tau,
                              Backend backend, InterpMethod m);

}  // namespace shellflow
