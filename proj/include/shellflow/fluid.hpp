#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <array>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "shellflow/geometry.hpp"
#include "shellflow/interpolation.hpp"
#include "shellflow/kinematics.hpp"
#include "shellflow/regularization.hpp"
#include "shellflow/shell.hpp"

namespace shellflow {

// Fluid on the periodic slab T^2 x (0, Lz): no-slip wall at x3 = 0, the
// shell on the top face x3 = Lz whose node layer is the flat chart grid.
// Velocity is nodal trilinear (Q1) with lumped mass, the penalized pressure
// is cellwise constant.

using Vec3Field = std::array<Field, 3>;
using Mat3 = Eigen::Matrix3d;

struct FlowMap {
  Grid3 grid;
  Vec3Field disp;  // eta(x) = x + disp(x), nodal
  Vec3 position(int node) const;
};
FlowMap identity_flow(const Grid3& g);

// Cell-centre gradient of a nodal vector field: G(i, k) = d_k f^i, exact
// for trilinear data.
std::vector<Mat3> cell_gradient(const Grid3& g, const Vec3Field& f);

// a = (grad eta)^-1 per cell, stored as a(k, i) = a^k_i.
struct CofactorField {
  Grid3 grid;
  std::vector<Mat3> a;
  Field det;  // det grad eta
};
// Mesh-tangling error naming the first cell with det <= 0.
CofactorField cofactor(const FlowMap& eta);
CofactorField identity_cofactor(const Grid3& g);

// D(v)^i_l = a^k_l v^i_,k + a^k_i v^l_,k per cell; symmetric by construction.
std::vector<Mat3> deformation(const Vec3Field& v, const CofactorField& a);
// a^k_i v^i_,k per cell.
Field cofactor_divergence(const Vec3Field& v, const CofactorField& a);

// Closed-form velocity with gradient and Laplacian, used for initial data.
struct VelocityField {
  std::string name = "zero";
  std::function<Vec3(const Vec3&)> value;
  std::function<Mat3(const Vec3&)> grad;  // (i, k) = d_k u^i
  std::function<Vec3(const Vec3&)> laplacian;
};
// zero, shear (z^2, 0, 0), compliant (phi(z) sin(2 pi x2), 0, 0) with
// phi = 2 zeta - zeta^2, cellular (d_z psi, 0, -d_1 psi) for
// psi = sin(2 pi x1) zeta^2 (1 - zeta)^2; zeta = x3 / Lz.
VelocityField velocity_preset(const std::string& name, double amplitude, const Grid3& g);

// Eulerian body force F(x, t); empty means zero.
struct Forcing {
  std::function<Vec3(const Vec3&, double)> f;
  Vec3 operator()(const Vec3& x, double t) const;
  // Centred difference with step 1e-5.
  double divergence(const Vec3& x, double t) const;
};

struct FluidParams {
  double nu = 1.0;
  double theta = 1e-3;
  double kappa = 1e-4;
  double eps = 0.0;   // lengths: surface mollifier uses eps^2, volume bump radius eps
  double eps1 = 0.0;
  double mollifier_order = 2.0;
  double dt = 1e-3;
  Backend backend = Backend::Spectral;
  InterpMethod interp = InterpMethod::Cubic;
  double linear_tol = 1e-10;
  int linear_max_iter = 2000;
  ShellParams shell;
};
void validate(const FluidParams& p, const Grid3& g);
MollifierSpec surface_spec(double eps, double order);

struct FluidState {
  Vec3Field v;   // nodal; bottom layer zero
  Field q;       // per cell
  FlowMap eta;
  Field h;       // on the chart grid
  TangentialMap tau;
  double t = 0.0;
  long step = 0;
};
FluidState initial_state(const Grid3& g, const ReferenceSurface& s, const VelocityField& u0,
                         const Field& h0);

// Cell-centred pressure Poisson problem: 7-point Laplacian, periodic in x1,
// x2, Dirichlet data on the top face and Neumann flux d_3 q on the bottom.
Eigen::SparseMatrix<double> pressure_matrix(const Grid3& g);
// f with the boundary data folded in, so that pressure_matrix q = rhs.
Field pressure_rhs(const Grid3& g, const Field& f, const Field& top, const Field& bottom_flux);
// FFT in x1, x2 and a tridiagonal solve in x3 per mode.
Field solve_pressure(const Grid3& g, const Field& rhs);

struct Compatibility {
  Field q0;            // per cell
  Vec3Field u1;        // per cell, u1 = nu Lap u0 - grad q0 + F(0)
  double q0_residual = 0.0;   // max |A q0 - rhs|
  double cp_residual = 0.0;   // max |CP| over top face centres
  double deftan_residual = 0.0;  // max |[Def u0 N]_tan| over top face centres
};
Compatibility compatibility_initial(const VelocityField& u0, const Forcing& F,
                                    const ReferenceSurface& s, const Field& h0, const Grid3& g,
                                    const FluidParams& p);

// Coefficients frozen at the Picard iterate (v_tilde, h_tilde):
// hbar = K_eps h_tilde, eta_bar = x + rho_eps * (eta^n - x + dt v_tilde),
// a_bar = (grad eta_bar)^-1 and eta_bar^tau from the top layer of eta_bar.
struct FrozenCoefficients {
  Vec3Field v_tilde;
  Field h_tilde;
  FlowMap eta_bar;
  CofactorField a;
  Field hbar;
  TangentialMap tau_bar;
  std::vector<std::array<double, 2>> tau_bar_inverse;  // preimages of chart nodes
};
FrozenCoefficients freeze(const FluidState& state, const Vec3Field& v_tilde, const Field& h_tilde,
                          const ReferenceSurface& s, const FluidParams& p);

// Implicit Euler momentum system
//   (M/dt + A_vol + kappa Lap0^2 + sigma dt B^T K Lin K B) v = rhs
// with B v = (v_z - hbar_,a v_a) o eta_bar^-tau. Symmetric positive definite.
class MomentumSystem {
 public:
  MomentumSystem(const Grid3& g, const ReferenceSurface& s, const FrozenCoefficients& fz,
                 const FluidParams& p);
  ~MomentumSystem();
  MomentumSystem(const MomentumSystem&) = delete;
  MomentumSystem& operator=(const MomentumSystem&) = delete;

  int size() const;
  Eigen::VectorXd pack(const Vec3Field& v) const;
  Vec3Field unpack(const Eigen::VectorXd& x) const;

  void apply(const Eigen::VectorXd& x, Eigen::VectorXd& y) const;
  // Exact inverse of the operator with a_bar = I, hbar = 0, identity map.
  void precondition(const Eigen::VectorXd& r, Eigen::VectorXd& z) const;
  // Volume part only (viscous + penalty, no mass).
  void apply_volume(const Eigen::VectorXd& x, Eigen::VectorXd& y) const;
  // Height rate B v on the chart grid.
  Field height_rate(const Vec3Field& v) const;
  const Field& lumped_mass() const;  // nodal, full grid

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  friend FluidState linearized_step(const FluidState&, const FrozenCoefficients&, const Field&,
                                    const Forcing&, const ReferenceSurface&, const FluidParams&,
                                    struct StepReport*);
};

struct StepReport {
  int iterations = 0;
  double residual = 0.0;        // relative, of the assembled system
  double viscous = 0.0;         // dt nu/2 int |D v|^2
  double penalty = 0.0;         // dt theta^-1 int (a:grad v)^2
  double kappa_dissipation = 0.0;  // dt kappa |Lap0 v|^2 on the top face
  double forcing_work = 0.0;    // dt int F . v
  double pressure_work = 0.0;   // dt int q0_tilde a:grad v
  double divergence_l2 = 0.0;   // ||a:grad v||_L2
};

// One implicit step from state with the given frozen coefficients. Returns
// (v, q, eta, h, tau) at t + dt with q = q0_tilde - theta^-1 a:grad v.
FluidState linearized_step(const FluidState& state, const FrozenCoefficients& fz,
                           const Field& q0_tilde, const Forcing& F, const ReferenceSurface& s,
                           const FluidParams& p, StepReport* report = nullptr);

// h + dt (v_z - h_,a v_a) o eta_tau^-1 for velocities on the material
// boundary nodes; graph-violation error if the result leaves the tube.
Field advance_height(const ReferenceSurface& s, const Field& h, const TangentialMap& tau,
                     const Vec3Field& v_boundary, double dt, Backend backend,
                     InterpMethod m = InterpMethod::Cubic);

// Max mismatch between the fluid stress (nu D - q) a^T N, averaged from the
// top cells to the top nodes, and -sigma Theta L(h) (-grad h, 1) o eta_tau.
double boundary_traction_residual(const FluidState& state, const ReferenceSurface& s,
                                  const FluidParams& p);

// Diagnostics shared with the energy ledger.
double kinetic_energy(const FluidState& state);
// Shell energy of the mollified height K_eps1 h.
double elastic_energy(const ReferenceSurface& s, const Field& h, const FluidParams& p);
Vec3Field top_layer(const Grid3& g, const Vec3Field& v);

}  // namespace shellflow
