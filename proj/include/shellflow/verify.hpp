#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "shellflow/config.hpp"

namespace shellflow {

// Reference graph z = 0.03 sin(2 pi x) cos(2 pi y) + 0.01 cos(4 pi y) over
// the unit periodic square, tube thickness 0.2.
ReferenceSurface wavy_reference(int n);

// Worst relative residuals of the metric, determinant and Theta identities
// over random (h, eta_tau) pairs on the wavy reference, spectral backend.
struct IdentityCheck {
  int pairs = 0;
  double gG = 0.0, detg = 0.0, theta = 0.0;
  double seconds = 0.0;
};
IdentityCheck identity_check(int pairs = 50, int n = 64, std::uint64_t seed = 1);

// Laplacian reparameterization residual under refinement, finite
// differences with cubic interpolation and a closed-form eta_tau.
struct ReparamCheck {
  std::vector<int> n;
  std::vector<double> residual, seconds;
  double min_order = 0.0;  // smallest observed order between successive grids
};
ReparamCheck reparam_check(const std::vector<int>& sizes = {32, 64, 128});

// sigma <L(h), dh>_{dS} against a Richardson-extrapolated central difference
// of sigma E_ben + gamma E_mem, on the flat and the wavy reference.
struct VariationalCheck {
  int cases = 0;
  double max_rel_err = 0.0;
  std::string convention;  // the curvature convention the match holds in
  double seconds = 0.0;
};
VariationalCheck variational_check(const ShellParams& p, int heights = 10, int directions = 10,
                                   std::uint64_t seed = 2);

struct MollifierCheck {
  double self_adjoint = 0.0;  // |<Kf,h> - <f,Kh>| / (|f| |h|)
  double symbol = 0.0;        // max |K e_k - symbol(k) e_k| on unit modes
  double sbp = 0.0;           // |<B v, w> - kappa <Lap v, Lap w>| / |kappa <Lap v, Lap w>|
};
MollifierCheck mollifier_check(const SimConfig& c, std::uint64_t seed = 3);

struct CoercivityCheck {
  double nu_flat = 0.0;
  double nu_ball = 0.0;       // minimum over the sampled heights in the ball
  double h2_max = 0.0;        // largest H2 norm among the sampled heights
  double ball_radius = 0.0;   // smallness * thickness
};
CoercivityCheck coercivity_check(const SimConfig& c, int samples = 100, int heights = 5,
                                 std::uint64_t seed = 4);

struct CompatibilityCheck {
  double q0_residual = 0.0;        // desk data
  double cp_residual = 0.0;        // desk data, reported only
  double deftan_residual = 0.0;    // desk data, reported only
  double compliant_cp = 0.0;       // constructed compliant field on the flat sheet
  double compliant_deftan = 0.0;
  double compliant_q0 = 0.0;       // max |q0|
  // Rounding scale of CP: nu max|u1| / hz, the size of the one-sided
  // normal derivative before cancellation.
  double compliant_scale = 0.0;
};
CompatibilityCheck compatibility_check(const SimConfig& c);

// Pass limits shared by the CLI and the acceptance harness.
namespace limits {
inline constexpr double identity = 1e-8;
inline constexpr double identity_seconds = 60.0;
inline constexpr double reparam_order = 1.8;
inline constexpr double reparam_seconds = 30.0;
inline constexpr double variational = 1e-4;
inline constexpr double coercivity_flat = 0.9;
inline constexpr double coercivity_ball = 0.5;
inline constexpr double self_adjoint = 1e-12;
inline constexpr double symbol = 1e-13;
inline constexpr double sbp = 1e-11;
inline constexpr double q0_residual = 1e-9;
inline constexpr double cp_rounding = 1e3;  // multiples of eps * compliant_scale
}  // namespace limits

struct VerifyLine {
  std::string name;
  double value = 0.0, limit = 0.0;
  bool upper = true;  // pass when value <= limit, else value >= limit
  bool pass() const { return upper ? value <= limit : value >= limit; }
};
// Every geometric, variational, mollifier, coercivity and compatibility
// check, one line per compared quantity.
std::vector<VerifyLine> verify_identities(const SimConfig& c);

}  // namespace shellflow
