#include "shellflow/verify.hpp"

#include <cfloat>
#include <chrono>
#include <cmath>
#include <numbers>
#include <random>

#include "shellflow/diagnostics.hpp"
#include "shellflow/driver.hpp"
#include "shellflow/kinematics.hpp"
#include "shellflow/regularization.hpp"

namespace shellflow {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

using Clock = std::chrono::steady_clock;
double since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

Field scaled(Field f, double s) {
  for (double& x : f) x *= s;
  return f;
}

Field axpy(const Field& a, double s, const Field& b) {
  Field out(a.size());
  for (size_t k = 0; k < a.size(); ++k) out[k] = a[k] + s * b[k];
  return out;
}

TangentialMap random_map(const Grid2& g, double amp, std::mt19937_64& rng) {
  TangentialMap t = identity_map(g);
  t.disp[0] = scaled(random_height(g, 3, rng), amp);
  t.disp[1] = scaled(random_height(g, 3, rng), amp);
  return t;
}

TangentialMap analytic_map(const Grid2& g) {
  TangentialMap t = identity_map(g);
  for (int i = 0; i < g.n1; ++i)
    for (int j = 0; j < g.n2; ++j) {
      const double x = g.y1(i), y = g.y2(j);
      t.disp[0][g.idx(i, j)] = 0.02 * std::sin(kTwoPi * y) + 0.01 * std::cos(kTwoPi * (x + y));
      t.disp[1][g.idx(i, j)] = -0.015 * std::sin(kTwoPi * x);
    }
  return t;
}

}  // namespace

ReferenceSurface wavy_reference(int n) {
  return graph_surface(
      {n, n, 1.0, 1.0},
      [](double x, double y) {
        return 0.03 * std::sin(kTwoPi * x) * std::cos(kTwoPi * y) + 0.01 * std::cos(2 * kTwoPi * y);
      },
      0.2);
}

IdentityCheck identity_check(int pairs, int n, std::uint64_t seed) {
  const auto t0 = Clock::now();
  const auto s = wavy_reference(n);
  std::mt19937_64 rng(seed);
  IdentityCheck out;
  out.pairs = pairs;
  for (int k = 0; k < pairs; ++k) {
    const Field h = scaled(random_height(s.grid, 3, rng), 0.03);
    const TangentialMap tau = random_map(s.grid, 0.01, rng);
    const auto r = identity_suite(s, h, tau, Backend::Spectral, InterpMethod::Trigonometric);
    out.gG = std::max(out.gG, r.gG);
    out.detg = std::max(out.detg, r.detg);
    out.theta = std::max(out.theta, r.theta);
  }
  out.seconds = since(t0);
  return out;
}

ReparamCheck reparam_check(const std::vector<int>& sizes) {
  ReparamCheck out;
  for (int n : sizes) {
    const auto t0 = Clock::now();
    const auto s = wavy_reference(n);
    const Field h = s.grid.sample([](double x, double y) {
      return 0.03 * std::sin(kTwoPi * x + 0.4) * std::cos(kTwoPi * y) + 0.01 * std::cos(kTwoPi * 2 * y);
    });
    const auto r = identity_suite(s, h, analytic_map(s.grid), Backend::FiniteDifference, InterpMethod::Cubic);
    out.n.push_back(n);
    out.residual.push_back(r.lapH);
    out.seconds.push_back(since(t0));
  }
  out.min_order = INFINITY;
  for (size_t k = 1; k < out.n.size(); ++k)
    out.min_order = std::min(out.min_order, std::log(out.residual[k - 1] / out.residual[k]) /
                                                std::log(static_cast<double>(out.n[k]) / out.n[k - 1]));
  if (out.n.size() < 2) out.min_order = 0.0;
  return out;
}

VariationalCheck variational_check(const ShellParams& p, int heights, int directions, std::uint64_t seed) {
  const auto t0 = Clock::now();
  VariationalCheck out;
  out.convention =
      "H = trace of the shape operator (twice the mean curvature), energy density sigma H^2 / 2";
  std::mt19937_64 rng(seed);
  for (bool curved : {false, true}) {
    const auto s = curved ? wavy_reference(64) : flat_surface({64, 64, 1.0, 1.0}, 1.0);
    const Diff D(s.grid, Backend::Spectral);
    for (int a = 0; a < heights; ++a) {
      const Field h = scaled(random_height(s.grid, 3, rng), 0.03);
      const auto geo = shell_geometry(s, h, p, D);
      for (int b = 0; b < directions; ++b) {
        const Field dh = random_height(s.grid, 3, rng);
        double pairing = 0.0;
        for (int k = 0; k < s.grid.size(); ++k) pairing += p.sigma * geo.L[k] * dh[k] * geo.G.sqrt_det[k];
        pairing *= s.grid.cell_area();
        auto E = [&](double t) {
          const Field ht = axpy(h, t, dh);
          return willmore_energy(s, ht, p, D) + membrane_energy(s, ht, p, D);
        };
        const double t = 1e-3;
        const double c1 = (E(t) - E(-t)) / (2 * t), c2 = (E(t / 2) - E(-t / 2)) / t;
        const double rich = (4 * c2 - c1) / 3;
        out.max_rel_err = std::max(out.max_rel_err, std::abs(rich - pairing) / std::abs(pairing));
        ++out.cases;
      }
    }
  }
  out.seconds = since(t0);
  return out;
}

MollifierCheck mollifier_check(const SimConfig& c, std::uint64_t seed) {
  const Grid2 g = c.grid.layer();
  const FluidParams fp = c.fluid_params();
  const MollifierSpec spec = surface_spec(fp.eps, fp.mollifier_order);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> N(0.0, 1.0);
  MollifierCheck out;

  Field f(g.size()), h(g.size());
  for (auto& x : f) x = N(rng);
  for (auto& x : h) x = N(rng);
  const double lhs = dot(surface_mollify(g, f, spec), h), rhs = dot(f, surface_mollify(g, h, spec));
  out.self_adjoint = std::abs(lhs - rhs) / (norm2(f) * norm2(h));

  for (int m1 = 0; m1 <= g.n1 / 2; m1 += std::max(1, g.n1 / 8))
    for (int m2 = 0; m2 <= g.n2 / 2; m2 += std::max(1, g.n2 / 8)) {
      const double k1 = kTwoPi * m1 / g.L1, k2 = kTwoPi * m2 / g.L2;
      const Field e = g.sample([&](double x, double y) { return std::cos(k1 * x + k2 * y); });
      const Field Ke = surface_mollify(g, e, spec);
      const double sym = surface_mollifier_symbol(spec, k1, k2);
      for (int k = 0; k < g.size(); ++k) out.symbol = std::max(out.symbol, std::abs(Ke[k] - sym * e[k]));
    }

  for (Backend b : {Backend::FiniteDifference, Backend::Spectral}) {
    const Diff D(g, b);
    const Field v = random_height(g, 8, rng), w = random_height(g, 8, rng);
    const double l = dot(boundary_biharmonic(D, v, fp.kappa), w);
    const double r = fp.kappa * dot(D.lap0(v), D.lap0(w));
    out.sbp = std::max(out.sbp, std::abs(l - r) / std::abs(r));
  }
  return out;
}

CoercivityCheck coercivity_check(const SimConfig& c, int samples, int heights, std::uint64_t seed) {
  const Grid2 g = c.grid.layer();
  const ShellParams& sp = c.fluid.shell;
  const auto s = flat_surface(g, sp.thickness);
  const FluidParams fp = c.fluid_params();
  const Diff D(g, fp.backend);
  std::mt19937_64 rng(seed);
  CoercivityCheck out;
  out.ball_radius = sp.smallness * sp.thickness;
  out.nu_flat = coercivity(s, Field(g.size(), 0.0), D, samples, 0.9, rng).nu1;
  out.nu_ball = INFINITY;
  for (int k = 0; k < heights; ++k) {
    // Random heights on the sphere of 0.9 times the ball radius, clipped to
    // stay inside the tube.
    Field h = random_height(g, 2, rng);
    double scale = 0.9 * out.ball_radius / sobolev_norm(g, h, 2.0);
    scale = std::min(scale, 0.9 * sp.thickness);
    h = scaled(std::move(h), scale);
    out.h2_max = std::max(out.h2_max, sobolev_norm(g, h, 2.0));
    const Field hbar = surface_mollify(s, h, surface_spec(fp.eps, fp.mollifier_order));
    out.nu_ball = std::min(out.nu_ball, coercivity(s, hbar, D, samples, 0.5, rng).nu1);
  }
  return out;
}

CompatibilityCheck compatibility_check(const SimConfig& c) {
  CompatibilityCheck out;
  const auto setup = make_setup(c);
  out.q0_residual = setup->compat.q0_residual;
  out.cp_residual = setup->compat.cp_residual;
  out.deftan_residual = setup->compat.deftan_residual;
  const FluidParams fp = c.fluid_params();
  const Field zero(c.grid.layer_size(), 0.0);
  const auto cp = compatibility_initial(velocity_preset("compliant", 0.7, c.grid), Forcing{}, setup->surface,
                                        zero, c.grid, fp);
  out.compliant_cp = cp.cp_residual;
  out.compliant_deftan = cp.deftan_residual;
  for (double q : cp.q0) out.compliant_q0 = std::max(out.compliant_q0, std::abs(q));
  double u1 = 0.0;
  for (const Field& f : cp.u1)
    for (double x : f) u1 = std::max(u1, std::abs(x));
  out.compliant_scale = fp.nu * u1 / c.grid.hz();
  return out;
}

std::vector<VerifyLine> verify_identities(const SimConfig& c) {
  std::vector<VerifyLine> out;
  const auto id = identity_check();
  out.push_back({"identity metric g = grad tau^T G grad tau", id.gG, limits::identity});
  out.push_back({"identity det g", id.detg, limits::identity});
  out.push_back({"identity Theta two formulas", id.theta, limits::identity});
  out.push_back({"identity suite seconds", id.seconds, limits::identity_seconds});
  const auto rp = reparam_check();
  out.push_back({"reparameterization order", rp.min_order, limits::reparam_order, false});
  double rs = 0.0;
  for (double t : rp.seconds) rs = std::max(rs, t);
  out.push_back({"reparameterization seconds per grid", rs, limits::reparam_seconds});
  const auto va = variational_check(c.fluid.shell);
  out.push_back({"variational relative error", va.max_rel_err, limits::variational});
  const auto co = coercivity_check(c);
  out.push_back({"coercivity flat", co.nu_flat, limits::coercivity_flat, false});
  out.push_back({"coercivity in smallness ball", co.nu_ball, limits::coercivity_ball, false});
  const auto mo = mollifier_check(c);
  out.push_back({"mollifier self-adjointness", mo.self_adjoint, limits::self_adjoint});
  out.push_back({"mollifier symbol", mo.symbol, limits::symbol});
  out.push_back({"boundary biharmonic summation by parts", mo.sbp, limits::sbp});
  const auto cp = compatibility_check(c);
  out.push_back({"q0 elliptic residual", cp.q0_residual, limits::q0_residual});
  out.push_back({"compliant CP", cp.compliant_cp, limits::cp_rounding * DBL_EPSILON * cp.compliant_scale});
  out.push_back({"compliant tangential Def u0 N", cp.compliant_deftan, 0.0});
  return out;
}

}  // namespace shellflow
