#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "shellflow/errors.hpp"
#include "shellflow/kinematics.hpp"
#include "shellflow/shell.hpp"
#include "test_util.hpp"

using namespace shellflow;
using testutil::kTwoPi;
using testutil::WavyGraph;

namespace {

ReferenceSurface wavy(int n) {
  const WavyGraph w;
  return graph_surface({n, n, 1.0, 1.0}, [&](double x, double y) { return w.f(x, y); }, 0.2);
}

TangentialMap random_map(const Grid2& g, double amp, std::mt19937_64& rng) {
  TangentialMap t = identity_map(g);
  t.disp[0] = testutil::random_smooth(g, 3, amp, rng);
  t.disp[1] = testutil::random_smooth(g, 3, amp, rng);
  return t;
}

// A smooth chart diffeomorphism given in closed form.
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

std::vector<std::array<double, 2>> node_points(const Grid2& g) {
  std::vector<std::array<double, 2>> p(g.size());
  for (int k = 0; k < g.size(); ++k) p[k] = {g.y1(k / g.n2), g.y2(k % g.n2)};
  return p;
}

double max_map_gap(const TangentialMap& a, const TangentialMap& b) {
  return std::max(testutil::max_diff(a.disp[0], b.disp[0]), testutil::max_diff(a.disp[1], b.disp[1]));
}

double max_boundary_gap(const BoundaryMap& a, const BoundaryMap& b) {
  double m = 0.0;
  for (int c = 0; c < 3; ++c) m = std::max(m, testutil::max_diff(a.disp[c], b.disp[c]));
  return m;
}

}  // namespace

TEST_CASE("trigonometric interpolation reproduces band-limited fields and their gradients") {
  const Grid2 g{24, 20, 1.0, 1.5};
  auto f = [&](double x, double y) { return std::sin(kTwoPi * 3 * x) * std::cos(kTwoPi * 2 * y / 1.5) + 0.3 * std::cos(kTwoPi * (x + 4 * y / 1.5)); };
  auto fx = [&](double x, double y) { return kTwoPi * 3 * std::cos(kTwoPi * 3 * x) * std::cos(kTwoPi * 2 * y / 1.5) - 0.3 * kTwoPi * std::sin(kTwoPi * (x + 4 * y / 1.5)); };
  auto fy = [&](double x, double y) { return -std::sin(kTwoPi * 3 * x) * kTwoPi * 2 / 1.5 * std::sin(kTwoPi * 2 * y / 1.5) - 0.3 * kTwoPi * 4 / 1.5 * std::sin(kTwoPi * (x + 4 * y / 1.5)); };
  const Field F = g.sample(f);
  const Interpolant I(g, F, InterpMethod::Trigonometric);
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> U(-0.5, 2.0);
  std::vector<std::array<double, 2>> pts;
  for (int t = 0; t < 50; ++t) {
    const double x = U(rng), y = U(rng);
    pts.push_back({x, y});
    const auto v = I.eval(x, y);
    CHECK(std::abs(v.value - f(x, y)) < 1e-12);
    CHECK(std::abs(v.grad[0] - fx(x, y)) < 1e-10);
    CHECK(std::abs(v.grad[1] - fy(x, y)) < 1e-10);
  }
  const Field R = Resampler(g, pts, InterpMethod::Trigonometric)(F);
  for (size_t p = 0; p < pts.size(); ++p) CHECK(std::abs(R[p] - f(pts[p][0], pts[p][1])) < 1e-12);
  // Grid nodes are reproduced exactly, Nyquist content included.
  Field noisy(g.size());
  for (int k = 0; k < g.size(); ++k) noisy[k] = std::sin(1.7 * k * k);
  const Field back = Resampler(g, node_points(g), InterpMethod::Trigonometric)(noisy);
  CHECK(testutil::max_diff(back, noisy) < 1e-12);
}

TEST_CASE("cubic interpolation is fourth order and exact at nodes") {
  auto f = [](double x, double y) { return std::exp(0.3 * std::sin(kTwoPi * x)) * std::cos(kTwoPi * y); };
  std::vector<double> err;
  for (int n : {16, 32, 64}) {
    const Grid2 g{n, n, 1.0, 1.0};
    const Field F = g.sample(f);
    std::vector<std::array<double, 2>> pts;
    for (int t = 0; t < 40; ++t) pts.push_back({0.013 + 0.0247 * t, 0.71 - 0.0173 * t});
    const Field R = Resampler(g, pts, InterpMethod::Cubic)(F);
    const Interpolant I(g, F, InterpMethod::Cubic);
    double e = 0.0;
    for (size_t p = 0; p < pts.size(); ++p) {
      e = std::max(e, std::abs(R[p] - f(pts[p][0], pts[p][1])));
      CHECK(I.value(pts[p][0], pts[p][1]) == doctest::Approx(R[p]).epsilon(1e-14));
    }
    err.push_back(e);
    CHECK(testutil::max_diff(Resampler(g, node_points(g), InterpMethod::Cubic)(F), F) < 1e-15);
  }
  MESSAGE("cubic errors " << err[0] << " " << err[1] << " " << err[2]);
  CHECK(testutil::slope(err[1], err[2]) >= 3.7);
}

TEST_CASE("interpolant set matches single interpolants") {
  const Grid2 g{16, 16, 1.0, 1.0};
  std::mt19937_64 rng(2);
  const Field a = testutil::random_smooth(g, 4, 1.0, rng), b = testutil::random_smooth(g, 4, 1.0, rng);
  for (auto m : {InterpMethod::Trigonometric, InterpMethod::Cubic}) {
    const InterpolantSet set(g, {a, b}, m);
    const Interpolant ia(g, a, m), ib(g, b, m);
    std::vector<ValueGrad> v;
    set.eval(0.37, 0.81, v);
    const auto va = ia.eval(0.37, 0.81), vb = ib.eval(0.37, 0.81);
    CHECK(v[0].value == va.value);
    CHECK(v[1].grad[1] == vb.grad[1]);
  }
}

TEST_CASE("tangential map gradient and inverse") {
  const Grid2 g{32, 32, 1.0, 1.0};
  const Diff D(g, Backend::Spectral);
  const auto id = map_gradient(identity_map(g), D);
  for (int k = 0; k < g.size(); ++k) CHECK(id.det[k] == 1.0);
  const TangentialMap t = analytic_map(g);
  const auto G = map_gradient(t, D);
  for (int i = 0; i < g.n1; ++i)
    for (int j = 0; j < g.n2; ++j) {
      const double x = g.y1(i), y = g.y2(j);
      const int k = g.idx(i, j);
      const double a01 = 0.02 * kTwoPi * std::cos(kTwoPi * y) - 0.01 * kTwoPi * std::sin(kTwoPi * (x + y));
      CHECK(G.m[1][k] == doctest::Approx(a01).epsilon(1e-12).scale(1.0));
    }
  const auto nodes = node_points(g);
  const auto pre = inverse_points(t, nodes, InterpMethod::Trigonometric);
  const Interpolant d0(g, t.disp[0], InterpMethod::Trigonometric), d1(g, t.disp[1], InterpMethod::Trigonometric);
  for (size_t p = 0; p < nodes.size(); ++p) {
    CHECK(std::abs(pre[p][0] + d0.value(pre[p][0], pre[p][1]) - nodes[p][0]) < 1e-12);
    CHECK(std::abs(pre[p][1] + d1.value(pre[p][0], pre[p][1]) - nodes[p][1]) < 1e-12);
  }
  TangentialMap fold = identity_map(g);
  fold.disp[0] = g.sample([](double x, double) { return 0.3 * std::sin(kTwoPi * x); });
  try {
    map_gradient(fold, D);
    FAIL("expected a mesh-tangling error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::MeshTangling);
  }
}

TEST_CASE("tubular projection inverts the immersion") {
  const auto s = wavy(32);
  const TubularMap B(s, InterpMethod::Trigonometric);
  const double eps = s.thickness_eps;
  for (int k : {0, 100, 517, 1023}) {
    const Vec3 X = s.position(k);
    const auto p = B.project(X);
    CHECK(std::abs(p.z) < 1e-12);
    CHECK(std::abs(p.y[0] - s.grid.y1(k / 32)) < 1e-12);
    CHECK(std::abs(p.y[1] - s.grid.y2(k % 32)) < 1e-12);
    const auto q = B.project(X + 0.3 * eps * s.normal(k));
    CHECK(q.z == doctest::Approx(0.3 * eps).epsilon(1e-12));
    CHECK(std::abs(q.y[0] - s.grid.y1(k / 32)) < 1e-12);
  }
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> U(0.0, 1.0), Z(-0.9, 0.9);
  for (int t = 0; t < 200; ++t) {
    const Vec2 y(U(rng), U(rng));
    const double z = Z(rng) * eps;
    const Vec3 p = B.position(y, z);
    const auto r = B.project(p);
    CHECK((B.position(r.y, r.z) - p).norm() < 1e-10 * eps);
    CHECK(std::abs(r.z - z) < 1e-10);
    CHECK(r.iterations <= 50);
  }
  try {
    B.project(s.position(5) + 1.5 * eps * s.normal(5));
    FAIL("expected a projection error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Projection);
  }
  const auto f = flat_surface({8, 8, 1.0, 1.0}, 0.5);
  const auto fp = tubular_project(f, Vec3(0.3, 0.6, -0.2));
  CHECK(fp.y[0] == 0.3);
  CHECK(fp.z == -0.2);
}

TEST_CASE("decomposing simple boundaries") {
  const auto s = wavy(32);
  const auto d0 = decompose_boundary(s, identity_boundary(s));
  CHECK(testutil::max_abs(d0.h) < 1e-12);
  CHECK(max_map_gap(d0.tau, identity_map(s.grid)) < 1e-12);

  std::mt19937_64 rng(4);
  const Field h0 = testutil::random_smooth(s.grid, 3, 0.05, rng);
  const BoundaryMap offset = compose_boundary(s, h0, identity_map(s.grid));
  for (int k = 0; k < s.grid.size(); ++k)
    CHECK((offset.position(k) - (s.position(k) + h0[k] * s.normal(k))).norm() < 1e-14);
  const auto d1 = decompose_boundary(s, offset);
  CHECK(testutil::max_diff(d1.h, h0) < 1e-11);
  CHECK(max_map_gap(d1.tau, identity_map(s.grid)) < 1e-11);
}

TEST_CASE("decomposition recovers a known tangential reparameterization") {
  const auto s = wavy(32);
  std::mt19937_64 rng(5);
  const Field h = testutil::random_smooth(s.grid, 3, 0.05, rng);
  const TangentialMap phi = analytic_map(s.grid);
  const BoundaryMap b = compose_boundary(s, h, phi);
  const auto d = decompose_boundary(s, b);
  CHECK(max_map_gap(d.tau, phi) < 1e-10);
  CHECK(testutil::max_diff(d.h, h) < 1e-9);
  const BoundaryMap again = compose_boundary(s, d.h, d.tau);
  CHECK(max_boundary_gap(again, b) < 1e-9);
  // Cubic resampling is accurate to interpolation order.
  const auto dc = decompose_boundary(s, b, InterpMethod::Cubic);
  CHECK(testutil::max_diff(dc.h, h) < 1e-4);
}

TEST_CASE("boundaries that fold over the reference are rejected") {
  const auto s = flat_surface({32, 32, 1.0, 1.0}, 0.5);
  BoundaryMap b = identity_boundary(s);
  b.disp[0] = s.grid.sample([](double x, double) { return 0.25 * std::sin(kTwoPi * x); });
  try {
    decompose_boundary(s, b);
    FAIL("expected a decomposition error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Decomposition);
  }
}

TEST_CASE("tangential velocity of trivial motions vanishes") {
  const auto s = wavy(32);
  const int n = s.grid.size();
  const std::array<Field, 3> zero{Field(n, 0.0), Field(n, 0.0), Field(n, 0.0)};
  std::mt19937_64 rng(6);
  const Field h = testutil::random_smooth(s.grid, 3, 0.03, rng);
  const TangentialMap tau = analytic_map(s.grid);
  const auto u0 = tangential_velocity(s, zero, h, tau);
  CHECK(testutil::max_abs(u0.u_tau[0]) == 0.0);
  CHECK(testutil::max_abs(u0.h_t) == 0.0);
  // Uniform height moving along the reference normal.
  const Field hc(n, 0.04);
  const Resampler at(s.grid, tau.points(), InterpMethod::Trigonometric);
  std::array<Field, 3> vn;
  for (int c = 0; c < 3; ++c) {
    vn[c] = at(s.N[c]);
    for (double& x : vn[c]) x *= 0.7;
  }
  const auto un = tangential_velocity(s, vn, hc, tau);
  CHECK(testutil::max_abs(un.u_tau[0]) < 1e-12);
  CHECK(testutil::max_abs(un.u_tau[1]) < 1e-12);
  for (double x : un.h_t) CHECK(x == doctest::Approx(0.7).epsilon(1e-12));
}

TEST_CASE("tangential velocity advances the tangential map to second order") {
  const auto s = wavy(32);
  std::mt19937_64 rng(7);
  const Field h = testutil::random_smooth(s.grid, 3, 0.03, rng);
  const TangentialMap tau = analytic_map(s.grid);
  const BoundaryMap b = compose_boundary(s, h, tau);
  std::array<Field, 3> v;
  for (auto& c : v) c = testutil::random_smooth(s.grid, 2, 1.0, rng);
  const auto tv = tangential_velocity(s, v, h, tau);
  std::vector<double> err, herr;
  for (double dt : {4e-3, 2e-3, 1e-3}) {
    BoundaryMap moved = b;
    for (int c = 0; c < 3; ++c)
      for (int k = 0; k < s.grid.size(); ++k) moved.disp[c][k] += dt * v[c][k];
    const auto d = decompose_boundary(s, moved);
    TangentialMap pred = tau;
    for (int a = 0; a < 2; ++a)
      for (int k = 0; k < s.grid.size(); ++k) pred.disp[a][k] += dt * tv.u_tau_material[a][k];
    err.push_back(max_map_gap(d.tau, pred));
    Field hp = h;
    for (int k = 0; k < s.grid.size(); ++k) hp[k] += dt * tv.h_t[k];
    herr.push_back(testutil::max_diff(d.h, hp));
  }
  MESSAGE("tangential advance errors " << err[0] << " " << err[1] << " " << err[2]);
  CHECK(testutil::slope(err[0], err[1]) == doctest::Approx(2.0).epsilon(0.1));
  CHECK(testutil::slope(err[1], err[2]) == doctest::Approx(2.0).epsilon(0.1));
  CHECK(testutil::slope(herr[1], herr[2]) == doctest::Approx(2.0).epsilon(0.1));
}

TEST_CASE("Theta: both formulas agree and reduce to one for flat offsets") {
  const auto f = flat_surface({32, 32, 1.0, 1.0}, 0.5);
  const Diff Df(f.grid, Backend::Spectral);
  const auto t0 = theta_factor(f, Field(f.grid.size(), 0.0), identity_map(f.grid), Df);
  for (int k = 0; k < f.grid.size(); ++k) {
    CHECK(t0.via_metric[k] == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(t0.via_jacobian[k] == 1.0);
  }
  std::mt19937_64 rng(8);
  const Field h0 = testutil::random_smooth(f.grid, 3, 0.05, rng);
  const auto t1 = theta_factor(f, h0, identity_map(f.grid), Df);
  for (int k = 0; k < f.grid.size(); ++k) CHECK(t1.via_jacobian[k] == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(testutil::max_diff(t1.via_metric, t1.via_jacobian) < 1e-9);

  const auto s = wavy(64);
  const Diff D(s.grid, Backend::Spectral);
  for (int trial = 0; trial < 3; ++trial) {
    const Field h = testutil::random_smooth(s.grid, 3, 0.03, rng);
    const TangentialMap tau = random_map(s.grid, 0.01, rng);
    const auto th = theta_factor(s, h, tau, D);
    CHECK(testutil::max_diff(th.via_metric, th.via_jacobian) < 1e-9 * testutil::max_abs(th.via_jacobian));
  }
}

TEST_CASE("Theta scales the graph normal into the area vector of the boundary map") {
  // On a flat reference d_1 eta x d_2 eta = Theta (-grad h o eta_tau, 1).
  const auto f = flat_surface({64, 64, 1.0, 1.0}, 0.5);
  const Diff D(f.grid, Backend::Spectral);
  std::mt19937_64 rng(9);
  const Field h = testutil::random_smooth(f.grid, 3, 0.05, rng);
  const TangentialMap tau = random_map(f.grid, 0.01, rng);
  const BoundaryMap b = compose_boundary(f, h, tau);
  std::array<std::array<Field, 3>, 2> d;
  for (int a = 0; a < 2; ++a)
    for (int c = 0; c < 3; ++c) {
      d[a][c] = D.d(b.disp[c], a);
      if (a == c)
        for (double& x : d[a][c]) x += 1.0;
    }
  const auto th = theta_factor(f, h, tau, D);
  const Resampler at(f.grid, tau.points(), InterpMethod::Trigonometric);
  const Field h1 = at(D.d(h, 0)), h2 = at(D.d(h, 1));
  double worst = 0.0;
  for (int k = 0; k < f.grid.size(); ++k) {
    const Vec3 e1(d[0][0][k], d[0][1][k], d[0][2][k]), e2(d[1][0][k], d[1][1][k], d[1][2][k]);
    const Vec3 want = th.via_jacobian[k] * Vec3(-h1[k], -h2[k], 1.0);
    worst = std::max(worst, (e1.cross(e2) - want).norm());
  }
  CHECK(worst < 1e-9);
}

TEST_CASE("identity suite at the identity map is exact to rounding") {
  // The composed embedding X + h N is not band-limited; 64^2 resolves it.
  const auto s = wavy(64);
  std::mt19937_64 rng(10);
  const Field h = testutil::random_smooth(s.grid, 3, 0.03, rng);
  const auto r = identity_suite(s, h, identity_map(s.grid), Backend::Spectral, InterpMethod::Trigonometric);
  CHECK(r.gG < 1e-12);
  CHECK(r.detg < 1e-12);
  CHECK(r.theta < 1e-12);
  CHECK(r.lapH < 1e-8);
  CHECK(r.H_invariance < 1e-9);
}

TEST_CASE("identity suite on random inputs with the spectral backend") {
  const auto s = wavy(64);
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 3; ++trial) {
    const Field h = testutil::random_smooth(s.grid, 3, 0.03, rng);
    const TangentialMap tau = random_map(s.grid, 0.01, rng);
    const auto r = identity_suite(s, h, tau, Backend::Spectral, InterpMethod::Trigonometric);
    MESSAGE("residuals " << r.gG << " " << r.detg << " " << r.theta << " " << r.lapH << " " << r.H_invariance);
    CHECK(r.gG < 1e-8);
    CHECK(r.detg < 1e-8);
    CHECK(r.theta < 1e-8);
    CHECK(r.H_invariance < 1e-7);
    CHECK(r.lapH < 1e-6);
  }
}

TEST_CASE("Laplacian reparameterization residual converges at second order with differences") {
  std::vector<double> res;
  for (int n : {32, 64, 128}) {
    const auto s = wavy(n);
    const Field h = s.grid.sample([](double x, double y) {
      return 0.03 * std::sin(kTwoPi * x + 0.4) * std::cos(kTwoPi * y) + 0.01 * std::cos(kTwoPi * 2 * y);
    });
    const auto r = identity_suite(s, h, analytic_map(s.grid), Backend::FiniteDifference, InterpMethod::Cubic);
    res.push_back(r.lapH);
  }
  MESSAGE("lapH residuals " << res[0] << " " << res[1] << " " << res[2]);
  CHECK(testutil::slope(res[0], res[1]) >= 1.8);
  CHECK(testutil::slope(res[1], res[2]) >= 1.8);
}
