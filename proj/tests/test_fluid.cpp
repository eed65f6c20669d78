#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/SparseLU>

#include "shellflow/errors.hpp"
#include "shellflow/fluid.hpp"
#include "test_util.hpp"

using namespace shellflow;
using testutil::kTwoPi;

namespace {

Field random_slab(const Grid3& g, double amp, std::mt19937_64& rng, bool wall = true) {
  // Smooth in x1, x2 (low modes) times a profile vanishing at the wall.
  Field f(g.size(), 0.0);
  std::normal_distribution<double> N(0.0, 1.0);
  for (int m1 = -2; m1 <= 2; ++m1)
    for (int m2 = -2; m2 <= 2; ++m2)
      for (int pz = 1; pz <= 2; ++pz) {
        const double a = N(rng), b = N(rng);
        for (int k = 0; k <= g.nz; ++k)
          for (int i = 0; i < g.n1; ++i)
            for (int j = 0; j < g.n2; ++j) {
              const double z = k * g.hz() / g.Lz;
              const double prof = wall ? std::sin(0.5 * std::numbers::pi * pz * z) : std::cos(pz * z);
              const double ph = kTwoPi * (m1 * i * g.h1() / g.L1 + m2 * j * g.h2() / g.L2);
              f[g.idx(i, j, k)] += prof * (a * std::cos(ph) + b * std::sin(ph));
            }
      }
  double mx = testutil::max_abs(f);
  for (double& x : f) x *= amp / mx;
  return f;
}

Vec3Field random_velocity(const Grid3& g, double amp, std::mt19937_64& rng) {
  return {random_slab(g, amp, rng), random_slab(g, amp, rng), random_slab(g, amp, rng)};
}

Mat3 naive_gradient(const Grid3& g, const Vec3Field& f, int i, int j, int k) {
  Mat3 G = Mat3::Zero();
  const double h[3] = {g.h1(), g.h2(), g.hz()};
  for (int c = 0; c < 3; ++c)
    for (int a = 0; a < 2; ++a)
      for (int b = 0; b < 2; ++b) {
        G(c, 0) += (f[c][g.idx(i + 1, j + a, k + b)] - f[c][g.idx(i, j + a, k + b)]) / (4 * h[0]);
        G(c, 1) += (f[c][g.idx(i + a, j + 1, k + b)] - f[c][g.idx(i + a, j, k + b)]) / (4 * h[1]);
        G(c, 2) += (f[c][g.idx(i + a, j + b, k + 1)] - f[c][g.idx(i + a, j + b, k)]) / (4 * h[2]);
      }
  return G;
}

Mat3 adjugate_inverse(const Mat3& F) {
  Mat3 adj;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) {
      const int r1 = (c + 1) % 3, r2 = (c + 2) % 3, c1 = (r + 1) % 3, c2 = (r + 2) % 3;
      adj(r, c) = F(r1, c1) * F(r2, c2) - F(r1, c2) * F(r2, c1);
    }
  const double det = F(0, 0) * adj(0, 0) + F(0, 1) * adj(1, 0) + F(0, 2) * adj(2, 0);
  return adj / det;
}

Vec3Field field_from(const Grid3& g, const std::function<Vec3(const Vec3&)>& f) {
  Vec3Field v{Field(g.size()), Field(g.size()), Field(g.size())};
  for (int k = 0; k <= g.nz; ++k)
    for (int i = 0; i < g.n1; ++i)
      for (int j = 0; j < g.n2; ++j) {
        const Vec3 x(i * g.h1(), j * g.h2(), k * g.hz());
        const Vec3 u = f(x);
        for (int c = 0; c < 3; ++c) v[c][g.idx(i, j, k)] = u[c];
      }
  return v;
}

FluidParams small_params() {
  FluidParams p;
  p.nu = 1.0;
  p.theta = 1e-3;
  p.kappa = 1e-4;
  p.dt = 1e-3;
  p.shell.sigma = 1.0;
  p.shell.gamma = 0.1;
  p.shell.thickness = 0.2;
  return p;
}

Field bump(const Grid2& g, double amp) {
  return g.sample([&](double x, double y) {
    return amp * std::cos(kTwoPi * x) * std::cos(kTwoPi * y);
  });
}

double vec_max(const Vec3Field& v) {
  double m = 0.0;
  for (const auto& c : v) m = std::max(m, testutil::max_abs(c));
  return m;
}

}  // namespace

TEST_CASE("cofactor of the identity flow map is the identity") {
  const Grid3 g{6, 5, 4, 1.0, 1.2, 0.8};
  const auto a = cofactor(identity_flow(g));
  for (int c = 0; c < g.cells(); ++c) {
    CHECK((a.a[c] - Mat3::Identity()).norm() == 0.0);
    CHECK(a.det[c] == 1.0);
  }
}

TEST_CASE("cofactor matches an independent adjugate over determinant") {
  const Grid3 g{8, 8, 6, 1.0, 1.0, 1.0};
  std::mt19937_64 rng(5);
  FlowMap eta = identity_flow(g);
  eta.disp = random_velocity(g, 0.03, rng);
  const auto a = cofactor(eta);
  const auto G = cell_gradient(g, eta.disp);
  double worst = 0.0, inv = 0.0;
  for (int k = 0; k < g.nz; ++k)
    for (int i = 0; i < g.n1; ++i)
      for (int j = 0; j < g.n2; ++j) {
        const int c = g.cell(i, j, k);
        const Mat3 F = Mat3::Identity() + naive_gradient(g, eta.disp, i, j, k);
        CHECK((G[c] - (F - Mat3::Identity())).norm() < 1e-13);
        worst = std::max(worst, (a.a[c] - adjugate_inverse(F)).cwiseAbs().maxCoeff());
        inv = std::max(inv, (a.a[c] * F - Mat3::Identity()).cwiseAbs().maxCoeff());
        CHECK(a.det[c] == doctest::Approx(F.determinant()).epsilon(1e-13));
      }
  CHECK(worst < 1e-12);
  CHECK(inv < 1e-10);
}

TEST_CASE("a folded flow map is reported as mesh tangling") {
  const Grid3 g{6, 6, 4, 1.0, 1.0, 1.0};
  FlowMap eta = identity_flow(g);
  // One edge of four enters the centroid Jacobian: d3 eta3 = 1 - 1.2 / (4 hz) < 0.
  eta.disp[2][g.idx(2, 3, 2)] = -1.2;
  try {
    cofactor(eta);
    FAIL("expected mesh tangling");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::MeshTangling);
    CHECK(std::string(e.what()).find("cell") != std::string::npos);
  }
}

TEST_CASE("deformation tensor: shear, Killing fields and a naive oracle") {
  const Grid3 g{6, 6, 5, 1.0, 1.0, 1.0};
  const auto I = identity_cofactor(g);
  {
    const auto D = deformation(field_from(g, [](const Vec3& x) { return Vec3(x[2], 0, 0); }), I);
    for (const auto& d : D) {
      CHECK(d(0, 2) == doctest::Approx(1.0));
      CHECK(d(2, 0) == doctest::Approx(1.0));
      CHECK(d(0, 0) == doctest::Approx(0.0));
    }
    const auto D3 = deformation(field_from(g, [](const Vec3& x) { return Vec3(0, 0, x[2]); }), I);
    for (const auto& d : D3) CHECK(d(2, 2) == doctest::Approx(2.0));
  }
  {
    // Infinitesimal rotations are not periodic; check cells away from the seam.
    const auto v = field_from(g, [](const Vec3& x) {
      return Vec3(-x[1] + x[2], x[0], -x[0]);
    });
    const auto D = deformation(v, I);
    for (int k = 0; k < g.nz; ++k)
      for (int i = 0; i + 1 < g.n1; ++i)
        for (int j = 0; j + 1 < g.n2; ++j) CHECK(D[g.cell(i, j, k)].norm() < 1e-13);
  }
  {
    std::mt19937_64 rng(9);
    FlowMap eta = identity_flow(g);
    eta.disp = random_velocity(g, 0.05, rng);
    const auto a = cofactor(eta);
    const auto v = random_velocity(g, 1.0, rng);
    const auto D = deformation(v, a);
    for (int k = 0; k < g.nz; ++k)
      for (int i = 0; i < g.n1; ++i)
        for (int j = 0; j < g.n2; ++j) {
          const int c = g.cell(i, j, k);
          const Mat3 G = naive_gradient(g, v, i, j, k);
          for (int ii = 0; ii < 3; ++ii)
            for (int l = 0; l < 3; ++l) {
              double ref = 0.0;
              for (int kk = 0; kk < 3; ++kk)
                ref += a.a[c](kk, l) * G(ii, kk) + a.a[c](kk, ii) * G(l, kk);
              CHECK(D[c](ii, l) == doctest::Approx(ref).epsilon(1e-12).scale(1.0));
              CHECK(D[c](ii, l) == D[c](l, ii));
            }
        }
  }
}

TEST_CASE("pressure Poisson solver agrees with a sparse direct solve") {
  const Grid3 g{8, 6, 7, 1.0, 0.9, 1.1};
  std::mt19937_64 rng(3);
  std::normal_distribution<double> N(0.0, 1.0);
  Field f(g.cells()), top(g.layer_size()), flux(g.layer_size());
  for (double& x : f) x = N(rng);
  for (double& x : top) x = N(rng);
  for (double& x : flux) x = N(rng);
  const Field rhs = pressure_rhs(g, f, top, flux);
  const Field q = solve_pressure(g, rhs);
  const auto A = pressure_matrix(g);
  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu(A);
  REQUIRE(lu.info() == Eigen::Success);
  const Eigen::VectorXd b = Eigen::Map<const Eigen::VectorXd>(rhs.data(), rhs.size());
  const Eigen::VectorXd ref = lu.solve(b);
  const Eigen::VectorXd qv = Eigen::Map<const Eigen::VectorXd>(q.data(), q.size());
  CHECK((qv - ref).cwiseAbs().maxCoeff() < 1e-10 * ref.cwiseAbs().maxCoeff());
  CHECK((A * qv - b).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("compatibility data for rest, hydrostatic, shear and compliant fields") {
  const Grid3 g{8, 8, 8, 1.0, 1.0, 1.0};
  const auto s = flat_surface(g.layer(), 0.2);
  const FluidParams p = small_params();
  const Field zero(g.layer_size(), 0.0);
  SUBCASE("rest state") {
    const auto c = compatibility_initial(velocity_preset("zero", 0.0, g), Forcing{}, s, zero, g, p);
    CHECK(testutil::max_abs(c.q0) == 0.0);
    CHECK(vec_max(c.u1) == 0.0);
    CHECK(c.cp_residual == 0.0);
    CHECK(c.deftan_residual == 0.0);
  }
  SUBCASE("hydrostatic pressure balances a uniform body force") {
    Forcing F{[](const Vec3&, double) { return Vec3(0, 0, -3.0); }};
    const auto c = compatibility_initial(velocity_preset("zero", 0.0, g), F, s, zero, g, p);
    for (int k = 0; k < g.nz; ++k) {
      const double z = (k + 0.5) * g.hz();
      CHECK(c.q0[g.cell(1, 2, k)] == doctest::Approx(3.0 * (g.Lz - z)).epsilon(1e-10));
    }
    CHECK(vec_max(c.u1) < 1e-9);
    CHECK(c.q0_residual < 1e-9);
  }
  SUBCASE("shear reports its tangential normal derivative") {
    const auto c = compatibility_initial(velocity_preset("shear", 0.5, g), Forcing{}, s, zero, g, p);
    CHECK(c.deftan_residual == doctest::Approx(2 * 0.5 * g.Lz).epsilon(1e-12));
    CHECK(c.q0_residual < 1e-9);
  }
  SUBCASE("compliant field has vanishing CP") {
    const auto c =
        compatibility_initial(velocity_preset("compliant", 0.7, g), Forcing{}, s, zero, g, p);
    CHECK(c.deftan_residual == 0.0);
    CHECK(c.cp_residual < 1e-10);
    CHECK(testutil::max_abs(c.q0) < 1e-12);
  }
  SUBCASE("cellular flow solves to solver precision") {
    const auto c =
        compatibility_initial(velocity_preset("cellular", 0.3, g), Forcing{}, s, zero, g, p);
    CHECK(c.q0_residual < 1e-9);
    CHECK(testutil::max_abs(c.q0) > 1e-3);
  }
  SUBCASE("shell load enters through the Dirichlet value") {
    const auto c =
        compatibility_initial(velocity_preset("zero", 0.0, g), Forcing{}, s, bump(g.layer(), 0.01), g, p);
    CHECK(testutil::max_abs(c.q0) > 1e-4);
    CHECK(c.q0_residual < 1e-9);
  }
}

TEST_CASE("presets are divergence free and vanish on the wall") {
  const Grid3 g{8, 8, 8, 1.0, 1.0, 1.0};
  for (const char* name : {"shear", "compliant", "cellular"}) {
    const auto u = velocity_preset(name, 1.0, g);
    for (double x : {0.1, 0.37, 0.8})
      for (double y : {0.2, 0.55})
        for (double z : {0.0, 0.3, 0.9}) {
          const Vec3 X(x, y, z);
          CHECK(std::abs(u.grad(X).trace()) < 1e-12);
          if (z == 0.0) CHECK(u.value(X).norm() < 1e-14);
          // Finite-difference check of the gradient.
          const double d = 1e-6;
          for (int k = 0; k < 3; ++k) {
            Vec3 e = Vec3::Zero();
            e[k] = d;
            const Vec3 fd = (u.value(X + e) - u.value(X - e)) / (2 * d);
            for (int i = 0; i < 3; ++i) CHECK(u.grad(X)(i, k) == doctest::Approx(fd[i]).epsilon(1e-7).scale(1.0));
          }
        }
  }
  CHECK_THROWS_AS(velocity_preset("vortex", 1.0, g), Error);
}

TEST_CASE("momentum system is symmetric and the preconditioner is exact at rest") {
  const Grid3 g{8, 8, 6, 1.0, 1.0, 1.0};
  const auto s = flat_surface(g.layer(), 0.2);
  FluidParams p = small_params();
  p.eps = p.eps1 = 2.0 / 8;
  std::mt19937_64 rng(11);
  FluidState st = initial_state(g, s, velocity_preset("zero", 0.0, g), Field(g.layer_size(), 0.0));
  {
    const auto fz = freeze(st, st.v, st.h, s, p);
    MomentumSystem A(g, s, fz, p);
    Eigen::VectorXd r = Eigen::VectorXd::Random(A.size()), z(A.size()), back(A.size());
    A.precondition(r, z);
    A.apply(z, back);
    CHECK((back - r).cwiseAbs().maxCoeff() < 1e-9 * r.cwiseAbs().maxCoeff());
  }
  st.eta.disp = random_velocity(g, 0.02, rng);
  const auto vt = random_velocity(g, 0.5, rng);
  const auto fz = freeze(st, vt, bump(g.layer(), 0.02), s, p);
  MomentumSystem A(g, s, fz, p);
  Eigen::VectorXd x = Eigen::VectorXd::Random(A.size()), y = Eigen::VectorXd::Random(A.size());
  Eigen::VectorXd Ax(A.size()), Ay(A.size());
  A.apply(x, Ax);
  A.apply(y, Ay);
  CHECK(std::abs(y.dot(Ax) - x.dot(Ay)) < 1e-11 * std::abs(y.dot(Ax)) + 1e-12);
  CHECK(x.dot(Ax) > 0.0);
}

TEST_CASE("rest state stays at rest") {
  const Grid3 g{8, 8, 6, 1.0, 1.0, 1.0};
  const auto s = flat_surface(g.layer(), 0.2);
  FluidParams p = small_params();
  p.eps = p.eps1 = 0.25;
  FluidState st = initial_state(g, s, velocity_preset("zero", 0.0, g), Field(g.layer_size(), 0.0));
  const Field q0(g.cells(), 0.0);
  for (int n = 0; n < 3; ++n) {
    const auto fz = freeze(st, st.v, st.h, s, p);
    st = linearized_step(st, fz, q0, Forcing{}, s, p);
  }
  CHECK(vec_max(st.v) == 0.0);
  CHECK(testutil::max_abs(st.h) == 0.0);
  CHECK(testutil::max_abs(st.q) == 0.0);
  CHECK(boundary_traction_residual(st, s, p) == 0.0);
  CHECK(st.step == 3);
  CHECK(st.t == doctest::Approx(3 * p.dt));
}

TEST_CASE("pure viscous decay with a free top face") {
  const Grid3 g{8, 8, 8, 1.0, 1.0, 1.0};
  const auto s = flat_surface(g.layer(), 0.2);
  FluidParams p = small_params();
  p.nu = 2.0;
  p.kappa = 0.0;
  p.shell.sigma = 1e-300;  // shell effectively off
  p.shell.gamma = 0.0;
  p.dt = 5e-3;
  FluidState st =
      initial_state(g, s, velocity_preset("compliant", 1.0, g), Field(g.layer_size(), 0.0));
  const Field q0(g.cells(), 0.0);
  double prev = kinetic_energy(st);
  for (int n = 0; n < 5; ++n) {
    const auto fz = freeze(st, st.v, st.h, s, p);
    StepReport rep;
    const FluidState next = linearized_step(st, fz, q0, Forcing{}, s, p, &rep);
    CHECK(rep.residual < 1e-10);
    const double e = kinetic_energy(next);
    CHECK(e < prev);
    // Discrete identity: dE + |dv|^2/2 + dissipation = 0.
    double jump = 0.0;
    const MomentumSystem A(g, s, fz, p);
    for (int c = 0; c < 3; ++c)
      for (int k = 0; k < g.size(); ++k)
        jump += 0.5 * A.lumped_mass()[k] * std::pow(next.v[c][k] - st.v[c][k], 2);
    const double balance = e - prev + jump + rep.viscous + rep.penalty;
    CHECK(std::abs(balance) < 1e-8 * prev);
    prev = e;
    st = next;
  }
}

TEST_CASE("one coupled step satisfies the discrete energy identity") {
  const Grid3 g{8, 8, 6, 1.0, 1.0, 1.0};
  const auto s = flat_surface(g.layer(), 0.2);
  FluidParams p = small_params();
  p.eps = p.eps1 = 0.25;
  std::mt19937_64 rng(17);
  FluidState st = initial_state(g, s, velocity_preset("cellular", 0.2, g), bump(g.layer(), 0.01));
  const Field q0 = compatibility_initial(velocity_preset("cellular", 0.2, g), Forcing{}, s, st.h, g, p).q0;
  const auto fz = freeze(st, st.v, st.h, s, p);
  StepReport rep;
  const FluidState next = linearized_step(st, fz, q0, Forcing{}, s, p, &rep);
  CHECK(rep.residual < 1e-10);
  CHECK(rep.iterations < 60);
  // dh = dt B v exactly.
  const MomentumSystem A(g, s, fz, p);
  const Field rate = A.height_rate(next.v);
  for (int k = 0; k < g.layer_size(); ++k)
    CHECK(next.h[k] == doctest::Approx(st.h[k] + p.dt * rate[k]).epsilon(1e-14).scale(1e-16));
  CHECK(testutil::max_abs(next.q) > 0.0);
  CHECK(next.step == 1);
}

TEST_CASE("height advance: normal flow, tangential flow, and re-decomposition") {
  const Grid2 c{24, 24, 1.0, 1.0};
  const auto s = flat_surface(c, 0.3);
  const double dt = 0.01;
  {
    const Vec3Field v{Field(c.size(), 0.0), Field(c.size(), 0.0), Field(c.size(), 1.0)};
    const Field h = advance_height(s, Field(c.size(), 0.0), identity_map(c), v, dt, Backend::Spectral);
    for (double x : h) CHECK(x == doctest::Approx(dt).epsilon(1e-14));
  }
  {
    std::mt19937_64 rng(1);
    const Vec3Field v{testutil::random_smooth(c, 3, 1.0, rng), testutil::random_smooth(c, 3, 1.0, rng),
                      Field(c.size(), 0.0)};
    const Field h = advance_height(s, Field(c.size(), 0.05), identity_map(c), v, dt, Backend::Spectral);
    for (double x : h) CHECK(x == doctest::Approx(0.05).epsilon(1e-14));
  }
  {
    std::mt19937_64 rng(2);
    TangentialMap tau = identity_map(c);
    tau.disp[0] = testutil::random_smooth(c, 2, 0.02, rng);
    tau.disp[1] = testutil::random_smooth(c, 2, 0.02, rng);
    const Field h = testutil::random_smooth(c, 2, 0.03, rng);
    const Vec3Field v{testutil::random_smooth(c, 2, 0.5, rng), testutil::random_smooth(c, 2, 0.5, rng),
                      testutil::random_smooth(c, 2, 0.5, rng)};
    const BoundaryMap b0 = compose_boundary(s, h, tau);
    double err[2];
    for (int r = 0; r < 2; ++r) {
      const double step = r == 0 ? 0.02 : 0.01;
      BoundaryMap b1 = b0;
      for (int k = 0; k < 3; ++k)
        for (int n = 0; n < c.size(); ++n) b1.disp[k][n] += step * v[k][n];
      const Field ref = decompose_boundary(s, b1).h;
      const Field got =
          advance_height(s, h, tau, v, step, Backend::Spectral, InterpMethod::Trigonometric);
      err[r] = testutil::max_diff(ref, got);
    }
    CHECK(err[0] < 1e-3);
    CHECK(testutil::slope(err[0], err[1]) > 1.8);
  }
  {
    const Vec3Field v{Field(c.size(), 0.0), Field(c.size(), 0.0), Field(c.size(), 1.0)};
    CHECK_THROWS_AS(advance_height(s, Field(c.size(), 0.295), identity_map(c), v, dt, Backend::Spectral),
                    Error);
  }
}

TEST_CASE("penalized divergence decreases as theta is refined") {
  const Grid3 g{8, 8, 6, 1.0, 1.0, 1.0};
  const auto s = flat_surface(g.layer(), 0.2);
  double prev = 1e300;
  for (double theta : {4e-3, 2e-3, 1e-3}) {
    FluidParams p = small_params();
    p.theta = theta;
    p.eps = p.eps1 = 0.25;
    FluidState st = initial_state(g, s, velocity_preset("cellular", 0.3, g), bump(g.layer(), 0.01));
    const Field q0 = compatibility_initial(velocity_preset("cellular", 0.3, g), Forcing{}, s, st.h, g, p).q0;
    StepReport rep;
    for (int n = 0; n < 3; ++n) {
      const auto fz = freeze(st, st.v, st.h, s, p);
      st = linearized_step(st, fz, q0, Forcing{}, s, p, &rep);
    }
    CHECK(rep.divergence_l2 < prev);
    prev = rep.divergence_l2;
  }
}

TEST_CASE("parameter validation") {
  const Grid3 g{8, 8, 6, 1.0, 1.0, 1.0};
  FluidParams p = small_params();
  CHECK_NOTHROW(validate(p, g));
  p.theta = 0.0;
  CHECK_THROWS_AS(validate(p, g), Error);
  p = small_params();
  p.interp = InterpMethod::Trigonometric;
  CHECK_THROWS_AS(validate(p, g), Error);
  p = small_params();
  p.eps = 2.0;
  CHECK_THROWS_AS(validate(p, g), Error);
}
