#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "shellflow/errors.hpp"
#include "shellflow/regularization.hpp"
#include "test_util.hpp"

using namespace shellflow;
using testutil::kTwoPi;

TEST_CASE("zero strength mollifier is the identity and constants are kept") {
  const Grid2 g{16, 16, 1.0, 1.0};
  std::mt19937_64 rng(3);
  const Field f = testutil::random_smooth(g, 4, 1.0, rng);
  CHECK(surface_mollify(g, f, {0.0, 2.0}) == f);
  const Field c(g.size(), 2.5);
  CHECK(testutil::max_diff(surface_mollify(g, c, {0.01, 3.0}), c) < 1e-15);
}

TEST_CASE("single Fourier mode is scaled by the symbol") {
  const Grid2 g{32, 32, 1.0, 2.0};
  const MollifierSpec spec{std::pow(2.0 / 32, 2), 2.5};
  const double k1 = kTwoPi * 3, k2 = kTwoPi * 2 / 2.0;
  const Field f = g.sample([&](double x, double y) { return std::cos(k1 * x + k2 * y); });
  const double s = std::pow(1.0 + spec.eps * (k1 * k1 + k2 * k2), -1.25);
  const Field Kf = surface_mollify(g, f, spec);
  double worst = 0.0;
  for (int k = 0; k < g.size(); ++k) worst = std::max(worst, std::abs(Kf[k] - s * f[k]));
  CHECK(worst <= 1e-13);
}

TEST_CASE("surface mollifier is self-adjoint, contractive and commutes with the Laplacian") {
  const Grid2 g{32, 32, 1.0, 1.0};
  const Diff D(g, Backend::Spectral);
  std::mt19937_64 rng(4);
  std::normal_distribution<double> N(0.0, 1.0);
  Field f(g.size()), h(g.size());
  for (auto& x : f) x = N(rng);
  for (auto& x : h) x = N(rng);
  const MollifierSpec spec{0.004, 2.0};
  const Field Kf = surface_mollify(g, f, spec), Kh = surface_mollify(g, h, spec);
  CHECK(std::abs(dot(Kf, h) - dot(f, Kh)) <= 1e-12 * norm2(f) * norm2(h));
  CHECK(norm2(Kf) <= norm2(f));
  const Field a = surface_mollify(g, D.lap0(f), spec), b = D.lap0(Kf);
  CHECK(testutil::max_diff(a, b) <= 1e-10 * testutil::max_abs(a));
}

TEST_CASE("curved chart mollifier solves the shifted Laplace-Beltrami problem") {
  const testutil::WavyGraph w;
  const auto s = graph_surface({32, 32, 1.0, 1.0}, [&](double x, double y) { return w.f(x, y); }, 0.2);
  std::mt19937_64 rng(5);
  const Field f = testutil::random_smooth(s.grid, 5, 1.0, rng);
  const MollifierSpec spec{0.003, 2.0};
  const Field u = surface_mollify(s, f, spec);
  const Diff D(s.grid, Backend::Spectral);
  const auto m = make_metric(s.grid, s.g0, "test");
  const Field Lu = laplace_beltrami(m, u, D);
  Field r(u.size());
  for (size_t k = 0; k < u.size(); ++k) r[k] = u[k] - spec.eps * Lu[k] - f[k];
  CHECK(testutil::max_abs(r) < 1e-9);
  CHECK_THROWS_AS(surface_mollify(s, f, {0.003, 1.0}), Error);
}

TEST_CASE("smoothing order: p derivatives of the mollified white noise stay bounded") {
  std::mt19937_64 rng(6);
  std::normal_distribution<double> N(0.0, 1.0);
  double prev = 0.0;
  for (int n : {32, 64, 128}) {
    const Grid2 g{n, n, 1.0, 1.0};
    const Diff D(g, Backend::Spectral);
    Field f(g.size());
    for (auto& x : f) x = N(rng);
    const Field Kf = surface_mollify(g, f, {0.01, 2.0});
    const double ratio = norm2(D.lap0(Kf)) / norm2(f);
    CHECK(ratio <= 1.0 / 0.01);
    prev = ratio;
  }
  CHECK(prev > 0.0);
}

TEST_CASE("volume mollifier preserves constants and converges as the width shrinks") {
  const Grid3 g{16, 16, 12, 1.0, 1.0, 1.0};
  const Field c(g.size(), -1.25);
  CHECK(testutil::max_diff(volume_mollify(g, c, {0.2, 0.0, MollifierTarget::Volume}), c) < 1e-14);
  Field f(g.size());
  for (int k = 0; k <= g.nz; ++k)
    for (int i = 0; i < g.n1; ++i)
      for (int j = 0; j < g.n2; ++j)
        f[g.idx(i, j, k)] = std::sin(kTwoPi * i / 16.0) * std::cos(3.0 * k * g.hz()) + 0.1 * std::cos(kTwoPi * j / 8.0);
  double prev = 1e300;
  for (double eps : {0.4, 0.3, 0.2, 0.15, 0.1}) {
    const Field m = volume_mollify(g, f, {eps, 0.0, MollifierTarget::Volume});
    double e = 0.0;
    for (size_t k = 0; k < f.size(); ++k) e += (m[k] - f[k]) * (m[k] - f[k]);
    CHECK(e < prev);
    prev = e;
  }
  CHECK_THROWS_AS(volume_mollify(g, f, {1.5, 0.0, MollifierTarget::Volume}), Error);
}

TEST_CASE("volume mollifier gradient scales like one over the width") {
  const Grid3 g{32, 32, 16, 1.0, 1.0, 1.0};
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  Field f(g.size());
  for (auto& x : f) x = U(rng);
  for (double eps : {0.25, 0.125}) {
    const Field m = volume_mollify(g, f, {eps, 0.0, MollifierTarget::Volume});
    double gmax = 0.0;
    for (int k = 0; k <= g.nz; ++k)
      for (int i = 0; i < g.n1; ++i)
        for (int j = 0; j < g.n2; ++j)
          gmax = std::max(gmax, std::abs(m[g.idx(i + 1, j, k)] - m[g.idx(i, j, k)]) / g.h1());
    MESSAGE("eps " << eps << " max gradient * eps " << gmax * eps);
    CHECK(gmax * eps <= 5.0);
  }
}

TEST_CASE("boundary biharmonic: kernel, symbol and summation by parts") {
  const Grid2 g{32, 24, 1.0, 1.0};
  for (Backend b : {Backend::FiniteDifference, Backend::Spectral}) {
    const Diff D(g, b);
    const double kappa = 1e-4;
    CHECK(testutil::max_abs(boundary_biharmonic(D, Field(g.size(), 4.0), kappa)) < 1e-12);
    const double k1 = kTwoPi * 2, k2 = kTwoPi * 3;
    const Field f = g.sample([&](double x, double y) { return std::sin(k1 * x + k2 * y); });
    const double lam = D.symbol_dd(k1, k2, 0, 0) + D.symbol_dd(k1, k2, 1, 1);
    const Field Bf = boundary_biharmonic(D, f, kappa);
    for (int k = 0; k < g.size(); ++k) CHECK(std::abs(Bf[k] - kappa * lam * lam * f[k]) <= 1e-12 * kappa * lam * lam);
    if (b == Backend::Spectral) CHECK(lam * lam == doctest::Approx(std::pow(k1 * k1 + k2 * k2, 2)).epsilon(1e-14));
    std::mt19937_64 rng(9);
    const Field v = testutil::random_smooth(g, 8, 1.0, rng), w = testutil::random_smooth(g, 8, 1.0, rng);
    const double lhs = dot(boundary_biharmonic(D, v, 1.0), w);
    const double rhs = dot(D.lap0(v), D.lap0(w));
    CHECK(std::abs(lhs - rhs) <= 1e-11 * std::abs(rhs));
    CHECK(dot(boundary_biharmonic(D, v, 1.0), v) >= 0.0);
  }
}
