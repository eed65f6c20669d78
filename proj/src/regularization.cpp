#include "shellflow/regularization.hpp"

#include <cmath>

#include "shellflow/errors.hpp"

namespace shellflow {

double surface_mollifier_symbol(const MollifierSpec& spec, double k1, double k2) {
  if (spec.eps == 0.0 || spec.p == 0.0) return 1.0;
  return std::pow(1.0 + spec.eps * (k1 * k1 + k2 * k2), -0.5 * spec.p);
}

static void check_spec(const MollifierSpec& spec) {
  if (!(spec.eps >= 0.0) || !(spec.p >= 0.0))
    throw Error(ErrorKind::Domain, "mollifier needs eps >= 0 and p >= 0");
}

Field surface_mollify(const Grid2& g, const Field& f, const MollifierSpec& spec) {
  check_spec(spec);
  check_same(g, f, "surface_mollify");
  if (spec.eps == 0.0 || spec.p == 0.0) return f;
  return apply_symbol(g, f, [&](double k1, double k2, bool) {
    return cplx(surface_mollifier_symbol(spec, k1, k2));
  });
}

Field surface_mollify(const ReferenceSurface& s, const Field& f, const MollifierSpec& spec) {
  if (s.flat) return surface_mollify(s.grid, f, spec);
  check_spec(spec);
  check_same(s.grid, f, "surface_mollify");
  if (spec.eps == 0.0 || spec.p == 0.0) return f;
  const double half = 0.5 * spec.p;
  if (std::abs(half - std::round(half)) > 1e-12)
    throw Error(ErrorKind::Domain, "curved-chart mollifier needs an even integer order");
  const MetricField m = make_metric(s.grid, s.g0, "surface_mollify");
  const Diff D(s.grid, Backend::Spectral);
  const int n = s.grid.size();
  auto apply = [&](const Field& u) {
    const Field u1 = D.d(u, 0), u2 = D.d(u, 1);
    Field w1(n), w2(n);
    for (int k = 0; k < n; ++k) {
      w1[k] = m.sqrt_det[k] * (m.inverse.xx[k] * u1[k] + m.inverse.xy[k] * u2[k]);
      w2[k] = m.sqrt_det[k] * (m.inverse.xy[k] * u1[k] + m.inverse.yy[k] * u2[k]);
    }
    const Field a = D.d(w1, 0), b = D.d(w2, 1);
    Field out(n);
    for (int k = 0; k < n; ++k) out[k] = m.sqrt_det[k] * u[k] - spec.eps * (a[k] + b[k]);
    return out;
  };
  Field u = f;
  for (int rep = 0; rep < static_cast<int>(std::round(half)); ++rep) {
    Field rhs(n);
    for (int k = 0; k < n; ++k) rhs[k] = m.sqrt_det[k] * u[k];
    Field x(n, 0.0), r = rhs, p = r;
    double rr = dot(r, r);
    const double stop = 1e-28 * std::max(rr, 1e-300);
    int it = 0;
    for (; it < 2000 && rr > stop; ++it) {
      const Field Ap = apply(p);
      const double alpha = rr / dot(p, Ap);
      for (int k = 0; k < n; ++k) {
        x[k] += alpha * p[k];
        r[k] -= alpha * Ap[k];
      }
      const double rr2 = dot(r, r);
      for (int k = 0; k < n; ++k) p[k] = r[k] + (rr2 / rr) * p[k];
      rr = rr2;
    }
    if (rr > stop && rr > 1e-24)
      throw Error(ErrorKind::Convergence, "curved-chart mollifier solve did not converge");
    u = x;
  }
  return u;
}

std::vector<double> bump_weights(double radius, double spacing) {
  const int r = static_cast<int>(std::floor(radius / spacing));
  std::vector<double> w(2 * r + 1, 0.0);
  double sum = 0.0;
  for (int m = -r; m <= r; ++m) {
    const double s = m * spacing / radius;
    const double v = std::abs(s) < 1.0 ? std::exp(-1.0 / (1.0 - s * s)) : 0.0;
    w[m + r] = v;
    sum += v;
  }
  if (sum == 0.0) return {1.0};
  for (double& x : w) x /= sum;
  return w;
}

Field volume_mollify(const Grid3& g, const Field& f, const MollifierSpec& spec) {
  check_spec(spec);
  if (static_cast<int>(f.size()) != g.size())
    throw Error(ErrorKind::Shape, "volume_mollify: field size mismatch");
  if (spec.eps > g.Lz) throw Error(ErrorKind::Domain, "volume mollifier wider than the slab");
  if (spec.eps == 0.0) return f;
  Field a = f, b(f.size());
  const int n1 = g.n1, n2 = g.n2, nz = g.nz;
  // x1 direction.
  {
    const auto w = bump_weights(spec.eps, g.h1());
    const int r = (static_cast<int>(w.size()) - 1) / 2;
    for (int k = 0; k <= nz; ++k)
      for (int i = 0; i < n1; ++i)
        for (int j = 0; j < n2; ++j) {
          double s = 0.0;
          for (int m = -r; m <= r; ++m) s += w[m + r] * a[g.idx(i + m, j, k)];
          b[g.idx(i, j, k)] = s;
        }
    std::swap(a, b);
  }
  {
    const auto w = bump_weights(spec.eps, g.h2());
    const int r = (static_cast<int>(w.size()) - 1) / 2;
    for (int k = 0; k <= nz; ++k)
      for (int i = 0; i < n1; ++i)
        for (int j = 0; j < n2; ++j) {
          double s = 0.0;
          for (int m = -r; m <= r; ++m) s += w[m + r] * a[g.idx(i, j + m, k)];
          b[g.idx(i, j, k)] = s;
        }
    std::swap(a, b);
  }
  {
    const auto w = bump_weights(spec.eps, g.hz());
    const int r = (static_cast<int>(w.size()) - 1) / 2;
    for (int k = 0; k <= nz; ++k)
      for (int i = 0; i < n1; ++i)
        for (int j = 0; j < n2; ++j) {
          double s = 0.0;
          for (int m = -r; m <= r; ++m) {
            int kk = k + m;
            while (kk < 0 || kk > nz) kk = kk < 0 ? -kk : 2 * nz - kk;
            s += w[m + r] * a[g.idx(i, j, kk)];
          }
          b[g.idx(i, j, k)] = s;
        }
    std::swap(a, b);
  }
  return a;
}

Field boundary_biharmonic(const Diff& D, const Field& v, double kappa) {
  Field out = D.lap0(D.lap0(v));
  for (double& x : out) x *= kappa;
  return out;
}

}  // namespace shellflow
