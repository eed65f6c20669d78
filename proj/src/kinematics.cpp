#include "shellflow/kinematics.hpp"

#include <cmath>

#include "shellflow/errors.hpp"
#include "shellflow/shell.hpp"

namespace shellflow {

namespace {

constexpr int kMaxNewton = 50;

double wrap_centered(double x, double L) { return x - L * std::round(x / L); }

std::string node_name(const Grid2& g, int k) {
  return "(" + std::to_string(k / g.n2) + "," + std::to_string(k % g.n2) + ")";
}

Backend backend_for(InterpMethod m) {
  return m == InterpMethod::Trigonometric ? Backend::Spectral : Backend::FiniteDifference;
}

double max_abs(const Field& f) {
  double m = 0.0;
  for (double x : f) m = std::max(m, std::abs(x));
  return m;
}

double rel_gap(const Field& a, const Field& b) {
  double num = 0.0;
  for (size_t k = 0; k < a.size(); ++k) num = std::max(num, std::abs(a[k] - b[k]));
  const double den = max_abs(a);
  return den > 0.0 ? num / den : num;
}

}  // namespace

std::array<double, 2> TangentialMap::point(int k) const {
  return {grid.y1(k / grid.n2) + disp[0][k], grid.y2(k % grid.n2) + disp[1][k]};
}

std::vector<std::array<double, 2>> TangentialMap::points() const {
  std::vector<std::array<double, 2>> out(grid.size());
  for (int k = 0; k < grid.size(); ++k) out[k] = point(k);
  return out;
}

TangentialMap identity_map(const Grid2& g) {
  return {g, {Field(g.size(), 0.0), Field(g.size(), 0.0)}};
}

Mat2 MapGradient::at(int k) const {
  Mat2 a;
  a << m[0][k], m[1][k], m[2][k], m[3][k];
  return a;
}

MapGradient map_gradient(const TangentialMap& tau, const Diff& D) {
  check_same(tau.grid, tau.disp[0], "tangential map");
  check_same(tau.grid, tau.disp[1], "tangential map");
  MapGradient G;
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b) {
      G.m[a * 2 + b] = D.d(tau.disp[a], b);
      if (a == b)
        for (double& x : G.m[a * 2 + b]) x += 1.0;
    }
  G.det.resize(tau.grid.size());
  for (int k = 0; k < tau.grid.size(); ++k) {
    G.det[k] = G.m[0][k] * G.m[3][k] - G.m[1][k] * G.m[2][k];
    if (!(G.det[k] > 0.0))
      throw Error(ErrorKind::MeshTangling,
                  "tangential map folds at node " + node_name(tau.grid, k) +
                      " (det grad = " + std::to_string(G.det[k]) + ")");
  }
  return G;
}

std::vector<std::array<double, 2>> inverse_points(const TangentialMap& tau,
                                                  const std::vector<std::array<double, 2>>& Y,
                                                  InterpMethod m) {
  const Grid2& g = tau.grid;
  const InterpolantSet d(g, {tau.disp[0], tau.disp[1]}, m);
  const double tol = 1e-13 * std::max(g.L1, g.L2);
  std::vector<std::array<double, 2>> out(Y.size());
  std::vector<ValueGrad> v;
  for (size_t p = 0; p < Y.size(); ++p) {
    d.eval(Y[p][0], Y[p][1], v, false);
    Vec2 y(Y[p][0] - v[0].value, Y[p][1] - v[1].value);
    bool done = false;
    for (int it = 0; it < kMaxNewton && !done; ++it) {
      d.eval(y[0], y[1], v, true);
      const Vec2 r(y[0] + v[0].value - Y[p][0], y[1] + v[1].value - Y[p][1]);
      Mat2 Jm;
      Jm << 1.0 + v[0].grad[0], v[0].grad[1], v[1].grad[0], 1.0 + v[1].grad[1];
      if (!(Jm.determinant() > 0.0))
        throw Error(ErrorKind::MeshTangling, "tangential map is not invertible near a target point");
      const Vec2 step = Jm.inverse() * r;
      y -= step;
      done = step.lpNorm<Eigen::Infinity>() < tol;
    }
    if (!done) throw Error(ErrorKind::Convergence, "inverting the tangential map did not converge");
    out[p] = {y[0], y[1]};
  }
  return out;
}

Vec3 BoundaryMap::position(int k) const {
  return {grid.y1(k / grid.n2) + disp[0][k], grid.y2(k % grid.n2) + disp[1][k], disp[2][k]};
}

BoundaryMap identity_boundary(const ReferenceSurface& s) {
  BoundaryMap b{s.grid, {}};
  for (int c = 0; c < 3; ++c) b.disp[c] = s.Xp[c].empty() ? Field(s.grid.size(), 0.0) : s.Xp[c];
  return b;
}

namespace {

std::vector<Field> frame_fields(const ReferenceSurface& s) {
  std::vector<Field> f;
  for (int c = 0; c < 3; ++c) f.push_back(s.Xp[c].empty() ? Field(s.grid.size(), 0.0) : s.Xp[c]);
  for (int c = 0; c < 3; ++c) f.push_back(s.N[c]);
  return f;
}

}  // namespace

TubularMap::TubularMap(const ReferenceSurface& s, InterpMethod m)
    : s_(&s), fields_(s.grid, frame_fields(s), m) {}

void TubularMap::frame(const Vec2& y, std::vector<ValueGrad>& v) const {
  fields_.eval(y[0], y[1], v, true);
}

Vec3 TubularMap::position(const Vec2& y, double z) const {
  if (s_->flat) return {y[0], y[1], z};
  std::vector<ValueGrad> v;
  fields_.eval(y[0], y[1], v, false);
  Vec3 p;
  for (int c = 0; c < 3; ++c) p[c] = (c < 2 ? y[c] : 0.0) + v[c].value + z * v[3 + c].value;
  return p;
}

Vec3 TubularMap::normal(const Vec2& y) const {
  if (s_->flat) return {0.0, 0.0, 1.0};
  std::vector<ValueGrad> v;
  fields_.eval(y[0], y[1], v, false);
  return {v[3].value, v[4].value, v[5].value};
}

Eigen::Matrix3d TubularMap::jacobian(const Vec2& y, double z) const {
  if (s_->flat) return Eigen::Matrix3d::Identity();
  std::vector<ValueGrad> v;
  frame(y, v);
  Eigen::Matrix3d Jm;
  for (int c = 0; c < 3; ++c) {
    for (int a = 0; a < 2; ++a)
      Jm(c, a) = (c == a ? 1.0 : 0.0) + v[c].grad[a] + z * v[3 + c].grad[a];
    Jm(c, 2) = v[3 + c].value;
  }
  return Jm;
}

TubularMap::Point TubularMap::project(const Vec3& p) const {
  const ReferenceSurface& s = *s_;
  const double eps = s.thickness_eps;
  Point out;
  if (s.flat) {
    out.y = Vec2(p[0], p[1]);
    out.z = p[2];
  } else {
    // Seed: reference node closest to the normal line through p.
    const Grid2& g = s.grid;
    const int ic = static_cast<int>(std::round(p[0] / g.h1()));
    const int jc = static_cast<int>(std::round(p[1] / g.h2()));
    double best = INFINITY;
    Vec2 y;
    double z = 0.0;
    for (int di = -3; di <= 3; ++di)
      for (int dj = -3; dj <= 3; ++dj) {
        const int i = ic + di, j = jc + dj;
        const int k = g.idx(i, j);
        const Vec3 X(i * g.h1() + (s.Xp[0].empty() ? 0.0 : s.Xp[0][k]),
                     j * g.h2() + (s.Xp[1].empty() ? 0.0 : s.Xp[1][k]),
                     s.Xp[2].empty() ? 0.0 : s.Xp[2][k]);
        const Vec3 d = p - X;
        const double zn = d.dot(s.normal(k));
        const double perp = (d - zn * s.normal(k)).norm();
        if (perp < best) {
          best = perp;
          y = Vec2(i * g.h1(), j * g.h2());
          z = zn;
        }
      }
    auto residual = [&](const Vec2& yy, double zz) { return position(yy, zz) - p; };
    Vec3 r = residual(y, z);
    const double tol = 1e-12;
    bool done = false;
    int it = 0;
    for (; it < kMaxNewton && !done; ++it) {
      const Vec3 step = jacobian(y, z).partialPivLu().solve(r);
      double t = 1.0;
      Vec2 yn;
      double zn = 0.0;
      Vec3 rn;
      for (int half = 0; half < 30; ++half) {
        yn = y - t * step.head<2>();
        zn = z - t * step[2];
        rn = residual(yn, zn);
        if (rn.norm() <= (1.0 - 1e-4 * t) * r.norm() || r.norm() < 1e-14) break;
        t *= 0.5;
      }
      y = yn;
      z = zn;
      r = rn;
      done = (t * step).lpNorm<Eigen::Infinity>() < tol;
    }
    if (!done)
      throw Error(ErrorKind::Convergence, "tubular projection did not converge in " +
                                              std::to_string(kMaxNewton) + " iterations");
    out.y = y;
    out.z = z;
    out.iterations = it;
  }
  if (!(std::abs(out.z) < eps))
    throw Error(ErrorKind::Projection, "point lies outside the tubular neighborhood (|z| = " +
                                           std::to_string(std::abs(out.z)) + ")");
  return out;
}

TubularMap::Point tubular_project(const ReferenceSurface& s, const Vec3& p, InterpMethod m) {
  return TubularMap(s, m).project(p);
}

Decomposition decompose_boundary(const ReferenceSurface& s, const BoundaryMap& bmap,
                                 InterpMethod m) {
  const Grid2& g = s.grid;
  if (!(bmap.grid == g)) throw Error(ErrorKind::Shape, "boundary map grid differs from the chart");
  const TubularMap tm(s, m);
  TangentialMap tau = identity_map(g);
  Field zmat(g.size());
  for (int k = 0; k < g.size(); ++k) {
    TubularMap::Point pt;
    try {
      pt = tm.project(bmap.position(k));
    } catch (const Error& e) {
      throw Error(e.kind(), std::string(e.what()) + " at material node " + node_name(g, k));
    }
    tau.disp[0][k] = wrap_centered(pt.y[0] - g.y1(k / g.n2), g.L1);
    tau.disp[1][k] = wrap_centered(pt.y[1] - g.y2(k % g.n2), g.L2);
    zmat[k] = pt.z;
  }
  try {
    map_gradient(tau, Diff(g, backend_for(m)));
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::MeshTangling) throw;
    throw Error(ErrorKind::Decomposition,
                std::string("boundary is not a graph over the reference: ") + e.what());
  }
  std::vector<std::array<double, 2>> nodes(g.size());
  for (int k = 0; k < g.size(); ++k) nodes[k] = {g.y1(k / g.n2), g.y2(k % g.n2)};
  const Resampler back(g, inverse_points(tau, nodes, m), m);
  return {back(zmat), tau};
}

BoundaryMap compose_boundary(const ReferenceSurface& s, const Field& h, const TangentialMap& tau,
                             InterpMethod m) {
  const Grid2& g = s.grid;
  check_same(g, h, "height field");
  const Resampler at(g, tau.points(), m);
  const Field hh = at(h);
  BoundaryMap b{g, {}};
  for (int c = 0; c < 3; ++c) {
    const Field X = s.Xp[c].empty() ? Field(g.size(), 0.0) : at(s.Xp[c]);
    const Field N = at(s.N[c]);
    b.disp[c].resize(g.size());
    for (int k = 0; k < g.size(); ++k)
      b.disp[c][k] = (c < 2 ? tau.disp[c][k] : 0.0) + X[k] + hh[k] * N[k];
  }
  return b;
}

TangentialVelocity tangential_velocity(const ReferenceSurface& s,
                                       const std::array<Field, 3>& v_gamma, const Field& h,
                                       const TangentialMap& tau, InterpMethod m) {
  const Grid2& g = s.grid;
  check_same(g, h, "height field");
  for (int c = 0; c < 3; ++c) check_same(g, v_gamma[c], "boundary velocity");
  const TubularMap tm(s, m);
  const InterpolantSet hi(g, {h}, m);
  TangentialVelocity out;
  for (int a = 0; a < 2; ++a) out.u_tau_material[a].assign(g.size(), 0.0);
  Field ht_mat(g.size());
  std::vector<ValueGrad> hv;
  for (int k = 0; k < g.size(); ++k) {
    const auto Y = tau.point(k);
    hi.eval(Y[0], Y[1], hv, true);
    const Eigen::Matrix3d DB = tm.jacobian(Vec2(Y[0], Y[1]), hv[0].value);
    const double det = DB.determinant();
    if (!(std::abs(det) > 1e-12))
      throw Error(ErrorKind::Degeneracy, "tubular frame is singular at material node " + node_name(g, k));
    const Vec3 w = DB.partialPivLu().solve(Vec3(v_gamma[0][k], v_gamma[1][k], v_gamma[2][k]));
    out.u_tau_material[0][k] = w[0];
    out.u_tau_material[1][k] = w[1];
    ht_mat[k] = w[2] - hv[0].grad[0] * w[0] - hv[0].grad[1] * w[1];
  }
  std::vector<std::array<double, 2>> nodes(g.size());
  for (int k = 0; k < g.size(); ++k) nodes[k] = {g.y1(k / g.n2), g.y2(k % g.n2)};
  const Resampler back(g, inverse_points(tau, nodes, m), m);
  for (int a = 0; a < 2; ++a) out.u_tau[a] = back(out.u_tau_material[a]);
  out.h_t = back(ht_mat);
  return out;
}

namespace {

// The boundary embedding eta = (y, 0) + disp and its chart derivatives.
struct Composite {
  std::array<Field, 3> disp;
  std::array<std::array<Field, 3>, 2> d;  // d[a][c] = d_a eta^c
  SymField g;
};

Composite composite(const ReferenceSurface& s, const Field& h, const TangentialMap& tau,
                    const Diff& D, InterpMethod m) {
  Composite c;
  c.disp = compose_boundary(s, h, tau, m).disp;
  for (int a = 0; a < 2; ++a)
    for (int i = 0; i < 3; ++i) {
      c.d[a][i] = D.d(c.disp[i], a);
      if (i == a)
        for (double& x : c.d[a][i]) x += 1.0;
    }
  const int n = s.grid.size();
  c.g = SymField(n);
  for (int k = 0; k < n; ++k) {
    double g00 = 0, g01 = 0, g11 = 0;
    for (int i = 0; i < 3; ++i) {
      g00 += c.d[0][i][k] * c.d[0][i][k];
      g01 += c.d[0][i][k] * c.d[1][i][k];
      g11 += c.d[1][i][k] * c.d[1][i][k];
    }
    c.g.xx[k] = g00;
    c.g.xy[k] = g01;
    c.g.yy[k] = g11;
  }
  return c;
}

}  // namespace

ThetaFactor theta_factor(const ReferenceSurface& s, const Field& h, const TangentialMap& tau,
                         const Diff& D, InterpMethod m) {
  const Composite c = composite(s, h, tau, D, m);
  const MetricField gm = make_metric(s.grid, c.g, "theta_factor");
  const MapGradient T = map_gradient(tau, D);
  const Field J = jacobian_Jh(s, h, D);
  const MetricField G = metric_at_height(s, h);
  const Resampler at(s.grid, tau.points(), m);
  const Field Jt = at(J), sGt = at(G.sqrt_det);
  ThetaFactor th;
  th.via_metric.resize(s.grid.size());
  th.via_jacobian.resize(s.grid.size());
  for (int k = 0; k < s.grid.size(); ++k) {
    th.via_metric[k] = gm.sqrt_det[k] / Jt[k];
    th.via_jacobian[k] = T.det[k] * sGt[k];
    if (!(th.via_jacobian[k] > 0.0))
      throw Error(ErrorKind::Degeneracy, "Theta is not positive at node " + node_name(s.grid, k));
  }
  return th;
}

IdentityReport identity_suite(const ReferenceSurface& s, const Field& h, const TangentialMap& tau,
                              Backend backend, InterpMethod m) {
  const Grid2& g = s.grid;
  const Diff D(g, backend);
  const int n = g.size();
  const Composite c = composite(s, h, tau, D, m);
  const MetricField gm = make_metric(g, c.g, "identity_suite");
  const MapGradient T = map_gradient(tau, D);
  const ShellGeometry geo = shell_geometry(s, h, ShellParams{}, D);
  const Resampler at(g, tau.points(), m);
  const Field Gxx = at(geo.induced.values.xx), Gxy = at(geo.induced.values.xy),
              Gyy = at(geo.induced.values.yy);
  const Field Jt = at(geo.J), sGt = at(geo.G.sqrt_det);

  IdentityReport r;
  double gG_num = 0.0, gG_den = 0.0;
  Field detg(n), detg_rhs(n), th1(n), th2(n);
  for (int k = 0; k < n; ++k) {
    Mat2 Gk;
    Gk << Gxx[k], Gxy[k], Gxy[k], Gyy[k];
    const Mat2 Tk = T.at(k);
    const Mat2 rhs = Tk.transpose() * Gk * Tk;
    const Mat2 lhs = c.g.at(k);
    gG_num = std::max(gG_num, (lhs - rhs).norm());
    gG_den = std::max(gG_den, lhs.norm());
    detg[k] = lhs.determinant();
    detg_rhs[k] = T.det[k] * T.det[k] * sGt[k] * sGt[k] * Jt[k] * Jt[k];
    th1[k] = gm.sqrt_det[k] / Jt[k];
    th2[k] = T.det[k] * sGt[k];
  }
  r.gG = gG_num / gG_den;
  r.detg = rel_gap(detg, detg_rhs);
  r.theta = rel_gap(th1, th2);

  const Field Ht = at(geo.H);
  r.lapH = rel_gap(at(geo.lapH), laplace_beltrami(gm, Ht, D));

  // Mean curvature of the composed embedding in R^3.
  std::array<std::array<Field, 3>, 3> dd;
  for (int i = 0; i < 3; ++i) {
    dd[0][i] = D.dd(c.disp[i], 0, 0);
    dd[1][i] = D.dd(c.disp[i], 0, 1);
    dd[2][i] = D.dd(c.disp[i], 1, 1);
  }
  Field Hemb(n);
  for (int k = 0; k < n; ++k) {
    const Vec3 e1(c.d[0][0][k], c.d[0][1][k], c.d[0][2][k]);
    const Vec3 e2(c.d[1][0][k], c.d[1][1][k], c.d[1][2][k]);
    const Vec3 nn = e1.cross(e2).normalized();
    auto b = [&](int q) { return Vec3(dd[q][0][k], dd[q][1][k], dd[q][2][k]).dot(nn); };
    Mat2 bm;
    bm << b(0), b(1), b(1), b(2);
    Hemb[k] = -(gm.inverse.at(k) * bm).trace();
  }
  r.H_invariance = rel_gap(Ht, Hemb);
  return r;
}

}  // namespace shellflow
