#include "shellflow/geometry.hpp"

#include <cmath>
#include <sstream>

#include "shellflow/errors.hpp"

namespace shellflow {

SymField derivative(const Diff& D, const SymField& s, int a) {
  SymField out;
  out.xx = D.d(s.xx, a);
  out.xy = D.d(s.xy, a);
  out.yy = D.d(s.yy, a);
  return out;
}

Vec3 ReferenceSurface::position(int k) const {
  const int i = k / grid.n2, j = k % grid.n2;
  Vec3 p(grid.y1(i), grid.y2(j), 0.0);
  if (!Xp[0].empty()) p += Vec3(Xp[0][k], Xp[1][k], Xp[2][k]);
  return p;
}

namespace {

std::string node_name(const Grid2& g, int k) {
  std::ostringstream os;
  os << "node (" << k / g.n2 << "," << k % g.n2 << ")";
  return os.str();
}

void finish_surface(ReferenceSurface& s, Backend backend) {
  const int n = s.grid.size();
  if (!(s.thickness_eps > 0.0)) throw Error(ErrorKind::Domain, "thickness_eps must be positive");
  s.P = SymField(n);
  double kmax = 0.0;
  for (int k = 0; k < n; ++k) {
    const Mat2 g = s.g0.at(k);
    const Mat2 c = s.C.at(k);
    Eigen::SelfAdjointEigenSolver<Mat2> es(g);
    if (es.eigenvalues().minCoeff() <= 0.0)
      throw Error(ErrorKind::Degeneracy, "reference metric not SPD at " + node_name(s.grid, k));
    const Mat2 gi = g.inverse();
    s.P.set(k, c * gi * c);
    const double nn = s.normal(k).norm();
    if (std::abs(nn - 1.0) > 1e-12)
      throw Error(ErrorKind::Domain, "reference normal not unit at " + node_name(s.grid, k));
    Eigen::GeneralizedSelfAdjointEigenSolver<Mat2> ge(c, g);
    kmax = std::max(kmax, ge.eigenvalues().cwiseAbs().maxCoeff());
  }
  if (kmax * s.thickness_eps >= 1.0)
    throw Error(ErrorKind::Domain, "thickness_eps exceeds the focal distance of the reference surface");
  s.flat = true;
  for (int k = 0; k < n && s.flat; ++k)
    if (s.C.xx[k] != 0.0 || s.C.xy[k] != 0.0 || s.C.yy[k] != 0.0 || s.g0.xx[k] != 1.0 ||
        s.g0.xy[k] != 0.0 || s.g0.yy[k] != 1.0)
      s.flat = false;
  const Diff D(s.grid, backend);
  for (int a = 0; a < 2; ++a) {
    if (s.flat) {
      s.dg0[a] = SymField(n);
      s.dC[a] = SymField(n);
      s.dP[a] = SymField(n);
    } else {
      s.dg0[a] = derivative(D, s.g0, a);
      s.dC[a] = derivative(D, s.C, a);
      s.dP[a] = derivative(D, s.P, a);
    }
  }
}

}  // namespace

ReferenceSurface flat_surface(const Grid2& g, double thickness_eps) {
  ReferenceSurface s;
  s.grid = g;
  s.thickness_eps = thickness_eps;
  const int n = g.size();
  for (int c = 0; c < 3; ++c) {
    s.Xp[c].assign(n, 0.0);
    s.N[c].assign(n, c == 2 ? 1.0 : 0.0);
  }
  s.g0 = SymField(n);
  s.g0.xx.assign(n, 1.0);
  s.g0.yy.assign(n, 1.0);
  s.C = SymField(n);
  finish_surface(s, Backend::Spectral);
  return s;
}

ReferenceSurface graph_surface(const Grid2& g, const std::function<double(double, double)>& f,
                               double thickness_eps) {
  ReferenceSurface s;
  s.grid = g;
  s.thickness_eps = thickness_eps;
  const int n = g.size();
  const Diff D(g, Backend::Spectral);
  const Field F = g.sample(f);
  const Field f1 = D.d(F, 0), f2 = D.d(F, 1);
  const Field f11 = D.dd(F, 0, 0), f12 = D.dd(F, 0, 1), f22 = D.dd(F, 1, 1);
  s.Xp = {Field(n, 0.0), Field(n, 0.0), F};
  for (int c = 0; c < 3; ++c) s.N[c].assign(n, 0.0);
  s.g0 = SymField(n);
  s.C = SymField(n);
  for (int k = 0; k < n; ++k) {
    const double w = std::sqrt(1.0 + f1[k] * f1[k] + f2[k] * f2[k]);
    Vec3 nv(-f1[k], -f2[k], 1.0);
    nv /= nv.norm();
    for (int c = 0; c < 3; ++c) s.N[c][k] = nv[c];
    s.g0.xx[k] = 1.0 + f1[k] * f1[k];
    s.g0.xy[k] = f1[k] * f2[k];
    s.g0.yy[k] = 1.0 + f2[k] * f2[k];
    s.C.xx[k] = f11[k] / w;
    s.C.xy[k] = f12[k] / w;
    s.C.yy[k] = f22[k] / w;
  }
  finish_surface(s, Backend::Spectral);
  return s;
}

ReferenceSurface surface_from_fields(const Grid2& g, const SymField& g0, const SymField& C,
                                     const std::array<Field, 3>& N, double thickness_eps,
                                     Backend backend) {
  ReferenceSurface s;
  s.grid = g;
  s.thickness_eps = thickness_eps;
  s.g0 = g0;
  s.C = C;
  s.N = N;
  for (const Field* f : {&g0.xx, &g0.xy, &g0.yy, &C.xx, &C.xy, &C.yy, &N[0], &N[1], &N[2]})
    check_same(g, *f, "surface_from_fields");
  finish_surface(s, backend);
  return s;
}

MetricField make_metric(const Grid2& g, const SymField& values, const char* what) {
  MetricField m;
  m.grid = g;
  m.values = values;
  const int n = values.size();
  m.inverse = SymField(n);
  m.sqrt_det.assign(n, 0.0);
  for (int k = 0; k < n; ++k) {
    const double a = values.xx[k], b = values.xy[k], c = values.yy[k];
    const double det = a * c - b * b;
    if (!(a > 0.0 && det > 0.0) || !std::isfinite(det))
      throw Error(ErrorKind::Degeneracy,
                  std::string(what) + ": metric not SPD at " + node_name(g, k));
    m.inverse.xx[k] = c / det;
    m.inverse.xy[k] = -b / det;
    m.inverse.yy[k] = a / det;
    m.sqrt_det[k] = std::sqrt(det);
  }
  return m;
}

namespace {

void check_height(const ReferenceSurface& s, double z) {
  if (!(std::abs(z) < s.thickness_eps))
    throw Error(ErrorKind::Domain, "height outside the tubular neighborhood");
}

Mat2 tube_metric(const ReferenceSurface& s, int k, double z) {
  return s.g0.at(k) - 2.0 * z * s.C.at(k) + z * z * s.P.at(k);
}

}  // namespace

MetricField metric_at(const ReferenceSurface& s, double z) {
  check_height(s, z);
  SymField v(s.grid.size());
  for (int k = 0; k < s.grid.size(); ++k) v.set(k, tube_metric(s, k, z));
  return make_metric(s.grid, v, "metric_at");
}

MetricField metric_at_height(const ReferenceSurface& s, const Field& h) {
  check_same(s.grid, h, "metric_at_height");
  SymField v(s.grid.size());
  for (int k = 0; k < s.grid.size(); ++k) {
    check_height(s, h[k]);
    v.set(k, tube_metric(s, k, h[k]));
  }
  return make_metric(s.grid, v, "metric_at_height");
}

SymField metric_dz_at_height(const ReferenceSurface& s, const Field& h) {
  SymField v(s.grid.size());
  for (int k = 0; k < s.grid.size(); ++k) v.set(k, -2.0 * s.C.at(k) + 2.0 * h[k] * s.P.at(k));
  return v;
}

SymField metric_dy_at_height(const ReferenceSurface& s, const Field& h, int a) {
  SymField v(s.grid.size());
  for (int k = 0; k < s.grid.size(); ++k)
    v.set(k, s.dg0[a].at(k) - 2.0 * h[k] * s.dC[a].at(k) + h[k] * h[k] * s.dP[a].at(k));
  return v;
}

std::vector<ChristoffelField> tubular_christoffels(const ReferenceSurface& s,
                                                   const std::vector<double>& z_samples) {
  std::vector<ChristoffelField> out;
  const int n = s.grid.size();
  for (double z : z_samples) {
    const MetricField m = metric_at(s, z);
    ChristoffelField cf;
    cf.grid = s.grid;
    cf.z = z;
    cf.gamma.assign(n, {});
    for (int k = 0; k < n; ++k) {
      // dG[l](i,j) = d_l G_ij for the 3x3 block metric diag(G_z, 1).
      Eigen::Matrix3d dG[3];
      for (int l = 0; l < 3; ++l) dG[l].setZero();
      for (int a = 0; a < 2; ++a) {
        const Mat2 d = s.dg0[a].at(k) - 2.0 * z * s.dC[a].at(k) + z * z * s.dP[a].at(k);
        dG[a].topLeftCorner<2, 2>() = d;
      }
      dG[2].topLeftCorner<2, 2>() = -2.0 * s.C.at(k) + 2.0 * z * s.P.at(k);
      Eigen::Matrix3d Gi = Eigen::Matrix3d::Identity();
      Gi.topLeftCorner<2, 2>() = m.inverse.at(k);
      for (int kk = 0; kk < 3; ++kk)
        for (int i = 0; i < 3; ++i)
          for (int j = i; j < 3; ++j) {
            double acc = 0.0;
            for (int l = 0; l < 3; ++l)
              acc += Gi(kk, l) * (dG[i](j, l) + dG[j](i, l) - dG[l](i, j));
            cf.gamma[k][kk * 9 + i * 3 + j] = 0.5 * acc;
            cf.gamma[k][kk * 9 + j * 3 + i] = 0.5 * acc;
          }
    }
    out.push_back(std::move(cf));
  }
  return out;
}

Field laplace_beltrami(const MetricField& m, const Field& f, const Diff& D) {
  check_same(m.grid, f, "laplace_beltrami");
  if (!(D.grid() == m.grid)) throw Error(ErrorKind::Shape, "laplace_beltrami: grid mismatch");
  const Field f1 = D.d(f, 0), f2 = D.d(f, 1);
  const int n = m.grid.size();
  Field w1(n), w2(n);
  for (int k = 0; k < n; ++k) {
    const double sg = m.sqrt_det[k];
    w1[k] = sg * (m.inverse.xx[k] * f1[k] + m.inverse.xy[k] * f2[k]);
    w2[k] = sg * (m.inverse.xy[k] * f1[k] + m.inverse.yy[k] * f2[k]);
  }
  const Field a = D.d(w1, 0), b = D.d(w2, 1);
  Field out(n);
  for (int k = 0; k < n; ++k) out[k] = (a[k] + b[k]) / m.sqrt_det[k];
  return out;
}

}  // namespace shellflow
