#include "shellflow/fluid.hpp"

#include <cmath>
#include <mutex>
#include <numbers>
#include <optional>

#include "shellflow/errors.hpp"

namespace shellflow {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
using Mat3c = Eigen::Matrix3cd;
using Vec3c = Eigen::Vector3cd;

Vec3 node_x(const Grid3& g, int node) {
  const int ls = g.layer_size();
  const int k = node / ls, r = node % ls;
  return {(r / g.n2) * g.h1(), (r % g.n2) * g.h2(), k * g.hz()};
}

Vec3Field zero_vec(int n) { return {Field(n, 0.0), Field(n, 0.0), Field(n, 0.0)}; }

std::vector<std::array<double, 2>> chart_nodes(const Grid2& g) {
  std::vector<std::array<double, 2>> p(g.size());
  for (int k = 0; k < g.size(); ++k) p[k] = {g.y1(k / g.n2), g.y2(k % g.n2)};
  return p;
}

void check_slab(const Grid3& g, const ReferenceSurface& s) {
  if (!s.flat) throw Error(ErrorKind::Config, "the fluid solver needs a flat reference surface");
  if (!(s.grid == g.layer()))
    throw Error(ErrorKind::Shape, "fluid top layer and chart grid differ");
}

Field nodal_mass(const Grid3& g) {
  Field m(g.size());
  const double vol = g.h1() * g.h2() * g.hz();
  for (int k = 0; k <= g.nz; ++k)
    for (int r = 0; r < g.layer_size(); ++r)
      m[k * g.layer_size() + r] = (k == 0 || k == g.nz) ? 0.5 * vol : vol;
  return m;
}

// Local node l of a cell has offsets (l >> 2 & 1, l >> 1 & 1, l & 1).
int bit(int l, int d) { return (l >> (2 - d)) & 1; }

// Reference element data for trilinear shape functions on an h1 x h2 x hz box.
struct Element {
  std::array<std::array<Mat3, 8>, 8> S;  // S[a][b](m, k) = int d_m N_a d_k N_b
  std::array<Vec3, 8> gc;                // d_k N_a at the centroid
  double Sf[8][8][9];                    // S row-major
  double vol = 0.0;

  explicit Element(const Grid3& g) {
    const double h[3] = {g.h1(), g.h2(), g.hz()};
    vol = h[0] * h[1] * h[2];
    for (int a = 0; a < 8; ++a) {
      for (int k = 0; k < 3; ++k) gc[a][k] = (bit(a, k) ? 1.0 : -1.0) / (4.0 * h[k]);
      for (int b = 0; b < 8; ++b)
        for (int m = 0; m < 3; ++m)
          for (int k = 0; k < 3; ++k) {
            double v = 1.0;
            for (int d = 0; d < 3; ++d) {
              const int p = bit(a, d), q = bit(b, d);
              const double sp = p ? 1.0 : -1.0, sq = q ? 1.0 : -1.0;
              if (d == m && d == k)
                v *= sp * sq / h[d];
              else if (d == m)
                v *= 0.5 * sp;
              else if (d == k)
                v *= 0.5 * sq;
              else
                v *= h[d] * (p == q ? 1.0 / 3.0 : 1.0 / 6.0);
            }
            S[a][b](m, k) = v;
            Sf[a][b][m * 3 + k] = v;
          }
    }
  }

  // Viscous (exact quadrature) plus penalty (centroid rule) block coupling
  // component i of node a with component j of node b, for constant A.
  Mat3 block(int a, int b, const Mat3& A, const Mat3& T, double nu, double theta) const {
    const Mat3& Sab = S[a][b];
    // W = S^T A, K = nu (A^T W + tr(S T) I) + vol/theta c_a c_b^T.
    double W[3][3], tr = 0.0;
    for (int m = 0; m < 3; ++m)
      for (int jj = 0; jj < 3; ++jj) {
        W[m][jj] = Sab(0, m) * A(0, jj) + Sab(1, m) * A(1, jj) + Sab(2, m) * A(2, jj);
        tr += Sab(m, jj) * T(jj, m);
      }
    double ca[3], cb[3];
    for (int ii = 0; ii < 3; ++ii) {
      ca[ii] = A(0, ii) * gc[a][0] + A(1, ii) * gc[a][1] + A(2, ii) * gc[a][2];
      cb[ii] = A(0, ii) * gc[b][0] + A(1, ii) * gc[b][1] + A(2, ii) * gc[b][2];
    }
    const double pen = vol / theta;
    Mat3 K;
    for (int ii = 0; ii < 3; ++ii)
      for (int jj = 0; jj < 3; ++jj)
        K(ii, jj) = nu * (A(0, ii) * W[0][jj] + A(1, ii) * W[1][jj] + A(2, ii) * W[2][jj] +
                          (ii == jj ? tr : 0.0)) +
                    pen * ca[ii] * cb[jj];
    return K;
  }
};

int slot(int a, int b) {
  return (bit(b, 0) - bit(a, 0) + 1) * 9 + (bit(b, 1) - bit(a, 1) + 1) * 3 + (bit(b, 2) - bit(a, 2) + 1);
}

// Recycles block-matrix storage between systems: freshly mapped pages cost
// more than the assembly itself at desk scale.
class BufferPool {
 public:
  std::vector<double> take() {
    std::lock_guard<std::mutex> lock(m_);
    if (free_.empty()) return {};
    std::vector<double> v = std::move(free_.back());
    free_.pop_back();
    return v;
  }
  void give(std::vector<double>&& v) {
    std::lock_guard<std::mutex> lock(m_);
    if (free_.size() < 4) free_.push_back(std::move(v));
  }

 private:
  std::mutex m_;
  std::vector<std::vector<double>> free_;
};

BufferPool& block_pool() {
  static BufferPool pool;
  return pool;
}

const auto kSlot = [] {
  std::array<std::array<int, 8>, 8> s{};
  for (int a = 0; a < 8; ++a)
    for (int b = 0; b < 8; ++b) s[a][b] = slot(a, b);
  return s;
}();

Field probe_symbol_source(const Grid2& g) {
  Field d(g.size(), 0.0);
  d[0] = 1.0;
  return d;
}

}  // namespace

Vec3 FlowMap::position(int node) const {
  return node_x(grid, node) + Vec3(disp[0][node], disp[1][node], disp[2][node]);
}

FlowMap identity_flow(const Grid3& g) { return {g, zero_vec(g.size())}; }

std::vector<Mat3> cell_gradient(const Grid3& g, const Vec3Field& f) {
  for (const auto& c : f)
    if (static_cast<int>(c.size()) != g.size())
      throw Error(ErrorKind::Shape, "cell_gradient: nodal field size mismatch");
  std::vector<Mat3> G(g.cells());
  const double w[3] = {1.0 / (4 * g.h1()), 1.0 / (4 * g.h2()), 1.0 / (4 * g.hz())};
  for (int k = 0; k < g.nz; ++k)
    for (int i = 0; i < g.n1; ++i)
      for (int j = 0; j < g.n2; ++j) {
        Mat3 M = Mat3::Zero();
        for (int c = 0; c < 3; ++c) {
          const Field& v = f[c];
          for (int a = 0; a < 2; ++a)
            for (int b = 0; b < 2; ++b) {
              M(c, 0) += v[g.idx(i + 1, j + a, k + b)] - v[g.idx(i, j + a, k + b)];
              M(c, 1) += v[g.idx(i + a, j + 1, k + b)] - v[g.idx(i + a, j, k + b)];
              M(c, 2) += v[g.idx(i + a, j + b, k + 1)] - v[g.idx(i + a, j + b, k)];
            }
          for (int d = 0; d < 3; ++d) M(c, d) *= w[d];
        }
        G[g.cell(i, j, k)] = M;
      }
  return G;
}

CofactorField cofactor(const FlowMap& eta) {
  const Grid3& g = eta.grid;
  const auto G = cell_gradient(g, eta.disp);
  CofactorField out{g, std::vector<Mat3>(g.cells()), Field(g.cells())};
  for (int c = 0; c < g.cells(); ++c) {
    const Mat3 F = Mat3::Identity() + G[c];
    const double det = F.determinant();
    if (!(det > 0.0)) {
      const int k = c / g.layer_size(), r = c % g.layer_size();
      throw Error(ErrorKind::MeshTangling, "mesh tangling: det grad eta = " + std::to_string(det) +
                                               " in cell (" + std::to_string(r / g.n2) + "," +
                                               std::to_string(r % g.n2) + "," +
                                               std::to_string(k) + ")");
    }
    out.det[c] = det;
    out.a[c] = F.inverse();
  }
  return out;
}

CofactorField identity_cofactor(const Grid3& g) {
  return {g, std::vector<Mat3>(g.cells(), Mat3::Identity()), Field(g.cells(), 1.0)};
}

std::vector<Mat3> deformation(const Vec3Field& v, const CofactorField& a) {
  const auto G = cell_gradient(a.grid, v);
  std::vector<Mat3> D(G.size());
  for (size_t c = 0; c < G.size(); ++c) {
    const Mat3 Ga = G[c] * a.a[c];
    D[c] = Ga + Ga.transpose();
  }
  return D;
}

Field cofactor_divergence(const Vec3Field& v, const CofactorField& a) {
  const auto G = cell_gradient(a.grid, v);
  Field d(G.size());
  for (size_t c = 0; c < G.size(); ++c) d[c] = (G[c] * a.a[c]).trace();
  return d;
}

VelocityField velocity_preset(const std::string& name, double A, const Grid3& g) {
  VelocityField u;
  u.name = name;
  const double Lz = g.Lz;
  if (name == "zero") {
    u.value = [](const Vec3&) { return Vec3::Zero().eval(); };
    u.grad = [](const Vec3&) { return Mat3::Zero().eval(); };
    u.laplacian = u.value;
  } else if (name == "shear") {
    u.value = [A](const Vec3& x) { return Vec3(A * x[2] * x[2], 0, 0); };
    u.grad = [A](const Vec3& x) {
      Mat3 G = Mat3::Zero();
      G(0, 2) = 2 * A * x[2];
      return G;
    };
    u.laplacian = [A](const Vec3&) { return Vec3(2 * A, 0, 0); };
  } else if (name == "compliant") {
    const double k2 = kTwoPi / g.L2;
    auto phi = [Lz](double z) {
      const double s = z / Lz;
      return std::array<double, 3>{2 * s - s * s, (2 - 2 * s) / Lz, -2 / (Lz * Lz)};
    };
    u.value = [=](const Vec3& x) { return Vec3(A * phi(x[2])[0] * std::sin(k2 * x[1]), 0, 0); };
    u.grad = [=](const Vec3& x) {
      const auto f = phi(x[2]);
      Mat3 G = Mat3::Zero();
      G(0, 1) = A * f[0] * k2 * std::cos(k2 * x[1]);
      G(0, 2) = A * f[1] * std::sin(k2 * x[1]);
      return G;
    };
    u.laplacian = [=](const Vec3& x) {
      const auto f = phi(x[2]);
      return Vec3(A * (f[2] - k2 * k2 * f[0]) * std::sin(k2 * x[1]), 0, 0);
    };
  } else if (name == "cellular") {
    const double k1 = kTwoPi / g.L1;
    // Profile zeta^2 (1 - zeta)^2 and its x3 derivatives.
    auto prof = [Lz](double z) {
      const double s = z / Lz;
      return std::array<double, 4>{s * s * (1 - s) * (1 - s), (2 * s - 6 * s * s + 4 * s * s * s) / Lz,
                                   (2 - 12 * s + 12 * s * s) / (Lz * Lz),
                                   (-12 + 24 * s) / (Lz * Lz * Lz)};
    };
    u.value = [=](const Vec3& x) {
      const auto f = prof(x[2]);
      return Vec3(A * std::sin(k1 * x[0]) * f[1], 0, -A * k1 * std::cos(k1 * x[0]) * f[0]);
    };
    u.grad = [=](const Vec3& x) {
      const auto f = prof(x[2]);
      const double S = std::sin(k1 * x[0]), C = std::cos(k1 * x[0]);
      Mat3 G = Mat3::Zero();
      G(0, 0) = A * k1 * C * f[1];
      G(0, 2) = A * S * f[2];
      G(2, 0) = A * k1 * k1 * S * f[0];
      G(2, 2) = -A * k1 * C * f[1];
      return G;
    };
    u.laplacian = [=](const Vec3& x) {
      const auto f = prof(x[2]);
      const double S = std::sin(k1 * x[0]), C = std::cos(k1 * x[0]);
      return Vec3(A * S * (f[3] - k1 * k1 * f[1]), 0, -A * k1 * C * (f[2] - k1 * k1 * f[0]));
    };
  } else {
    throw Error(ErrorKind::Config, "unknown velocity preset '" + name + "'");
  }
  return u;
}

Vec3 Forcing::operator()(const Vec3& x, double t) const {
  return f ? f(x, t) : Vec3::Zero().eval();
}

double Forcing::divergence(const Vec3& x, double t) const {
  if (!f) return 0.0;
  const double d = 1e-5;
  double s = 0.0;
  for (int k = 0; k < 3; ++k) {
    Vec3 e = Vec3::Zero();
    e[k] = d;
    s += (f(x + e, t)[k] - f(x - e, t)[k]) / (2 * d);
  }
  return s;
}

void validate(const FluidParams& p, const Grid3& g) {
  auto bad = [](const std::string& m) { throw Error(ErrorKind::Config, m); };
  if (!(p.nu > 0.0)) bad("viscosity nu must be positive");
  if (!(p.theta > 0.0)) bad("penalization theta must be positive");
  if (!(p.kappa >= 0.0)) bad("kappa must be nonnegative");
  if (!(p.dt > 0.0)) bad("dt must be positive");
  if (!(p.eps >= 0.0) || !(p.eps1 >= 0.0)) bad("mollifier widths must be nonnegative");
  if (p.eps > g.Lz) bad("volume mollifier wider than the slab");
  if (!(p.mollifier_order >= 0.0)) bad("mollifier order must be nonnegative");
  if (p.interp != InterpMethod::Cubic) bad("the fluid coupling needs cubic interpolation");
  if (!(p.linear_tol > 0.0) || p.linear_max_iter <= 0) bad("invalid linear solver settings");
  if (g.n1 < 4 || g.n2 < 4 || g.nz < 3) bad("fluid grid needs n1, n2 >= 4 and nz >= 3");
  validate(p.shell);
}

MollifierSpec surface_spec(double eps, double order) {
  return {eps * eps, order, MollifierTarget::Surface};
}

FluidState initial_state(const Grid3& g, const ReferenceSurface& s, const VelocityField& u0,
                         const Field& h0) {
  check_slab(g, s);
  check_graph(s, h0);
  FluidState st;
  st.v = zero_vec(g.size());
  for (int n = g.layer_size(); n < g.size(); ++n) {
    const Vec3 u = u0.value(node_x(g, n));
    for (int c = 0; c < 3; ++c) st.v[c][n] = u[c];
  }
  st.q.assign(g.cells(), 0.0);
  st.eta = identity_flow(g);
  st.h = h0;
  st.tau = identity_map(g.layer());
  return st;
}

// ---------------------------------------------------------------- pressure

Eigen::SparseMatrix<double> pressure_matrix(const Grid3& g) {
  std::vector<Eigen::Triplet<double>> t;
  t.reserve(static_cast<size_t>(g.cells()) * 7);
  const double a1 = 1 / (g.h1() * g.h1()), a2 = 1 / (g.h2() * g.h2()), az = 1 / (g.hz() * g.hz());
  for (int k = 0; k < g.nz; ++k)
    for (int i = 0; i < g.n1; ++i)
      for (int j = 0; j < g.n2; ++j) {
        const int r = g.cell(i, j, k);
        double diag = -2 * a1 - 2 * a2;
        t.emplace_back(r, g.cell(i + 1, j, k), a1);
        t.emplace_back(r, g.cell(i - 1, j, k), a1);
        t.emplace_back(r, g.cell(i, j + 1, k), a2);
        t.emplace_back(r, g.cell(i, j - 1, k), a2);
        if (k > 0) {
          t.emplace_back(r, g.cell(i, j, k - 1), az);
          diag -= az;
        }
        if (k + 1 < g.nz) {
          t.emplace_back(r, g.cell(i, j, k + 1), az);
          diag -= az;
        } else {
          diag -= 2 * az;
        }
        t.emplace_back(r, r, diag);
      }
  Eigen::SparseMatrix<double> A(g.cells(), g.cells());
  A.setFromTriplets(t.begin(), t.end());
  return A;
}

Field pressure_rhs(const Grid3& g, const Field& f, const Field& top, const Field& bottom_flux) {
  if (static_cast<int>(f.size()) != g.cells() || static_cast<int>(top.size()) != g.layer_size() ||
      static_cast<int>(bottom_flux.size()) != g.layer_size())
    throw Error(ErrorKind::Shape, "pressure_rhs: size mismatch");
  Field b = f;
  const int ls = g.layer_size();
  for (int r = 0; r < ls; ++r) {
    b[(g.nz - 1) * ls + r] -= 2 * top[r] / (g.hz() * g.hz());
    b[r] += bottom_flux[r] / g.hz();
  }
  return b;
}

Field solve_pressure(const Grid3& g, const Field& rhs) {
  if (static_cast<int>(rhs.size()) != g.cells())
    throw Error(ErrorKind::Shape, "solve_pressure: size mismatch");
  auto fft = fft_for(g.n1, g.n2);
  const int ls = g.layer_size(), nc = fft->nc();
  std::vector<std::vector<cplx>> F(g.nz);
  for (int k = 0; k < g.nz; ++k)
    F[k] = fft->forward(Field(rhs.begin() + k * ls, rhs.begin() + (k + 1) * ls));
  const double az = 1 / (g.hz() * g.hz());
  std::vector<cplx> cp(g.nz), dp(g.nz);
  for (int m = 0; m < g.n1; ++m)
    for (int c = 0; c < nc; ++c) {
      const int e = m * nc + c;
      const double s1 = std::sin(std::numbers::pi * fft->mode1(m) / g.n1);
      const double s2 = std::sin(std::numbers::pi * c / g.n2);
      const double lam = -4 * s1 * s1 / (g.h1() * g.h1()) - 4 * s2 * s2 / (g.h2() * g.h2());
      // Thomas sweep with constant off-diagonals az.
      for (int k = 0; k < g.nz; ++k) {
        double diag = lam - (k > 0 ? az : 0.0) - (k + 1 < g.nz ? az : 2 * az);
        const cplx rk = F[k][e];
        if (k == 0) {
          cp[k] = az / diag;
          dp[k] = rk / diag;
        } else {
          const cplx den = diag - az * cp[k - 1];
          cp[k] = az / den;
          dp[k] = (rk - az * dp[k - 1]) / den;
        }
      }
      F[g.nz - 1][e] = dp[g.nz - 1];
      for (int k = g.nz - 2; k >= 0; --k) F[k][e] = dp[k] - cp[k] * F[k + 1][e];
    }
  Field q(g.cells());
  for (int k = 0; k < g.nz; ++k) {
    const Field layer = fft->inverse(F[k]);
    std::copy(layer.begin(), layer.end(), q.begin() + k * ls);
  }
  return q;
}

Compatibility compatibility_initial(const VelocityField& u0, const Forcing& F,
                                    const ReferenceSurface& s, const Field& h0, const Grid3& g,
                                    const FluidParams& p) {
  check_slab(g, s);
  check_graph(s, h0);
  if (g.nz < 3) throw Error(ErrorKind::Shape, "compatibility data needs nz >= 3");
  const int ls = g.layer_size();
  const double h1 = g.h1(), h2 = g.h2(), hz = g.hz();
  auto centre = [&](int i, int j, int k) { return Vec3((i + 0.5) * h1, (j + 0.5) * h2, (k + 0.5) * hz); };

  Field f(g.cells());
  for (int k = 0; k < g.nz; ++k)
    for (int i = 0; i < g.n1; ++i)
      for (int j = 0; j < g.n2; ++j) {
        const Vec3 x = centre(i, j, k);
        const Mat3 G = u0.grad(x);
        f[g.cell(i, j, k)] = -G.cwiseProduct(G.transpose()).sum() + F.divergence(x, 0.0);
      }

  // Normal stress balance on the top face centres, wall momentum on the bottom.
  const Diff D(s.grid, p.backend);
  const Field L = shell_operator_L(s, h0, p.shell, D);
  std::vector<std::array<double, 2>> faces(ls);
  for (int r = 0; r < ls; ++r) faces[r] = {(r / g.n2 + 0.5) * h1, (r % g.n2 + 0.5) * h2};
  const Field Lf = Resampler(s.grid, faces, InterpMethod::Trigonometric)(L);
  Field top(ls), flux(ls);
  for (int r = 0; r < ls; ++r) {
    const Vec3 xt(faces[r][0], faces[r][1], g.Lz), xb(faces[r][0], faces[r][1], 0.0);
    top[r] = 2 * p.nu * u0.grad(xt)(2, 2) + p.shell.sigma * Lf[r];
    flux[r] = p.nu * u0.laplacian(xb)[2] + F(xb, 0.0)[2];
  }

  Compatibility out;
  const Field rhs = pressure_rhs(g, f, top, flux);
  out.q0 = solve_pressure(g, rhs);
  {
    const auto A = pressure_matrix(g);
    const Eigen::VectorXd r = A * Eigen::Map<const Eigen::VectorXd>(out.q0.data(), out.q0.size()) -
                              Eigen::Map<const Eigen::VectorXd>(rhs.data(), rhs.size());
    out.q0_residual = r.size() ? r.cwiseAbs().maxCoeff() : 0.0;
    double scale = 1.0;
    for (double x : rhs) scale = std::max(scale, std::abs(x));
    if (!(out.q0_residual <= 1e-9 * scale))
      throw Error(ErrorKind::Convergence, "pressure Poisson residual " + std::to_string(out.q0_residual));
  }

  // u1 = nu Lap u0 - grad q0 + F(0) at cell centres, ghost cells from the
  // boundary data.
  const Field& q = out.q0;
  out.u1 = zero_vec(g.cells());
  for (int k = 0; k < g.nz; ++k)
    for (int i = 0; i < g.n1; ++i)
      for (int j = 0; j < g.n2; ++j) {
        const int c = g.cell(i, j, k), r = c % ls;
        const Vec3 x = centre(i, j, k);
        const double below = k > 0 ? q[c - ls] : q[c] - hz * flux[r];
        const double above = k + 1 < g.nz ? q[c + ls] : 2 * top[r] - q[c];
        const Vec3 gq((q[g.cell(i + 1, j, k)] - q[g.cell(i - 1, j, k)]) / (2 * h1),
                      (q[g.cell(i, j + 1, k)] - q[g.cell(i, j - 1, k)]) / (2 * h2),
                      (above - below) / (2 * hz));
        const Vec3 u1 = p.nu * u0.laplacian(x) - gq + F(x, 0.0);
        for (int d = 0; d < 3; ++d) out.u1[d][c] = u1[d];
      }

  // u1 and its gradient on the top face centres by quadratic extrapolation.
  Vec3Field uf = zero_vec(ls), dz = zero_vec(ls);
  for (int d = 0; d < 3; ++d)
    for (int r = 0; r < ls; ++r) {
      const double a = out.u1[d][(g.nz - 1) * ls + r], b = out.u1[d][(g.nz - 2) * ls + r],
                   c = out.u1[d][(g.nz - 3) * ls + r];
      uf[d][r] = (15 * a - 10 * b + 3 * c) / 8;
      dz[d][r] = (2 * a - 3 * b + c) / hz;
    }
  const Grid2 lg = g.layer();
  const Mat3 P = Vec3(1, 1, 0).asDiagonal();
  for (int i = 0; i < g.n1; ++i)
    for (int j = 0; j < g.n2; ++j) {
      const int r = lg.idx(i, j);
      const Vec3 x(faces[r][0], faces[r][1], g.Lz);
      const Mat3 G0 = u0.grad(x);
      Mat3 G1;
      for (int d = 0; d < 3; ++d) {
        G1(d, 0) = (uf[d][lg.idx(i + 1, j)] - uf[d][lg.idx(i - 1, j)]) / (2 * h1);
        G1(d, 1) = (uf[d][lg.idx(i, j + 1)] - uf[d][lg.idx(i, j - 1)]) / (2 * h2);
        G1(d, 2) = dz[d][r];
      }
      const Mat3 def0 = G0 + G0.transpose();
      const Mat3 S = p.nu * def0 - top[r] * Mat3::Identity();
      const Mat3 W = G0 * G0;
      const Mat3 R = G1 + G1.transpose() - W - W.transpose();
      for (int l = 0; l < 3; ++l) {
        double t1 = 0.0, t2 = 0.0, t3 = 0.0;
        for (int ii = 0; ii < 3; ++ii) {
          const double Q = G0(2, ii) * (l == 2) + G0(2, l) * (ii == 2);
          t1 += Q * S(ii, 2);
          t2 += p.nu * P(ii, l) * R(ii, 2);
          double sg = 0.0;
          for (int jj = 0; jj < 3; ++jj) sg += S(ii, jj) * G0(2, jj);
          t3 -= P(ii, l) * sg;
        }
        out.cp_residual = std::max(out.cp_residual, std::abs(t1 + t2 + t3));
      }
      for (int l = 0; l < 2; ++l) out.deftan_residual = std::max(out.deftan_residual, std::abs(def0(l, 2)));
    }
  return out;
}

// ------------------------------------------------------------ frozen data

FrozenCoefficients freeze(const FluidState& state, const Vec3Field& v_tilde, const Field& h_tilde,
                          const ReferenceSurface& s, const FluidParams& p) {
  const Grid3& g = state.eta.grid;
  check_slab(g, s);
  FrozenCoefficients fz;
  fz.v_tilde = v_tilde;
  fz.h_tilde = h_tilde;
  fz.hbar = surface_mollify(s, h_tilde, surface_spec(p.eps, p.mollifier_order));
  check_graph(s, fz.hbar);
  fz.eta_bar = identity_flow(g);
  const MollifierSpec vol{p.eps, p.mollifier_order, MollifierTarget::Volume};
  for (int c = 0; c < 3; ++c) {
    Field d = state.eta.disp[c];
    for (size_t n = 0; n < d.size(); ++n) d[n] += p.dt * v_tilde[c][n];
    fz.eta_bar.disp[c] = volume_mollify(g, d, vol);
  }
  fz.a = cofactor(fz.eta_bar);
  fz.tau_bar = identity_map(g.layer());
  const int off = g.nz * g.layer_size();
  for (int a = 0; a < 2; ++a)
    for (int r = 0; r < g.layer_size(); ++r) fz.tau_bar.disp[a][r] = fz.eta_bar.disp[a][off + r];
  fz.tau_bar_inverse = inverse_points(fz.tau_bar, chart_nodes(g.layer()), p.interp);
  return fz;
}

// --------------------------------------------------------- momentum system

struct MomentumSystem::Impl {
  Grid3 g;
  const ReferenceSurface* s;
  FluidParams p;
  Diff D;
  Element el;
  int ls, nu_nodes;
  std::vector<int> col;      // 27 neighbour unknowns per unknown node, -1 if absent
  std::vector<double> val;   // 27 blocks of 3x3 (row major) per unknown node
  Field mass;
  std::vector<double> mass_dt;  // per unknown component
  std::optional<Resampler> R;
  Field hb1, hb2;
  std::optional<LinearizedShellOperator> lin;
  MollifierSpec K1;
  double shell_scale, kappa_scale;
  // Preconditioner: per Fourier mode, inverse pivots and upper blocks.
  int nc;
  std::vector<Mat3c> pinv, up;

  Impl(const Grid3& g_, const ReferenceSurface& s_, const FrozenCoefficients& fz, const FluidParams& p_)
      : g(g_), s(&s_), p(p_), D(s_.grid, p_.backend), el(g_) {
    ls = g.layer_size();
    nu_nodes = ls * g.nz;
    mass = nodal_mass(g);
    mass_dt.resize(3 * static_cast<size_t>(nu_nodes));
    for (int u = 0; u < 3 * nu_nodes; ++u) mass_dt[u] = mass[ls + u / 3] / p.dt;
    R.emplace(g.layer(), fz.tau_bar_inverse, p.interp);
    hb1 = D.d(fz.hbar, 0);
    hb2 = D.d(fz.hbar, 1);
    lin.emplace(s_, fz.hbar, D);
    K1 = surface_spec(p.eps1, p.mollifier_order);
    const double area = g.h1() * g.h2();
    shell_scale = p.shell.sigma * p.dt * area;
    kappa_scale = p.kappa * area;
    assemble(fz.a);
    build_preconditioner();
  }

  ~Impl() { block_pool().give(std::move(val)); }

  int unknown(int i, int j, int k) const { return g.idx(i, j, k) - ls; }

  void assemble(const CofactorField& a) {
    col.assign(static_cast<size_t>(nu_nodes) * 27, -1);
    val = block_pool().take();
    val.assign(static_cast<size_t>(nu_nodes) * 27 * 9, 0.0);
    for (int k = 1; k <= g.nz; ++k)
      for (int i = 0; i < g.n1; ++i)
        for (int j = 0; j < g.n2; ++j) {
          const int r = unknown(i, j, k);
          for (int di = -1; di <= 1; ++di)
            for (int dj = -1; dj <= 1; ++dj)
              for (int dk = -1; dk <= 1; ++dk) {
                const int kk = k + dk;
                if (kk < 1 || kk > g.nz) continue;
                col[r * 27 + (di + 1) * 9 + (dj + 1) * 3 + (dk + 1)] = unknown(i + di, j + dj, kk);
              }
        }
    const double nu = p.nu, pen = el.vol / p.theta;
    for (int k = 0; k < g.nz; ++k)
      for (int i = 0; i < g.n1; ++i)
        for (int j = 0; j < g.n2; ++j) {
          const int c = g.cell(i, j, k);
          const Mat3& A = a.a[c];
          double Ar[9], Tr[9], cc[8][3];
          for (int m = 0; m < 3; ++m)
            for (int n = 0; n < 3; ++n) Ar[m * 3 + n] = A(m, n);
          for (int m = 0; m < 3; ++m)
            for (int n = 0; n < 3; ++n)
              Tr[m * 3 + n] = Ar[m * 3] * Ar[n * 3] + Ar[m * 3 + 1] * Ar[n * 3 + 1] + Ar[m * 3 + 2] * Ar[n * 3 + 2];
          for (int l = 0; l < 8; ++l)
            for (int n = 0; n < 3; ++n)
              cc[l][n] = Ar[n] * el.gc[l][0] + Ar[3 + n] * el.gc[l][1] + Ar[6 + n] * el.gc[l][2];
          int row[8];
          for (int l = 0; l < 8; ++l)
            row[l] = k + bit(l, 2) == 0 ? -1 : unknown(i + bit(l, 0), j + bit(l, 1), k + bit(l, 2));
          // Same block as Element::block; K^{ba} = (K^{ab})^T, so only la <= lb is computed.
          for (int la = 0; la < 8; ++la) {
            if (row[la] < 0) continue;
            for (int lb = la; lb < 8; ++lb) {
              if (row[lb] < 0) continue;
              const double* S = el.Sf[la][lb];
              double tr = 0.0, W[9], K[9];
              for (int m = 0; m < 3; ++m)
                for (int n = 0; n < 3; ++n) {
                  tr += S[m * 3 + n] * Tr[n * 3 + m];
                  W[m * 3 + n] = S[m] * Ar[n] + S[3 + m] * Ar[3 + n] + S[6 + m] * Ar[6 + n];
                }
              for (int ii = 0; ii < 3; ++ii)
                for (int jj = 0; jj < 3; ++jj)
                  K[ii * 3 + jj] = nu * (Ar[ii] * W[jj] + Ar[3 + ii] * W[3 + jj] + Ar[6 + ii] * W[6 + jj] +
                                         (ii == jj ? tr : 0.0)) +
                                   pen * cc[la][ii] * cc[lb][jj];
              double* v = &val[(static_cast<size_t>(row[la]) * 27 + kSlot[la][lb]) * 9];
              for (int q = 0; q < 9; ++q) v[q] += K[q];
              if (lb == la) continue;
              double* w = &val[(static_cast<size_t>(row[lb]) * 27 + kSlot[lb][la]) * 9];
              for (int ii = 0; ii < 3; ++ii)
                for (int jj = 0; jj < 3; ++jj) w[ii * 3 + jj] += K[jj * 3 + ii];
            }
          }
        }
  }

  void apply_volume(const double* x, double* y) const {
    for (int r = 0; r < nu_nodes; ++r) {
      double s0 = 0, s1 = 0, s2 = 0;
      for (int q = 0; q < 27; ++q) {
        const int cidx = col[r * 27 + q];
        if (cidx < 0) continue;
        const double* v = &val[(static_cast<size_t>(r) * 27 + q) * 9];
        const double* xv = x + 3 * cidx;
        s0 += v[0] * xv[0] + v[1] * xv[1] + v[2] * xv[2];
        s1 += v[3] * xv[0] + v[4] * xv[1] + v[5] * xv[2];
        s2 += v[6] * xv[0] + v[7] * xv[1] + v[8] * xv[2];
      }
      y[3 * r] = s0;
      y[3 * r + 1] = s1;
      y[3 * r + 2] = s2;
    }
  }

  Vec3Field top_of(const double* x) const {
    Vec3Field t = zero_vec(ls);
    const int off = (g.nz - 1) * ls;
    for (int c = 0; c < 3; ++c)
      for (int q = 0; q < ls; ++q) t[c][q] = x[3 * (off + q) + c];
    return t;
  }

  Field rate(const Vec3Field& top) const {
    const Field r1 = (*R)(top[0]), r2 = (*R)(top[1]), r3 = (*R)(top[2]);
    Field b(ls);
    for (int q = 0; q < ls; ++q) b[q] = r3[q] - hb1[q] * r1[q] - hb2[q] * r2[q];
    return b;
  }

  Vec3Field rate_adjoint(const Field& w) const {
    Field w1(ls), w2(ls);
    for (int q = 0; q < ls; ++q) {
      w1[q] = -hb1[q] * w[q];
      w2[q] = -hb2[q] * w[q];
    }
    return {R->adjoint(w1), R->adjoint(w2), R->adjoint(w)};
  }

  Field K(const Field& f) const { return surface_mollify(*s, f, K1); }

  void apply(const double* x, double* y) const {
    apply_volume(x, y);
    const int n = 3 * nu_nodes;
    for (int u = 0; u < n; ++u) y[u] += mass_dt[u] * x[u];
    const Vec3Field top = top_of(x);
    const int off = (g.nz - 1) * ls;
    if (kappa_scale > 0.0)
      for (int c = 0; c < 3; ++c) {
        const Field b = boundary_biharmonic(D, top[c], kappa_scale);
        for (int q = 0; q < ls; ++q) y[3 * (off + q) + c] += b[q];
      }
    Field w = K(lin->apply(K(rate(top))));
    for (double& v : w) v *= shell_scale;
    const Vec3Field back = rate_adjoint(w);
    for (int c = 0; c < 3; ++c)
      for (int q = 0; q < ls; ++q) y[3 * (off + q) + c] += back[c][q];
  }

  void build_preconditioner() {
    auto fft = fft_for(g.n1, g.n2);
    nc = fft->nc();
    const int modes = g.n1 * nc, nz = g.nz;
    const Grid2 lg = g.layer();
    const Field delta = probe_symbol_source(lg);
    const auto lap_hat = fft->forward(D.lap0(delta));
    const Field zero(ls, 0.0);
    const LinearizedShellOperator flat(*s, zero, D);
    const auto lin_hat = fft->forward(flat.apply(delta));
    const auto k_hat = fft->forward(K(delta));

    // Reference element blocks with a = I.
    const Mat3 I = Mat3::Identity();
    std::array<std::array<Mat3, 8>, 8> Ke;
    for (int a = 0; a < 8; ++a)
      for (int b = 0; b < 8; ++b) Ke[a][b] = el.block(a, b, I, I, p.nu, p.theta);

    pinv.assign(static_cast<size_t>(modes) * nz, Mat3c::Zero());
    up.assign(static_cast<size_t>(modes) * nz, Mat3c::Zero());
    std::vector<Mat3c> Dg(nz + 1);
    for (int m = 0; m < g.n1; ++m)
      for (int c = 0; c < nc; ++c) {
        const int e = m * nc + c;
        const double k1 = kTwoPi * fft->mode1(m) / g.L1, k2 = kTwoPi * c / g.L2;
        // Q[za][zb]: sum over element pairs with the given vertical offsets.
        Mat3c Q[2][2];
        for (auto& row : Q)
          for (auto& q : row) q.setZero();
        for (int a = 0; a < 8; ++a)
          for (int b = 0; b < 8; ++b) {
            const double ph = k1 * (bit(b, 0) - bit(a, 0)) * g.h1() + k2 * (bit(b, 1) - bit(a, 1)) * g.h2();
            Q[bit(a, 2)][bit(b, 2)] += Ke[a][b].cast<cplx>() * std::polar(1.0, ph);
          }
        for (int k = 1; k <= nz; ++k) {
          Dg[k] = Q[1][1];
          if (k < nz) Dg[k] += Q[0][0];
          Dg[k].diagonal().array() += mass[k * ls] / p.dt;
        }
        const double lap = lap_hat[e].real(), kh = k_hat[e].real();
        Dg[nz].diagonal().array() += kappa_scale * lap * lap;
        Dg[nz](2, 2) += shell_scale * kh * kh * lin_hat[e].real();
        // Block Thomas factorization; the lower blocks are Q01^H.
        const Mat3c U = Q[0][1], L = U.adjoint();
        Mat3c piv = Dg[1];
        for (int k = 1; k <= nz; ++k) {
          if (k > 1) piv = Dg[k] - L * pinv[static_cast<size_t>(e) * nz + k - 2] * U;
          pinv[static_cast<size_t>(e) * nz + k - 1] = piv.inverse();
          up[static_cast<size_t>(e) * nz + k - 1] = U;
        }
      }
  }

  void precondition(const double* r, double* z) const {
    auto fft = fft_for(g.n1, g.n2);
    const int nz = g.nz, modes = g.n1 * nc;
    std::vector<std::vector<cplx>> S(3 * nz);
    Field layer(ls);
    for (int k = 0; k < nz; ++k)
      for (int c = 0; c < 3; ++c) {
        for (int q = 0; q < ls; ++q) layer[q] = r[3 * (k * ls + q) + c];
        S[3 * k + c] = fft->forward(layer);
      }
    std::vector<Vec3c> y(nz);
    for (int e = 0; e < modes; ++e) {
      const Mat3c* P = &pinv[static_cast<size_t>(e) * nz];
      const Mat3c& U = up[static_cast<size_t>(e) * nz];
      const Mat3c L = U.adjoint();
      for (int k = 0; k < nz; ++k) {
        Vec3c rk(S[3 * k][e], S[3 * k + 1][e], S[3 * k + 2][e]);
        y[k] = k == 0 ? rk : Vec3c(rk - L * (P[k - 1] * y[k - 1]));
      }
      Vec3c x = P[nz - 1] * y[nz - 1];
      for (int c = 0; c < 3; ++c) S[3 * (nz - 1) + c][e] = x[c];
      for (int k = nz - 2; k >= 0; --k) {
        x = P[k] * (y[k] - U * x);
        for (int c = 0; c < 3; ++c) S[3 * k + c][e] = x[c];
      }
    }
    for (int k = 0; k < nz; ++k)
      for (int c = 0; c < 3; ++c) {
        const Field out = fft->inverse(S[3 * k + c]);
        for (int q = 0; q < ls; ++q) z[3 * (k * ls + q) + c] = out[q];
      }
  }
};

MomentumSystem::MomentumSystem(const Grid3& g, const ReferenceSurface& s,
                               const FrozenCoefficients& fz, const FluidParams& p)
    : impl_(std::make_unique<Impl>(g, s, fz, p)) {}
MomentumSystem::~MomentumSystem() = default;

int MomentumSystem::size() const { return 3 * impl_->nu_nodes; }

Eigen::VectorXd MomentumSystem::pack(const Vec3Field& v) const {
  const int ls = impl_->ls;
  Eigen::VectorXd x(size());
  for (int u = 0; u < impl_->nu_nodes; ++u)
    for (int c = 0; c < 3; ++c) x[3 * u + c] = v[c][ls + u];
  return x;
}

Vec3Field MomentumSystem::unpack(const Eigen::VectorXd& x) const {
  const int ls = impl_->ls;
  Vec3Field v = zero_vec(impl_->g.size());
  for (int u = 0; u < impl_->nu_nodes; ++u)
    for (int c = 0; c < 3; ++c) v[c][ls + u] = x[3 * u + c];
  return v;
}

void MomentumSystem::apply(const Eigen::VectorXd& x, Eigen::VectorXd& y) const {
  y.resize(size());
  impl_->apply(x.data(), y.data());
}

void MomentumSystem::precondition(const Eigen::VectorXd& r, Eigen::VectorXd& z) const {
  z.resize(size());
  impl_->precondition(r.data(), z.data());
}

void MomentumSystem::apply_volume(const Eigen::VectorXd& x, Eigen::VectorXd& y) const {
  y.resize(size());
  impl_->apply_volume(x.data(), y.data());
}

Field MomentumSystem::height_rate(const Vec3Field& v) const {
  return impl_->rate(top_layer(impl_->g, v));
}

const Field& MomentumSystem::lumped_mass() const { return impl_->mass; }

// -------------------------------------------------------------------- step

namespace {

// Preconditioned conjugate gradients; returns the iteration count.
int pcg(const MomentumSystem& A, const Eigen::VectorXd& b, Eigen::VectorXd& x, double tol,
        int maxit, double& rel) {
  const double bn = b.norm();
  if (bn == 0.0) {
    x.setZero();
    rel = 0.0;
    return 0;
  }
  Eigen::VectorXd r(b.size()), z(b.size()), Ap(b.size());
  A.apply(x, Ap);
  r = b - Ap;
  A.precondition(r, z);
  Eigen::VectorXd d = z;
  double rz = r.dot(z);
  for (int it = 0; it <= maxit; ++it) {
    if (r.norm() <= tol * bn) {
      A.apply(x, Ap);
      rel = (b - Ap).norm() / bn;
      return it;
    }
    A.apply(d, Ap);
    const double alpha = rz / d.dot(Ap);
    x += alpha * d;
    r -= alpha * Ap;
    A.precondition(r, z);
    const double rz_new = r.dot(z);
    d = z + (rz_new / rz) * d;
    rz = rz_new;
  }
  throw Error(ErrorKind::LinearSolver, "momentum solve did not reach relative residual " +
                                           std::to_string(tol) + " in " + std::to_string(maxit) +
                                           " iterations");
}

}  // namespace

Vec3Field top_layer(const Grid3& g, const Vec3Field& v) {
  Vec3Field t = zero_vec(g.layer_size());
  const int off = g.nz * g.layer_size();
  for (int c = 0; c < 3; ++c)
    std::copy(v[c].begin() + off, v[c].begin() + off + g.layer_size(), t[c].begin());
  return t;
}

FluidState linearized_step(const FluidState& state, const FrozenCoefficients& fz,
                           const Field& q0_tilde, const Forcing& F, const ReferenceSurface& s,
                           const FluidParams& p, StepReport* report) {
  const Grid3& g = state.eta.grid;
  validate(p, g);
  check_slab(g, s);
  if (static_cast<int>(q0_tilde.size()) != g.cells())
    throw Error(ErrorKind::Shape, "q0_tilde must be a cell field");
  const MomentumSystem A(g, s, fz, p);
  const auto& I = *A.impl_;
  const int ls = g.layer_size();
  const double vol = I.el.vol, area = g.h1() * g.h2();
  const double t1 = state.t + p.dt;

  // Right-hand side.
  Vec3Field rhs = zero_vec(g.size());
  for (int n = ls; n < g.size(); ++n) {
    const Vec3 f = F(fz.eta_bar.position(n), t1);
    for (int c = 0; c < 3; ++c) rhs[c][n] = I.mass[n] * (state.v[c][n] / p.dt + f[c]);
  }
  for (int k = 0; k < g.nz; ++k)
    for (int i = 0; i < g.n1; ++i)
      for (int j = 0; j < g.n2; ++j) {
        const int c = g.cell(i, j, k);
        if (q0_tilde[c] == 0.0) continue;
        const Mat3& Am = fz.a.a[c];
        for (int la = 0; la < 8; ++la) {
          const Vec3 ca = Am.transpose() * I.el.gc[la];
          const int n = g.idx(i + bit(la, 0), j + bit(la, 1), k + bit(la, 2));
          for (int d = 0; d < 3; ++d) rhs[d][n] += vol * q0_tilde[c] * ca[d];
        }
      }
  {
    const Diff& D = I.D;
    Field load = I.lin->apply(I.K(state.h));
    const Field M = linearized_remainder(s, fz.hbar, p.shell, D);
    for (int q = 0; q < ls; ++q) load[q] += M[q];
    load = I.K(load);
    for (double& x : load) x *= p.shell.sigma * area;
    const Vec3Field back = I.rate_adjoint(load);
    const int off = g.nz * ls;
    for (int c = 0; c < 3; ++c)
      for (int q = 0; q < ls; ++q) rhs[c][off + q] -= back[c][q];
  }
  const Eigen::VectorXd b = A.pack(rhs);
  Eigen::VectorXd x = A.pack(fz.v_tilde);
  double rel = 0.0;
  const int its = pcg(A, b, x, p.linear_tol, p.linear_max_iter, rel);

  FluidState out;
  out.v = A.unpack(x);
  const Field rate = I.rate(top_layer(g, out.v));
  out.h = state.h;
  for (int q = 0; q < ls; ++q) out.h[q] += p.dt * rate[q];
  check_graph(s, out.h);
  const Field div = cofactor_divergence(out.v, fz.a);
  out.q.resize(g.cells());
  for (int c = 0; c < g.cells(); ++c) out.q[c] = q0_tilde[c] - div[c] / p.theta;
  out.eta = state.eta;
  for (int c = 0; c < 3; ++c)
    for (int n = 0; n < g.size(); ++n) out.eta.disp[c][n] += p.dt * out.v[c][n];
  cofactor(out.eta);
  out.tau = identity_map(g.layer());
  for (int a = 0; a < 2; ++a)
    for (int q = 0; q < ls; ++q) out.tau.disp[a][q] = out.eta.disp[a][g.nz * ls + q];
  out.t = t1;
  out.step = state.step + 1;

  if (report) {
    StepReport& rp = *report;
    rp.iterations = its;
    rp.residual = rel;
    Eigen::VectorXd Ax;
    A.apply_volume(x, Ax);
    double div2 = 0.0, pw = 0.0;
    for (int c = 0; c < g.cells(); ++c) {
      div2 += vol * div[c] * div[c];
      pw += vol * q0_tilde[c] * div[c];
    }
    rp.penalty = p.dt * div2 / p.theta;
    rp.viscous = p.dt * x.dot(Ax) - rp.penalty;
    rp.divergence_l2 = std::sqrt(div2);
    rp.pressure_work = p.dt * pw;
    double kd = 0.0;
    if (p.kappa > 0.0) {
      const Vec3Field top = top_layer(g, out.v);
      for (int c = 0; c < 3; ++c) {
        const Field l = I.D.lap0(top[c]);
        kd += dot(l, l);
      }
    }
    rp.kappa_dissipation = p.dt * p.kappa * area * kd;
    double fw = 0.0;
    for (int n = ls; n < g.size(); ++n) {
      const Vec3 f = F(fz.eta_bar.position(n), t1);
      for (int c = 0; c < 3; ++c) fw += I.mass[n] * f[c] * out.v[c][n];
    }
    rp.forcing_work = p.dt * fw;
  }
  return out;
}

Field advance_height(const ReferenceSurface& s, const Field& h, const TangentialMap& tau,
                     const Vec3Field& v_boundary, double dt, Backend backend, InterpMethod m) {
  check_same(s.grid, h, "advance_height");
  for (const auto& c : v_boundary) check_same(s.grid, c, "boundary velocity");
  const Diff D(s.grid, backend);
  const Field h1 = D.d(h, 0), h2 = D.d(h, 1);
  const Resampler R(s.grid, inverse_points(tau, chart_nodes(s.grid), m), m);
  const Field v1 = R(v_boundary[0]), v2 = R(v_boundary[1]), v3 = R(v_boundary[2]);
  Field out(h.size());
  for (size_t q = 0; q < h.size(); ++q) out[q] = h[q] + dt * (v3[q] - h1[q] * v1[q] - h2[q] * v2[q]);
  check_graph(s, out);
  return out;
}

double boundary_traction_residual(const FluidState& state, const ReferenceSurface& s,
                                  const FluidParams& p) {
  const Grid3& g = state.eta.grid;
  check_slab(g, s);
  const int ls = g.layer_size();
  const auto a = cofactor(state.eta);
  const auto Dv = deformation(state.v, a);
  // Fluid side per top column: cell-centred stress of the two top layers
  // extrapolated linearly to the face (one layer only when nz == 1).
  Vec3Field cellt = zero_vec(ls);
  auto traction = [&](int c) {
    const Mat3 S = p.nu * Dv[c] - state.q[c] * Mat3::Identity();
    return (S * a.a[c].row(2).transpose()).eval();
  };
  for (int r = 0; r < ls; ++r) {
    const int c = (g.nz - 1) * ls + r;
    const Vec3 t = g.nz > 1 ? (1.5 * traction(c) - 0.5 * traction(c - ls)).eval() : traction(c);
    for (int d = 0; d < 3; ++d) cellt[d][r] = t[d];
  }
  const Grid2 lg = g.layer();
  const Diff D(s.grid, p.backend);
  const Field L = shell_operator_L(s, state.h, p.shell, D);
  const Field hx = D.d(state.h, 0), hy = D.d(state.h, 1);
  const Resampler R(s.grid, state.tau.points(), p.interp);
  const Field Lt = R(L), hxt = R(hx), hyt = R(hy);
  const Field Th = theta_factor(s, state.h, state.tau, D, p.interp).via_jacobian;
  double worst = 0.0;
  for (int i = 0; i < g.n1; ++i)
    for (int j = 0; j < g.n2; ++j) {
      const int r = lg.idx(i, j);
      const double n[3] = {-hxt[r], -hyt[r], 1.0};
      for (int d = 0; d < 3; ++d) {
        const double fluid = 0.25 * (cellt[d][lg.idx(i, j)] + cellt[d][lg.idx(i - 1, j)] +
                                     cellt[d][lg.idx(i, j - 1)] + cellt[d][lg.idx(i - 1, j - 1)]);
        const double shell = -p.shell.sigma * Th[r] * Lt[r] * n[d];
        worst = std::max(worst, std::abs(fluid - shell));
      }
    }
  return worst;
}

double kinetic_energy(const FluidState& state) {
  const Field m = nodal_mass(state.eta.grid);
  double e = 0.0;
  for (int c = 0; c < 3; ++c)
    for (size_t n = 0; n < m.size(); ++n) e += 0.5 * m[n] * state.v[c][n] * state.v[c][n];
  return e;
}

double elastic_energy(const ReferenceSurface& s, const Field& h, const FluidParams& p) {
  const Field hm = surface_mollify(s, h, surface_spec(p.eps1, p.mollifier_order));
  const Diff D(s.grid, p.backend);
  return willmore_energy(s, hm, p.shell, D) + membrane_energy(s, hm, p.shell, D);
}

}  // namespace shellflow
