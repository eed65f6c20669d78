#include "shellflow/diagnostics.hpp"

#include <cmath>
#include <iomanip>
#include <numbers>

#include "shellflow/errors.hpp"

namespace shellflow {

double sobolev_norm(const Grid2& g, const Field& f, double s) {
  check_same(g, f, "sobolev_norm");
  auto fft = fft_for(g.n1, g.n2);
  const auto F = fft->forward(f);
  const int nc = fft->nc();
  const double tp = 2.0 * std::numbers::pi;
  double acc = 0.0;
  for (int m = 0; m < g.n1; ++m) {
    const double k1 = tp * fft->mode1(m) / g.L1;
    for (int c = 0; c < nc; ++c) {
      const double k2 = tp * c / g.L2;
      const double w = (c == 0 || (g.n2 % 2 == 0 && c == g.n2 / 2)) ? 1.0 : 2.0;
      acc += w * std::pow(1.0 + k1 * k1 + k2 * k2, s) * std::norm(F[m * nc + c]);
    }
  }
  return std::sqrt(acc * g.cell_area() / g.size());
}

namespace {

// Centred difference of a nodal slab field along axis d.
Field slab_derivative(const Grid3& g, const Field& f, int d) {
  Field out(f.size());
  const double h = d == 0 ? g.h1() : d == 1 ? g.h2() : g.hz();
  for (int k = 0; k <= g.nz; ++k)
    for (int i = 0; i < g.n1; ++i)
      for (int j = 0; j < g.n2; ++j) {
        double v;
        if (d == 0)
          v = (f[g.idx(i + 1, j, k)] - f[g.idx(i - 1, j, k)]) / (2 * h);
        else if (d == 1)
          v = (f[g.idx(i, j + 1, k)] - f[g.idx(i, j - 1, k)]) / (2 * h);
        else if (k == 0)
          v = (-3 * f[g.idx(i, j, 0)] + 4 * f[g.idx(i, j, 1)] - f[g.idx(i, j, 2)]) / (2 * h);
        else if (k == g.nz)
          v = (3 * f[g.idx(i, j, k)] - 4 * f[g.idx(i, j, k - 1)] + f[g.idx(i, j, k - 2)]) / (2 * h);
        else
          v = (f[g.idx(i, j, k + 1)] - f[g.idx(i, j, k - 1)]) / (2 * h);
        out[g.idx(i, j, k)] = v;
      }
  return out;
}

}  // namespace

namespace {

// Cumulative squared norms up to order kmax.
std::array<double, 4> volume_levels(const Grid3& g, const Vec3Field& v, int kmax) {
  if (kmax < 0 || kmax > 3) throw Error(ErrorKind::Domain, "volume norms are available for k = 0..3");
  if (g.nz < 2) throw Error(ErrorKind::Shape, "volume norms need nz >= 2");
  for (const Field& f : v)
    if (static_cast<int>(f.size()) != g.size()) throw Error(ErrorKind::Shape, "volume field size mismatch");
  const double vol = g.h1() * g.h2() * g.hz();
  auto l2 = [&](const Field& f) {
    double s = 0.0;
    for (int n = 0; n < g.size(); ++n) {
      const int layer = n / g.layer_size();
      const double m = (layer == 0 || layer == g.nz) ? 0.5 * vol : vol;
      s += m * f[n] * f[n];
    }
    return s;
  };
  std::array<double, 4> out{};
  std::vector<Field> level(v.begin(), v.end());
  double total = 0.0;
  for (const Field& f : level) total += l2(f);
  out[0] = total;
  for (int order = 1; order <= kmax; ++order) {
    std::vector<Field> next;
    next.reserve(level.size() * 3);
    for (const Field& f : level)
      for (int d = 0; d < 3; ++d) next.push_back(slab_derivative(g, f, d));
    for (const Field& f : next) total += l2(f);
    out[order] = total;
    level = std::move(next);
  }
  return out;
}

}  // namespace

double volume_sobolev_norm(const Grid3& g, const Vec3Field& v, int k) {
  return std::sqrt(volume_levels(g, v, k)[k]);
}

std::array<double, 4> volume_sobolev_norms(const Grid3& g, const Vec3Field& v) {
  auto s = volume_levels(g, v, 3);
  for (double& x : s) x = std::sqrt(x);
  return s;
}

double elliptic_bilinear(const ReferenceSurface& s, const Field& hbar, const Field& f,
                         const Field& g, const Diff& D) {
  check_same(s.grid, f, "elliptic energy argument");
  check_same(s.grid, g, "elliptic energy argument");
  const BendingTensorField A = bending_tensor_A(s, hbar, true, D);
  const MetricField m0 = make_metric(s.grid, s.g0, "reference metric");
  Field Fd[2][2], Gd[2][2];
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b) {
      Fd[a][b] = D.dd(f, a, b);
      Gd[a][b] = &f == &g ? Fd[a][b] : D.dd(g, a, b);
    }
  double acc = 0.0;
  for (int n = 0; n < s.grid.size(); ++n) {
    double e = 0.0;
    for (int a = 0; a < 2; ++a)
      for (int b = 0; b < 2; ++b)
        for (int c = 0; c < 2; ++c)
          for (int d = 0; d < 2; ++d) e += A.at(n, a, b, c, d) * Fd[a][b][n] * Gd[c][d][n];
    acc += e * m0.sqrt_det[n];
  }
  return acc * s.grid.cell_area();
}

double elliptic_energy(const ReferenceSurface& s, const Field& hbar, const Field& f, const Diff& D) {
  return elliptic_bilinear(s, hbar, f, f, D);
}

double hessian_norm2(const ReferenceSurface& s, const Field& f, const Diff& D) {
  double acc = 0.0;
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b) {
      const Field d = D.dd(f, a, b);
      acc += dot(d, d);
    }
  return acc * s.grid.cell_area();
}

CoercivityReport coercivity(const ReferenceSurface& s, const Field& hbar, const Diff& D, int samples,
                            double threshold, std::mt19937_64& rng) {
  const Grid2& g = s.grid;
  const int mmax = std::max(1, std::min(g.n1, g.n2) / 4);
  std::normal_distribution<double> N(0.0, 1.0);
  CoercivityReport rep;
  rep.nu1 = std::numeric_limits<double>::infinity();
  for (int n = 0; n < samples; ++n) {
    Field f(g.size(), 0.0);
    for (int m1 = -mmax; m1 <= mmax; ++m1)
      for (int m2 = 0; m2 <= mmax; ++m2) {
        if (m1 == 0 && m2 == 0) continue;
        if (m2 == 0 && m1 < 0) continue;
        const double a = N(rng), b = N(rng);
        for (int i = 0; i < g.n1; ++i)
          for (int j = 0; j < g.n2; ++j) {
            const double ph = 2 * std::numbers::pi * (m1 * g.y1(i) / g.L1 + m2 * g.y2(j) / g.L2);
            f[g.idx(i, j)] += a * std::cos(ph) + b * std::sin(ph);
          }
      }
    const double hn = hessian_norm2(s, f, D);
    if (hn == 0.0) continue;
    rep.nu1 = std::min(rep.nu1, elliptic_energy(s, hbar, f, D) / hn);
  }
  rep.violated = rep.nu1 < threshold;
  return rep;
}

void NormAccumulator::add(const NormSample& s, double dt) {
  int_v3_ += s.v_H[3] * s.v_H[3] * dt;
  int_vt1_ += s.vt_H1 * s.vt_H1 * dt;
  int_h55_ += s.h_H55 * s.h_H55 * dt;
  int_ht25_ += s.ht_H25 * s.ht_H25 * dt;
  int_htt05_ += s.htt_H05 * s.htt_H05 * dt;
  sup_v2_ = std::max(sup_v2_, s.v_H[2] * s.v_H[2]);
  sup_h4_ = std::max(sup_h4_, s.h_H4 * s.h_H4);
  sup_ht2_ = std::max(sup_ht2_, s.ht_H2 * s.ht_H2);
}

double NormAccumulator::x_norm2() const {
  return int_v3_ + int_vt1_ + int_h55_ + int_ht25_ + int_htt05_;
}

double NormAccumulator::y_norm2() const { return x_norm2() + sup_v2_ + sup_h4_ + sup_ht2_; }

std::array<double, 8> NormAccumulator::raw() const {
  return {int_v3_, int_vt1_, int_h55_, int_ht25_, int_htt05_, sup_v2_, sup_h4_, sup_ht2_};
}

NormAccumulator NormAccumulator::from_raw(const std::array<double, 8>& r) {
  NormAccumulator a;
  a.int_v3_ = r[0];
  a.int_vt1_ = r[1];
  a.int_h55_ = r[2];
  a.int_ht25_ = r[3];
  a.int_htt05_ = r[4];
  a.sup_v2_ = r[5];
  a.sup_h4_ = r[6];
  a.sup_ht2_ = r[7];
  return a;
}

BallStatus ball_check(const std::vector<NormSample>& history, double dt, double M) {
  NormAccumulator acc;
  for (const NormSample& s : history) {
    acc.add(s, dt);
    if (acc.y_norm2() > M) return {false, s.t};
  }
  return {};
}

EnergyRow energy_state(const FluidState& st, const ReferenceSurface& s, const FluidParams& p) {
  EnergyRow r;
  r.t = st.t;
  r.kinetic = kinetic_energy(st);
  const Field hm = surface_mollify(s, st.h, surface_spec(p.eps1, p.mollifier_order));
  const Diff D(s.grid, p.backend);
  r.bending = willmore_energy(s, hm, p.shell, D);
  r.membrane = membrane_energy(s, hm, p.shell, D);
  r.elastic = r.bending + r.membrane;
  return r;
}

EnergyRow energy_balance(const EnergyRow& before, const FluidState& after, const StepReport& rep,
                         const ReferenceSurface& s, const FluidParams& p) {
  EnergyRow r = energy_state(after, s, p);
  r.viscous = rep.viscous;
  r.kappa = rep.kappa_dissipation;
  r.penalty = rep.penalty;
  r.forcing_work = rep.forcing_work;
  r.pressure_work = rep.pressure_work;
  const double dt = after.t - before.t;
  const double change = r.total() - before.total();
  r.residual = std::abs(change + r.viscous + r.kappa + r.penalty - r.forcing_work - r.pressure_work) / dt;
  return r;
}

bool energy_nonincreasing(const std::vector<EnergyRow>& rows, int skip, double tol) {
  for (size_t n = static_cast<size_t>(std::max(skip, 0)) + 1; n < rows.size(); ++n)
    if (rows[n].total() > rows[n - 1].total() + tol) return false;
  return true;
}

void write_csv(std::ostream& os, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& rows) {
  for (size_t c = 0; c < header.size(); ++c) os << (c ? "," : "") << header[c];
  os << '\n' << std::setprecision(17);
  for (const auto& row : rows) {
    if (row.size() != header.size()) throw Error(ErrorKind::Shape, "csv row width mismatch");
    for (size_t c = 0; c < row.size(); ++c) os << (c ? "," : "") << row[c];
    os << '\n';
  }
}

}  // namespace shellflow
