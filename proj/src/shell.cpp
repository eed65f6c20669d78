#include "shellflow/shell.hpp"

#include <cmath>
#include <numbers>

#include "shell_core.hpp"
#include "shellflow/errors.hpp"

namespace shellflow {

namespace gf {

// Nodal field with the algebra needed by the shell formulas.
struct GField {
  const Diff* D = nullptr;
  Field v;
};

inline GField lift(const Diff& D, Field v) { return {&D, std::move(v)}; }

template <class Op>
GField zip(const GField& a, const GField& b, Op op) {
  GField out{a.D ? a.D : b.D, Field(a.v.size())};
  for (size_t k = 0; k < a.v.size(); ++k) out.v[k] = op(a.v[k], b.v[k]);
  return out;
}
template <class Op>
GField map(const GField& a, Op op) {
  GField out{a.D, Field(a.v.size())};
  for (size_t k = 0; k < a.v.size(); ++k) out.v[k] = op(a.v[k]);
  return out;
}

inline GField operator+(const GField& a, const GField& b) { return zip(a, b, std::plus<>()); }
inline GField operator-(const GField& a, const GField& b) { return zip(a, b, std::minus<>()); }
inline GField operator*(const GField& a, const GField& b) { return zip(a, b, std::multiplies<>()); }
inline GField operator/(const GField& a, const GField& b) { return zip(a, b, std::divides<>()); }
inline GField operator-(const GField& a) { return map(a, [](double x) { return -x; }); }
inline GField operator*(double s, const GField& a) { return map(a, [s](double x) { return s * x; }); }
inline GField operator*(const GField& a, double s) { return s * a; }
inline GField operator+(double s, const GField& a) { return map(a, [s](double x) { return s + x; }); }
inline GField operator+(const GField& a, double s) { return s + a; }
inline GField operator-(const GField& a, double s) { return map(a, [s](double x) { return x - s; }); }
inline GField operator/(double s, const GField& a) { return map(a, [s](double x) { return s / x; }); }
inline GField sqrt(const GField& a) { return map(a, [](double x) { return std::sqrt(x); }); }
inline GField d(const GField& a, int k) { return {a.D, a.D->d(a.v, k)}; }
inline GField dd(const GField& a, int k, int l) { return {a.D, a.D->dd(a.v, k, l)}; }

}  // namespace gf

inline Jet d(const Jet& a, int k) { return a.derivative(k); }
inline Jet dd(const Jet& a, int k, int l) { return a.derivative(k).derivative(l); }

void validate(const ShellParams& p) {
  if (!(p.sigma > 0.0)) throw Error(ErrorKind::Config, "shell sigma must be positive");
  if (!(p.gamma >= 0.0)) throw Error(ErrorKind::Config, "shell gamma must be nonnegative");
  if (!(p.thickness > 0.0)) throw Error(ErrorKind::Config, "shell thickness must be positive");
}

void check_graph(const ReferenceSurface& s, const Field& h) {
  check_same(s.grid, h, "height field");
  for (int k = 0; k < s.grid.size(); ++k)
    if (!(std::abs(h[k]) < s.thickness_eps))
      throw Error(ErrorKind::GraphViolation,
                  "height leaves the tubular neighborhood at node (" + std::to_string(k / s.grid.n2) +
                      "," + std::to_string(k % s.grid.n2) + ")");
}

namespace {

using core::Sym;

Sym<gf::GField> lift_sym(const Diff& D, const SymField& f) {
  return {gf::lift(D, f.xx), gf::lift(D, f.xy), gf::lift(D, f.yy)};
}

SymField to_sym(const Sym<gf::GField>& s) {
  SymField out;
  out.xx = s[0].v;
  out.xy = s[1].v;
  out.yy = s[2].v;
  return out;
}

core::Terms<gf::GField> grid_terms(const ReferenceSurface& s, const Field& h,
                                   const ShellParams& p, const Diff& D, bool with_L) {
  if (!(D.grid() == s.grid)) throw Error(ErrorKind::Shape, "shell: derivative grid mismatch");
  check_graph(s, h);
  const auto g0 = lift_sym(D, s.g0), C = lift_sym(D, s.C), P = lift_sym(D, s.P);
  auto t = core::shell_terms(g0, C, P, gf::lift(D, h), p.gamma / p.sigma, with_L);
  for (int k = 0; k < s.grid.size(); ++k)
    if (!(t.detG.v[k] > 0.0) || !std::isfinite(t.J.v[k]))
      throw Error(ErrorKind::Degeneracy, "shell metric degenerates at node " + std::to_string(k));
  return t;
}

Field sqrt_g0(const ReferenceSurface& s) {
  Field out(s.grid.size());
  for (int k = 0; k < s.grid.size(); ++k)
    out[k] = std::sqrt(s.g0.xx[k] * s.g0.yy[k] - s.g0.xy[k] * s.g0.xy[k]);
  return out;
}

}  // namespace

ShellGeometry shell_geometry(const ReferenceSurface& s, const Field& h, const ShellParams& p,
                             const Diff& D) {
  validate(p);
  auto t = grid_terms(s, h, p, D, true);
  ShellGeometry g;
  g.J = t.J.v;
  for (int c = 0; c < 3; ++c) g.n[c] = t.n[c].v;
  g.G = make_metric(s.grid, to_sym(t.G), "shell_geometry");
  g.induced = make_metric(s.grid, to_sym(t.Gind), "shell_geometry");
  g.hx = {t.hx[0].v, t.hx[1].v};
  g.hxx = to_sym(t.hxx);
  g.H = t.H.v;
  g.H_div = t.H_div.v;
  g.K = t.K.v;
  g.lapH = t.lapH.v;
  g.L = t.L.v;
  return g;
}

Field jacobian_Jh(const ReferenceSurface& s, const Field& h, const Diff& D) {
  return grid_terms(s, h, ShellParams{}, D, false).J.v;
}

std::array<Field, 3> unit_normal(const ReferenceSurface& s, const Field& h, const Diff& D) {
  auto t = grid_terms(s, h, ShellParams{}, D, false);
  return {t.n[0].v, t.n[1].v, t.n[2].v};
}

Field mean_curvature(const ReferenceSurface& s, const Field& h, CurvatureForm form,
                     const Diff& D) {
  auto t = grid_terms(s, h, ShellParams{}, D, false);
  return form == CurvatureForm::Divergence ? t.H_div.v : t.H.v;
}

Field gauss_curvature(const ReferenceSurface& s, const Field& h, const Diff& D) {
  return grid_terms(s, h, ShellParams{}, D, false).K.v;
}

double BendingTensorField::at(int node, int a, int b, int c, int d) const {
  const Mat2 Gi = induced_inverse.at(node);
  return factor[node] * Gi(a, c) * Gi(b, d);
}

double BendingTensorField::contract(int node, const Mat2& F) const {
  const Mat2 Gi = induced_inverse.at(node);
  return factor[node] * (Gi * F * Gi).cwiseProduct(F).sum();
}

BendingTensorField bending_tensor_A(const ReferenceSurface& s, const Field& h, bool linearized,
                                    const Diff& D) {
  auto t = grid_terms(s, h, ShellParams{}, D, false);
  BendingTensorField A;
  A.grid = s.grid;
  A.induced_inverse = to_sym(t.Gind_i);
  A.factor.resize(s.grid.size());
  const Field sg0 = sqrt_g0(s);
  for (int k = 0; k < s.grid.size(); ++k) {
    A.factor[k] = 1.0 / t.J.v[k];
    if (linearized) A.factor[k] *= std::sqrt(t.detG.v[k]) / sg0[k];
  }
  return A;
}

Field shell_operator_L(const ReferenceSurface& s, const Field& h, const ShellParams& p,
                       const Diff& D) {
  validate(p);
  return grid_terms(s, h, p, D, true).L.v;
}

Field principal_operator(const BendingTensorField& A, const ReferenceSurface& s, const Field& f,
                         const Diff& D) {
  const Sym<gf::GField> Gi = lift_sym(D, A.induced_inverse);
  return core::principal_term(gf::lift(D, sqrt_g0(s)), gf::lift(D, A.factor), Gi,
                              gf::lift(D, f))
      .v;
}

LinearizedShellOperator::LinearizedShellOperator(const ReferenceSurface& s, const Field& hbar,
                                                 const Diff& D)
    : s_(&s), D_(D), A_(bending_tensor_A(s, hbar, true, D)) {}

Field LinearizedShellOperator::apply(const Field& f) const {
  return principal_operator(A_, *s_, f, D_);
}

Field linearized_operator(const ReferenceSurface& s, const Field& hbar, const Field& f,
                          const Diff& D) {
  return LinearizedShellOperator(s, hbar, D).apply(f);
}

Field linearized_remainder(const ReferenceSurface& s, const Field& hbar, const ShellParams& p,
                           const Diff& D) {
  validate(p);
  auto t = grid_terms(s, hbar, p, D, true);
  const Field lin = linearized_operator(s, hbar, hbar, D);
  const Field sg0 = sqrt_g0(s);
  Field out(s.grid.size());
  for (int k = 0; k < s.grid.size(); ++k)
    out[k] = std::sqrt(t.detG.v[k]) / sg0[k] * t.L.v[k] - lin[k];
  return out;
}

std::array<Field, 3> membrane_traction(const ReferenceSurface& s, const Field& h,
                                       const ShellParams& p, const Diff& D) {
  auto t = grid_terms(s, h, p, D, false);
  std::array<Field, 3> out;
  for (int c = 0; c < 3; ++c) {
    out[c].resize(s.grid.size());
    for (int k = 0; k < s.grid.size(); ++k) out[c][k] = -p.gamma * t.H.v[k] * t.n[c].v[k];
  }
  return out;
}

std::array<Field, 3> bending_traction(const ReferenceSurface& s, const Field& h,
                                      const ShellParams& p, const Diff& D) {
  auto t = grid_terms(s, h, p, D, true);
  std::array<Field, 3> out;
  for (int c = 0; c < 3; ++c) {
    out[c].resize(s.grid.size());
    for (int k = 0; k < s.grid.size(); ++k) {
      const double Hk = t.H.v[k];
      const double bend = -t.lapH.v[k] - 0.5 * Hk * Hk * Hk + 2.0 * Hk * t.K.v[k];
      out[c][k] = -p.sigma * bend * t.n[c].v[k];
    }
  }
  return out;
}

double willmore_energy(const ReferenceSurface& s, const Field& h, const ShellParams& p,
                       const Diff& D) {
  auto t = grid_terms(s, h, p, D, false);
  double e = 0.0;
  for (int k = 0; k < s.grid.size(); ++k)
    e += (0.5 * p.sigma * t.H.v[k] * t.H.v[k] - p.sigma_K * t.K.v[k]) * t.sqrt_det_ind.v[k];
  return e * s.grid.cell_area();
}

double graph_area(const ReferenceSurface& s, const Field& h, const Diff& D) {
  auto t = grid_terms(s, h, ShellParams{}, D, false);
  double a = 0.0;
  for (double x : t.sqrt_det_ind.v) a += x;
  return a * s.grid.cell_area();
}

double membrane_energy(const ReferenceSurface& s, const Field& h, const ShellParams& p,
                       const Diff& D) {
  return p.gamma * graph_area(s, h, D);
}

Field partial_field(const Diff& D, const Field& f, int a, int b) {
  if (D.backend() == Backend::Spectral)
    return apply_symbol(D.grid(), f, [&](double k1, double k2, bool ny) {
      if (ny && a + b > 0) return cplx(0.0);
      return std::pow(cplx(0.0, k1), a) * std::pow(cplx(0.0, k2), b);
    });
  Field out = f;
  for (int m = 0; m < a / 2; ++m) out = D.dd(out, 0, 0);
  if (a % 2) out = D.d(out, 0);
  for (int m = 0; m < b / 2; ++m) out = D.dd(out, 1, 1);
  if (b % 2) out = D.d(out, 1);
  return out;
}

Jet field_jet(const Diff& D, const Field& f, int node) {
  Jet j;
  for (int dgr = 0; dgr <= Jet::kMaxDeg; ++dgr)
    for (int b = 0; b <= dgr; ++b) j.set_partial(dgr - b, b, partial_field(D, f, dgr - b, b)[node]);
  return j;
}

ReferenceJets reference_jets(const ReferenceSurface& s, int node, const Diff& D) {
  ReferenceJets r;
  const SymField* src[3] = {&s.g0, &s.C, &s.P};
  std::array<Jet, 3>* dst[3] = {&r.g0, &r.C, &r.P};
  for (int q = 0; q < 3; ++q) {
    (*dst[q])[0] = field_jet(D, src[q]->xx, node);
    (*dst[q])[1] = field_jet(D, src[q]->xy, node);
    (*dst[q])[2] = field_jet(D, src[q]->yy, node);
  }
  return r;
}

PointShell shell_at_point(const ReferenceJets& r, const Jet& h, const ShellParams& p) {
  validate(p);
  auto t = core::shell_terms<Jet>(r.g0, r.C, r.P, h, p.gamma / p.sigma, true);
  PointShell out;
  out.J = t.J.value();
  for (int c = 0; c < 3; ++c) out.n[c] = t.n[c].value();
  out.H = t.H.value();
  out.H_div = t.H_div.value();
  out.K = t.K.value();
  out.lapH = t.lapH.value();
  out.L = t.L.value();
  const Jet sg0 = sqrt(core::sdet(r.g0));
  out.principal = core::principal_term<Jet>(sg0, 1.0 / t.J, t.Gind_i, h).value();
  return out;
}

ShellSplit shell_split_at_point(const ReferenceJets& r, const Jet& h, const ShellParams& p) {
  const PointShell base = shell_at_point(r, h, p);
  ShellSplit out;
  out.L = base.L;
  out.principal = base.principal;
  const double rest = base.L - base.principal;
  // The remainder is affine in the third partials; unit probes recover the
  // coefficients exactly up to rounding.
  double lin = 0.0;
  for (int m = 0; m < 4; ++m) {
    const int a = 3 - m, b = m;
    Jet probe = h;
    probe.set_partial(a, b, h.partial(a, b) + 1.0);
    const PointShell q = shell_at_point(r, probe, p);
    out.L1[m] = (q.L - q.principal) - rest;
    lin += out.L1[m] * h.partial(a, b);
  }
  out.L2 = rest - lin;
  return out;
}

}  // namespace shellflow
