#pragma once

// Shell curvature formulas written once over a scalar algebra S. S is either
// a nodal grid field (derivatives from a Diff backend) or a pointwise Taylor
// jet. Symmetric 2x2 quantities are stored as {xx, xy, yy}.

#include <array>

namespace shellflow::core {

template <class S>
using Sym = std::array<S, 3>;

inline int sidx(int a, int b) { return a + b; }

template <class S>
S sdet(const Sym<S>& m) {
  return m[0] * m[2] - m[1] * m[1];
}

template <class S>
Sym<S> sinv(const Sym<S>& m, const S& det) {
  const S r = 1.0 / det;
  return {m[2] * r, -(m[1] * r), m[0] * r};
}

// m^{-1}-weighted quantities: w = m v.
template <class S>
std::array<S, 2> smul(const Sym<S>& m, const std::array<S, 2>& v) {
  return {m[0] * v[0] + m[1] * v[1], m[1] * v[0] + m[2] * v[1]};
}

template <class S>
S strace_prod(const Sym<S>& a, const Sym<S>& b) {
  return a[0] * b[0] + 2.0 * (a[1] * b[1]) + a[2] * b[2];
}

template <class S>
struct Terms {
  S J, detG, sqrt_det_ind;
  std::array<S, 2> hx, w;
  Sym<S> hxx, G, Gi, Gind, Gind_i;
  std::array<S, 3> n;
  S H, H_div, K, lapH, L;
};

// g0, C, P: reference metric, second fundamental form, C g0^-1 C.
// d(f, a) and dd(f, a, b) must be found by argument dependent lookup.
template <class S>
Terms<S> shell_terms(const Sym<S>& g0, const Sym<S>& C, const Sym<S>& P, const S& h,
                     double gamma_over_sigma, bool with_L) {
  Terms<S> t;
  t.hx = {d(h, 0), d(h, 1)};
  t.hxx = {dd(h, 0, 0), dd(h, 0, 1), dd(h, 1, 1)};
  const S h2 = h * h;
  for (int c = 0; c < 3; ++c) t.G[c] = g0[c] - 2.0 * (h * C[c]) + h2 * P[c];
  Sym<S> Gz;
  for (int c = 0; c < 3; ++c) Gz[c] = -2.0 * C[c] + 2.0 * (h * P[c]);
  std::array<Sym<S>, 2> Gy;
  for (int a = 0; a < 2; ++a)
    for (int c = 0; c < 3; ++c)
      Gy[a][c] = d(g0[c], a) - 2.0 * (h * d(C[c], a)) + h2 * d(P[c], a);
  t.detG = sdet(t.G);
  t.Gi = sinv(t.G, t.detG);
  t.w = smul(t.Gi, t.hx);
  const S J2 = 1.0 + (t.hx[0] * t.w[0] + t.hx[1] * t.w[1]);
  t.J = sqrt(J2);
  const S Jinv = 1.0 / t.J;
  t.n = {-(Jinv * t.w[0]), -(Jinv * t.w[1]), Jinv};
  t.Gind = {t.G[0] + t.hx[0] * t.hx[0], t.G[1] + t.hx[0] * t.hx[1], t.G[2] + t.hx[1] * t.hx[1]};
  const S J2inv = 1.0 / J2;
  t.Gind_i = {t.Gi[0] - J2inv * (t.w[0] * t.w[0]), t.Gi[1] - J2inv * (t.w[0] * t.w[1]),
              t.Gi[2] - J2inv * (t.w[1] * t.w[1])};
  t.sqrt_det_ind = sqrt(t.detG) * t.J;

  // Christoffel symbols of diag(G_z, 1) at z = h, index 2 meaning z.
  // low[d][a][b] = (d_a G_bd + d_b G_ad - d_d G_ab) / 2.
  auto Gy_at = [&](int a, int b, int c) -> const S& { return Gy[a][sidx(b, c)]; };
  S gam[2][2][2];  // Gamma^g_ab
  {
    S low[2][2][2];
    for (int dl = 0; dl < 2; ++dl)
      for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b)
          low[dl][a][b] = 0.5 * (Gy_at(a, b, dl) + Gy_at(b, a, dl) - Gy_at(dl, a, b));
    for (int g = 0; g < 2; ++g)
      for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b)
          gam[g][a][b] = t.Gi[sidx(g, 0)] * low[0][a][b] + t.Gi[sidx(g, 1)] * low[1][a][b];
  }
  S gz3[2][2];  // Gamma^z_ab
  S g3[2][2];   // Gamma^g_{a z}
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b) {
      gz3[a][b] = -0.5 * Gz[sidx(a, b)];
      g3[a][b] = 0.5 * (t.Gi[sidx(a, 0)] * Gz[sidx(0, b)] + t.Gi[sidx(a, 1)] * Gz[sidx(1, b)]);
    }
  // Second fundamental form of graph(h): b_ab = J^-1 (h_ab + T^z_ab - h_g T^g_ab)
  // where T^k_ab = Gamma^k_ij phi_a^i phi_b^j and phi_a = d_a + h_a d_z.
  Sym<S> bform;
  for (int a = 0; a < 2; ++a)
    for (int b = a; b < 2; ++b) {
      const S Tz = gz3[a][b];
      S Tg[2];
      for (int g = 0; g < 2; ++g) Tg[g] = gam[g][a][b] + t.hx[b] * g3[g][a] + t.hx[a] * g3[g][b];
      bform[sidx(a, b)] =
          Jinv * (t.hxx[sidx(a, b)] + Tz - (t.hx[0] * Tg[0] + t.hx[1] * Tg[1]));
    }
  t.H = -strace_prod(t.Gind_i, bform);
  t.K = sdet(bform) / (t.detG * J2);

  // Divergence form: -(J^-1 w^d)_,d + J^-1 (-w^d Gamma^j_jd + Gamma^j_jz) + d_z J.
  {
    const S tz = 0.5 * strace_prod(t.Gi, Gz);
    const S ty0 = 0.5 * strace_prod(t.Gi, Gy[0]);
    const S ty1 = 0.5 * strace_prod(t.Gi, Gy[1]);
    const S wGzw = Gz[0] * (t.w[0] * t.w[0]) + 2.0 * (Gz[1] * (t.w[0] * t.w[1])) +
                   Gz[2] * (t.w[1] * t.w[1]);
    const S dzJ = -0.5 * (Jinv * wGzw);
    t.H_div = -(d(Jinv * t.w[0], 0) + d(Jinv * t.w[1], 1)) +
              Jinv * (tz - (t.w[0] * ty0 + t.w[1] * ty1)) + dzJ;
  }

  if (with_L) {
    const std::array<S, 2> Hx = {d(t.H, 0), d(t.H, 1)};
    const std::array<S, 2> q = smul(t.Gind_i, Hx);
    t.lapH = (d(t.sqrt_det_ind * q[0], 0) + d(t.sqrt_det_ind * q[1], 1)) / t.sqrt_det_ind;
    const S H2 = t.H * t.H;
    t.L = -t.lapH - 0.5 * (H2 * t.H) + 2.0 * (t.H * t.K) + gamma_over_sigma * t.H;
  }
  return t;
}

// (1/sqrt g0) d_cd (sqrt g0 * factor * (Gi F Gi)^{cd}) with F_ab = d_ab f.
template <class S>
S principal_term(const S& sqrt_g0, const S& factor, const Sym<S>& Gi, const S& f) {
  const Sym<S> F = {dd(f, 0, 0), dd(f, 0, 1), dd(f, 1, 1)};
  // (Gi F Gi) for symmetric 2x2 matrices.
  const S a0 = Gi[0] * F[0] + Gi[1] * F[1];
  const S a1 = Gi[0] * F[1] + Gi[1] * F[2];
  const S b0 = Gi[1] * F[0] + Gi[2] * F[1];
  const S b1 = Gi[1] * F[1] + Gi[2] * F[2];
  const S w = sqrt_g0 * factor;
  const S s00 = w * (a0 * Gi[0] + a1 * Gi[1]);
  const S s01 = w * (a0 * Gi[1] + a1 * Gi[2]);
  const S s11 = w * (b0 * Gi[1] + b1 * Gi[2]);
  return (dd(s00, 0, 0) + 2.0 * dd(s01, 0, 1) + dd(s11, 1, 1)) / sqrt_g0;
}

}  // namespace shellflow::core
