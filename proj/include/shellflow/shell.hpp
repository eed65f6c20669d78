#pragma once

#include <array>

#include "shellflow/geometry.hpp"
#include "shellflow/jet.hpp"

namespace shellflow {

// Energy E = sigma * int H^2/2 dS - sigma_K * int K dS + gamma * area, with H
// the trace of the shape operator (H = div n, positive on a dome under the
// upward normal). Its L2(dS) gradient under normal motion is sigma * L.
struct ShellParams {
  double sigma = 1.0;
  double gamma = 0.0;
  double sigma_K = 0.0;
  double thickness = 1.0;
  // Coercivity is asserted only while the discrete H2 norm of h stays below
  // smallness * thickness.
  double smallness = 0.1;
};

void validate(const ShellParams& p);

// Checks |h| < thickness of the tubular neighborhood at every node.
void check_graph(const ReferenceSurface& s, const Field& h);

// Pointwise quantities of graph(h), all on the chart nodes. The normal n is
// given in the tubular frame (dy1, dy2, dz).
struct ShellGeometry {
  Field J;
  std::array<Field, 3> n;
  MetricField G;        // G_h
  MetricField induced;  // G_h + grad h grad h^T
  std::array<Field, 2> hx;
  SymField hxx;
  Field H;      // quasilinear form
  Field H_div;  // divergence form
  Field K;
  Field lapH;   // Laplace-Beltrami of H in the induced metric
  Field L;      // -lapH - H^3/2 + 2HK + (gamma/sigma) H
};

ShellGeometry shell_geometry(const ReferenceSurface& s, const Field& h, const ShellParams& p,
                             const Diff& D);

Field jacobian_Jh(const ReferenceSurface& s, const Field& h, const Diff& D);
std::array<Field, 3> unit_normal(const ReferenceSurface& s, const Field& h, const Diff& D);

enum class CurvatureForm { Divergence, Quasilinear };
Field mean_curvature(const ReferenceSurface& s, const Field& h, CurvatureForm form, const Diff& D);
Field gauss_curvature(const ReferenceSurface& s, const Field& h, const Diff& D);

// A^{abcd} = J^-1 Gi^{ac} Gi^{bd} with Gi the inverse induced metric. The
// linearized tensor carries the extra factor sqrt(det G_h)/sqrt(det g0).
struct BendingTensorField {
  Grid2 grid;
  Field factor;
  SymField induced_inverse;
  double at(int node, int a, int b, int c, int d) const;
  // Quadratic form density A^{abcd} F_ab F_cd for a symmetric F.
  double contract(int node, const Mat2& F) const;
};

BendingTensorField bending_tensor_A(const ReferenceSurface& s, const Field& h, bool linearized,
                                    const Diff& D);

Field shell_operator_L(const ReferenceSurface& s, const Field& h, const ShellParams& p,
                       const Diff& D);

// (1/sqrt g0) d_cd (sqrt g0 A^{abcd} d_ab f) with the tensor A.
Field principal_operator(const BendingTensorField& A, const ReferenceSurface& s, const Field& f,
                         const Diff& D);

// The frozen-coefficient fourth order operator about hbar. It is symmetric in
// the sqrt(g0)-weighted nodal inner product.
class LinearizedShellOperator {
 public:
  LinearizedShellOperator(const ReferenceSurface& s, const Field& hbar, const Diff& D);
  Field apply(const Field& f) const;
  const BendingTensorField& tensor() const { return A_; }

 private:
  const ReferenceSurface* s_;
  Diff D_;
  BendingTensorField A_;
};

Field linearized_operator(const ReferenceSurface& s, const Field& hbar, const Field& f,
                          const Diff& D);

// Remainder M(hbar) = (sqrt det G_hbar / sqrt g0) L(hbar) - Lin_hbar(hbar).
Field linearized_remainder(const ReferenceSurface& s, const Field& hbar, const ShellParams& p,
                           const Diff& D);

// Tubular-frame traction vectors exerted by the shell on the fluid.
std::array<Field, 3> membrane_traction(const ReferenceSurface& s, const Field& h,
                                       const ShellParams& p, const Diff& D);
std::array<Field, 3> bending_traction(const ReferenceSurface& s, const Field& h,
                                      const ShellParams& p, const Diff& D);

double willmore_energy(const ReferenceSurface& s, const Field& h, const ShellParams& p,
                       const Diff& D);
double membrane_energy(const ReferenceSurface& s, const Field& h, const ShellParams& p,
                       const Diff& D);
double graph_area(const ReferenceSurface& s, const Field& h, const Diff& D);

// Pointwise evaluation from Taylor jets: reference fields and h expanded to
// fourth order about one chart point.
struct ReferenceJets {
  std::array<Jet, 3> g0, C, P;
};

Field partial_field(const Diff& D, const Field& f, int a, int b);
ReferenceJets reference_jets(const ReferenceSurface& s, int node, const Diff& D);
Jet field_jet(const Diff& D, const Field& f, int node);

struct PointShell {
  double J = 1, H = 0, H_div = 0, K = 0, lapH = 0, L = 0, principal = 0;
  std::array<double, 3> n{0.0, 0.0, 1.0};
};
PointShell shell_at_point(const ReferenceJets& r, const Jet& h, const ShellParams& p);

// L = principal + sum L1^{abc} h_abc + L2 where the third-derivative
// coefficients are indexed by (number of y1 derivatives) 3, 2, 1, 0.
struct ShellSplit {
  double L = 0, principal = 0;
  std::array<double, 4> L1{};
  double L2 = 0;
};
ShellSplit shell_split_at_point(const ReferenceJets& r, const Jet& h, const ShellParams& p);

}  // namespace shellflow
