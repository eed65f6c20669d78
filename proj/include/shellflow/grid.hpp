#pragma once

#include <complex>
#include <functional>
#include <memory>
#include <vector>

namespace shellflow {

using Field = std::vector<double>;
using cplx = std::complex<double>;

// Periodic node grid on the chart [0,L1) x [0,L2). Node (i,j) sits at
// (i*L1/n1, j*L2/n2) and is stored at i*n2 + j.
struct Grid2 {
  int n1 = 0;
  int n2 = 0;
  double L1 = 1.0;
  double L2 = 1.0;

  int size() const { return n1 * n2; }
  double h1() const { return L1 / n1; }
  double h2() const { return L2 / n2; }
  double cell_area() const { return h1() * h2(); }
  double y1(int i) const { return i * h1(); }
  double y2(int j) const { return j * h2(); }
  int idx(int i, int j) const {
    i %= n1;
    j %= n2;
    if (i < 0) i += n1;
    if (j < 0) j += n2;
    return i * n2 + j;
  }
  bool operator==(const Grid2& o) const {
    return n1 == o.n1 && n2 == o.n2 && L1 == o.L1 && L2 == o.L2;
  }
  Field sample(const std::function<double(double, double)>& f) const;
};

void check_same(const Grid2& g, const Field& f, const char* what);

// Slab grid: periodic in (x1, x2) like Grid2, nodes k = 0..nz in x3 over
// [0, Lz]. Node (i,j,k) is stored at k*n1*n2 + i*n2 + j, so layer k is laid
// out exactly like a Grid2 field.
struct Grid3 {
  int n1 = 0;
  int n2 = 0;
  int nz = 0;
  double L1 = 1.0;
  double L2 = 1.0;
  double Lz = 1.0;

  Grid2 layer() const { return {n1, n2, L1, L2}; }
  int layer_size() const { return n1 * n2; }
  int size() const { return n1 * n2 * (nz + 1); }
  int cells() const { return n1 * n2 * nz; }
  double h1() const { return L1 / n1; }
  double h2() const { return L2 / n2; }
  double hz() const { return Lz / nz; }
  int idx(int i, int j, int k) const { return k * n1 * n2 + layer().idx(i, j); }
  int cell(int i, int j, int k) const { return k * n1 * n2 + layer().idx(i, j); }
  bool operator==(const Grid3& o) const {
    return n1 == o.n1 && n2 == o.n2 && nz == o.nz && L1 == o.L1 && L2 == o.L2 && Lz == o.Lz;
  }
};

// Real-to-complex 2D transform with owned aligned buffers so repeated
// calls go through identical code paths (bitwise reproducible).
class Fft2 {
 public:
  Fft2(int n1, int n2);
  ~Fft2();
  Fft2(const Fft2&) = delete;
  Fft2& operator=(const Fft2&) = delete;

  int n1() const { return n1_; }
  int n2() const { return n2_; }
  int nc() const { return n2_ / 2 + 1; }
  int spec_size() const { return n1_ * nc(); }

  std::vector<cplx> forward(const Field& f) const;
  // Inverse transform including the 1/(n1 n2) normalization.
  Field inverse(const std::vector<cplx>& F) const;

  // Signed integer mode numbers of spectral entry (m, c).
  int mode1(int m) const { return m <= n1_ / 2 ? m : m - n1_; }
  int mode2(int c) const { return c; }
  bool nyquist(int m, int c) const {
    return (n1_ % 2 == 0 && m == n1_ / 2) || (n2_ % 2 == 0 && c == n2_ / 2);
  }

 private:
  int n1_, n2_;
  double* rbuf_;
  void* cbuf_;
  void* plan_f_;
  void* plan_b_;
};

// Shared transform object per grid size; not thread safe on first use.
std::shared_ptr<Fft2> fft_for(int n1, int n2);

// Multiply the transform of f by symbol(k1, k2, nyquist) and transform back.
Field apply_symbol(const Grid2& g, const Field& f,
                   const std::function<cplx(double, double, bool)>& symbol);

enum class Backend { FiniteDifference, Spectral };
const char* backend_name(Backend b);
Backend parse_backend(const std::string& s);

// Derivative operators on periodic chart fields. Centered second order
// differences or trigonometric differentiation with the Nyquist mode removed.
// All first-derivative operators are skew-adjoint and all second-derivative
// operators self-adjoint in the plain nodal inner product.
class Diff {
 public:
  Diff(const Grid2& g, Backend b);
  const Grid2& grid() const { return g_; }
  Backend backend() const { return b_; }

  Field d(const Field& f, int a) const;
  Field dd(const Field& f, int a, int b) const;
  // Compact five-point flat Laplacian (FD) or trigonometric Laplacian.
  Field lap0(const Field& f) const;

  // Symbols of d and dd for Fourier mode with wavenumbers (k1,k2).
  cplx symbol_d(double k1, double k2, int a) const;
  double symbol_dd(double k1, double k2, int a, int b) const;

 private:
  Grid2 g_;
  Backend b_;
};

double dot(const Field& a, const Field& b);
double norm2(const Field& a);

}  // namespace shellflow
