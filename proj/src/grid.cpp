#include "shellflow/grid.hpp"

#include <fftw3.h>

#include <cmath>
#include <cstring>
#include <map>
#include <numbers>

#include "shellflow/errors.hpp"

namespace shellflow {

Field Grid2::sample(const std::function<double(double, double)>& f) const {
  Field out(size());
  for (int i = 0; i < n1; ++i)
    for (int j = 0; j < n2; ++j) out[idx(i, j)] = f(y1(i), y2(j));
  return out;
}

void check_same(const Grid2& g, const Field& f, const char* what) {
  if (static_cast<int>(f.size()) != g.size())
    throw Error(ErrorKind::Shape, std::string("field size mismatch in ") + what);
}

Fft2::Fft2(int n1, int n2) : n1_(n1), n2_(n2) {
  rbuf_ = fftw_alloc_real(static_cast<size_t>(n1) * n2);
  auto* c = fftw_alloc_complex(static_cast<size_t>(n1) * (n2 / 2 + 1));
  cbuf_ = c;
  plan_f_ = fftw_plan_dft_r2c_2d(n1, n2, rbuf_, c, FFTW_ESTIMATE);
  plan_b_ = fftw_plan_dft_c2r_2d(n1, n2, c, rbuf_, FFTW_ESTIMATE);
}

Fft2::~Fft2() {
  fftw_destroy_plan(static_cast<fftw_plan>(plan_f_));
  fftw_destroy_plan(static_cast<fftw_plan>(plan_b_));
  fftw_free(rbuf_);
  fftw_free(cbuf_);
}

std::vector<cplx> Fft2::forward(const Field& f) const {
  std::memcpy(rbuf_, f.data(), sizeof(double) * f.size());
  fftw_execute(static_cast<fftw_plan>(plan_f_));
  std::vector<cplx> out(spec_size());
  std::memcpy(out.data(), cbuf_, sizeof(cplx) * out.size());
  return out;
}

Field Fft2::inverse(const std::vector<cplx>& F) const {
  std::memcpy(cbuf_, F.data(), sizeof(cplx) * F.size());
  fftw_execute(static_cast<fftw_plan>(plan_b_));
  Field out(static_cast<size_t>(n1_) * n2_);
  const double s = 1.0 / (static_cast<double>(n1_) * n2_);
  for (size_t k = 0; k < out.size(); ++k) out[k] = rbuf_[k] * s;
  return out;
}

std::shared_ptr<Fft2> fft_for(int n1, int n2) {
  static std::map<std::pair<int, int>, std::shared_ptr<Fft2>> cache;
  auto& slot = cache[{n1, n2}];
  if (!slot) slot = std::make_shared<Fft2>(n1, n2);
  return slot;
}

Field apply_symbol(const Grid2& g, const Field& f,
                   const std::function<cplx(double, double, bool)>& symbol) {
  check_same(g, f, "apply_symbol");
  auto fft = fft_for(g.n1, g.n2);
  auto F = fft->forward(f);
  const double tp = 2.0 * std::numbers::pi;
  const int nc = fft->nc();
  for (int m = 0; m < g.n1; ++m) {
    const double k1 = tp * fft->mode1(m) / g.L1;
    for (int c = 0; c < nc; ++c) {
      const double k2 = tp * c / g.L2;
      F[m * nc + c] *= symbol(k1, k2, fft->nyquist(m, c));
    }
  }
  return fft->inverse(F);
}

const char* backend_name(Backend b) {
  return b == Backend::Spectral ? "spectral" : "fd";
}

Backend parse_backend(const std::string& s) {
  if (s == "spectral") return Backend::Spectral;
  if (s == "fd") return Backend::FiniteDifference;
  throw Error(ErrorKind::Config, "unknown derivative backend '" + s + "'");
}

Diff::Diff(const Grid2& g, Backend b) : g_(g), b_(b) {}

cplx Diff::symbol_d(double k1, double k2, int a) const {
  const double k = a == 0 ? k1 : k2;
  if (b_ == Backend::Spectral) return {0.0, k};
  const double h = a == 0 ? g_.h1() : g_.h2();
  return {0.0, std::sin(k * h) / h};
}

double Diff::symbol_dd(double k1, double k2, int a, int b) const {
  const double ka = a == 0 ? k1 : k2;
  if (b_ == Backend::Spectral) return -ka * (b == 0 ? k1 : k2);
  if (a != b) return (symbol_d(k1, k2, a) * symbol_d(k1, k2, b)).real();
  const double h = a == 0 ? g_.h1() : g_.h2();
  const double s = std::sin(0.5 * ka * h);
  return -4.0 * s * s / (h * h);
}

Field Diff::d(const Field& f, int a) const {
  check_same(g_, f, "Diff::d");
  if (b_ == Backend::Spectral)
    return apply_symbol(g_, f, [&](double k1, double k2, bool ny) {
      return ny ? cplx(0.0) : symbol_d(k1, k2, a);
    });
  Field out(f.size());
  const double s = 0.5 / (a == 0 ? g_.h1() : g_.h2());
  for (int i = 0; i < g_.n1; ++i)
    for (int j = 0; j < g_.n2; ++j) {
      const int p = a == 0 ? g_.idx(i + 1, j) : g_.idx(i, j + 1);
      const int m = a == 0 ? g_.idx(i - 1, j) : g_.idx(i, j - 1);
      out[g_.idx(i, j)] = s * (f[p] - f[m]);
    }
  return out;
}

Field Diff::dd(const Field& f, int a, int b) const {
  check_same(g_, f, "Diff::dd");
  if (b_ == Backend::Spectral)
    return apply_symbol(g_, f, [&](double k1, double k2, bool ny) {
      return ny ? cplx(0.0) : cplx(symbol_dd(k1, k2, a, b));
    });
  if (a != b) return d(d(f, a), b);
  Field out(f.size());
  const double h = a == 0 ? g_.h1() : g_.h2();
  const double s = 1.0 / (h * h);
  for (int i = 0; i < g_.n1; ++i)
    for (int j = 0; j < g_.n2; ++j) {
      const int p = a == 0 ? g_.idx(i + 1, j) : g_.idx(i, j + 1);
      const int m = a == 0 ? g_.idx(i - 1, j) : g_.idx(i, j - 1);
      const int c = g_.idx(i, j);
      out[c] = s * (f[p] - 2.0 * f[c] + f[m]);
    }
  return out;
}

Field Diff::lap0(const Field& f) const {
  Field a = dd(f, 0, 0);
  Field b = dd(f, 1, 1);
  for (size_t k = 0; k < a.size(); ++k) a[k] += b[k];
  return a;
}

double dot(const Field& a, const Field& b) {
  double s = 0.0;
  for (size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
  return s;
}

double norm2(const Field& a) { return std::sqrt(dot(a, a)); }

}  // namespace shellflow
