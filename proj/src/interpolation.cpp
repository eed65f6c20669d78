#include "shellflow/interpolation.hpp"

#include <cmath>
#include <numbers>

#include "shellflow/errors.hpp"

namespace shellflow {

const char* interp_name(InterpMethod m) {
  return m == InterpMethod::Trigonometric ? "trigonometric" : "cubic";
}

InterpMethod parse_interp(const std::string& s) {
  if (s == "trigonometric" || s == "trig") return InterpMethod::Trigonometric;
  if (s == "cubic") return InterpMethod::Cubic;
  throw Error(ErrorKind::Config, "unknown interpolation method '" + s + "'");
}

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Phase factors exp(i k y) for every stored mode along one axis, with the
// Nyquist mode replaced by cos(k y). Derivative factors go to dphase.
void phases(int n, double L, double y, bool half, std::vector<cplx>& phase,
            std::vector<cplx>* dphase) {
  const int count = half ? n / 2 + 1 : n;
  phase.resize(count);
  if (dphase) dphase->resize(count);
  for (int m = 0; m < count; ++m) {
    const int mode = half ? m : (m <= n / 2 ? m : m - n);
    const double k = kTwoPi * mode / L;
    if (n % 2 == 0 && m == n / 2) {
      phase[m] = std::cos(k * y);
      if (dphase) (*dphase)[m] = -k * std::sin(k * y);
    } else {
      phase[m] = std::polar(1.0, k * y);
      if (dphase) (*dphase)[m] = cplx(0.0, k) * phase[m];
    }
  }
}

// Weight of half-spectrum column c in a real synthesis.
double column_weight(int n2, int c) {
  return (c == 0 || (n2 % 2 == 0 && c == n2 / 2)) ? 1.0 : 2.0;
}

double synth(const std::vector<cplx>& c, int n1, int nc, int n2, const std::vector<cplx>& e1,
             const std::vector<cplx>& e2) {
  double s = 0.0;
  for (int m = 0; m < n1; ++m) {
    cplx row = 0.0;
    for (int q = 0; q < nc; ++q) row += column_weight(n2, q) * c[m * nc + q] * e2[q];
    s += (row * e1[m]).real();
  }
  return s;
}

struct Stencil {
  int i0;
  std::array<double, 4> w, dw;
};

Stencil cubic_stencil(double y, double h) {
  const double s = y / h;
  const double fl = std::floor(s);
  const double t = s - fl;
  Stencil st;
  st.i0 = static_cast<int>(fl) - 1;
  st.w = {-t * (t - 1) * (t - 2) / 6, (t + 1) * (t - 1) * (t - 2) / 2,
          -(t + 1) * t * (t - 2) / 2, (t + 1) * t * (t - 1) / 6};
  st.dw = {-(3 * t * t - 6 * t + 2) / 6 / h, (3 * t * t - 4 * t - 1) / 2 / h,
           -(3 * t * t - 2 * t - 2) / 2 / h, (3 * t * t - 1) / 6 / h};
  return st;
}

}  // namespace

Interpolant::Interpolant(const Grid2& g, const Field& f, InterpMethod m) : g_(g), m_(m) {
  check_same(g, f, "interpolated field");
  if (m == InterpMethod::Trigonometric) {
    c_ = fft_for(g.n1, g.n2)->forward(f);
    const double s = 1.0 / g.size();
    for (auto& x : c_) x *= s;
  } else {
    f_ = f;
  }
}

ValueGrad Interpolant::eval(double y1, double y2, bool with_grad) const {
  ValueGrad out;
  if (m_ == InterpMethod::Trigonometric) {
    std::vector<cplx> e1, e2, d1, d2;
    phases(g_.n1, g_.L1, y1, false, e1, with_grad ? &d1 : nullptr);
    phases(g_.n2, g_.L2, y2, true, e2, with_grad ? &d2 : nullptr);
    const int nc = g_.n2 / 2 + 1;
    out.value = synth(c_, g_.n1, nc, g_.n2, e1, e2);
    if (with_grad) {
      out.grad[0] = synth(c_, g_.n1, nc, g_.n2, d1, e2);
      out.grad[1] = synth(c_, g_.n1, nc, g_.n2, e1, d2);
    }
    return out;
  }
  const Stencil a = cubic_stencil(y1, g_.h1()), b = cubic_stencil(y2, g_.h2());
  for (int p = 0; p < 4; ++p)
    for (int q = 0; q < 4; ++q) {
      const double v = f_[g_.idx(a.i0 + p, b.i0 + q)];
      out.value += a.w[p] * b.w[q] * v;
      if (with_grad) {
        out.grad[0] += a.dw[p] * b.w[q] * v;
        out.grad[1] += a.w[p] * b.dw[q] * v;
      }
    }
  return out;
}

InterpolantSet::InterpolantSet(const Grid2& g, const std::vector<Field>& fs, InterpMethod m)
    : g_(g), m_(m) {
  for (const Field& f : fs) check_same(g, f, "interpolated field");
  if (m == InterpMethod::Cubic) {
    parts_ = fs;
    return;
  }
  const double s = 1.0 / g.size();
  for (const Field& f : fs) {
    c_.push_back(fft_for(g.n1, g.n2)->forward(f));
    for (auto& x : c_.back()) x *= s;
    parts_.emplace_back();
  }
}

void InterpolantSet::eval(double y1, double y2, std::vector<ValueGrad>& out, bool with_grad) const {
  out.assign(parts_.size(), ValueGrad{});
  if (m_ == InterpMethod::Trigonometric) {
    std::vector<cplx> e1, e2, d1, d2;
    phases(g_.n1, g_.L1, y1, false, e1, with_grad ? &d1 : nullptr);
    phases(g_.n2, g_.L2, y2, true, e2, with_grad ? &d2 : nullptr);
    const int nc = g_.n2 / 2 + 1;
    for (size_t i = 0; i < c_.size(); ++i) {
      out[i].value = synth(c_[i], g_.n1, nc, g_.n2, e1, e2);
      if (with_grad) {
        out[i].grad[0] = synth(c_[i], g_.n1, nc, g_.n2, d1, e2);
        out[i].grad[1] = synth(c_[i], g_.n1, nc, g_.n2, e1, d2);
      }
    }
    return;
  }
  const Stencil a = cubic_stencil(y1, g_.h1()), b = cubic_stencil(y2, g_.h2());
  for (int p = 0; p < 4; ++p)
    for (int q = 0; q < 4; ++q) {
      const int k = g_.idx(a.i0 + p, b.i0 + q);
      for (size_t i = 0; i < parts_.size(); ++i) {
        const double v = parts_[i][k];
        out[i].value += a.w[p] * b.w[q] * v;
        if (with_grad) {
          out[i].grad[0] += a.dw[p] * b.w[q] * v;
          out[i].grad[1] += a.w[p] * b.dw[q] * v;
        }
      }
    }
}

Resampler::Resampler(const Grid2& g, std::vector<std::array<double, 2>> points, InterpMethod m)
    : g_(g), m_(m), pts_(std::move(points)) {
  const int np = size();
  if (m == InterpMethod::Trigonometric) {
    const int nc = g.n2 / 2 + 1;
    e1_.resize(static_cast<size_t>(np) * g.n1);
    e2_.resize(static_cast<size_t>(np) * nc);
    std::vector<cplx> a, b;
    for (int p = 0; p < np; ++p) {
      phases(g.n1, g.L1, pts_[p][0], false, a, nullptr);
      phases(g.n2, g.L2, pts_[p][1], true, b, nullptr);
      for (int q = 0; q < nc; ++q) b[q] *= column_weight(g.n2, q);
      std::copy(a.begin(), a.end(), e1_.begin() + static_cast<size_t>(p) * g.n1);
      std::copy(b.begin(), b.end(), e2_.begin() + static_cast<size_t>(p) * nc);
    }
  } else {
    idx_.resize(static_cast<size_t>(np) * 16);
    w_.resize(static_cast<size_t>(np) * 16);
    for (int p = 0; p < np; ++p) {
      const Stencil a = cubic_stencil(pts_[p][0], g.h1()), b = cubic_stencil(pts_[p][1], g.h2());
      for (int r = 0; r < 4; ++r)
        for (int q = 0; q < 4; ++q) {
          idx_[p * 16 + r * 4 + q] = g.idx(a.i0 + r, b.i0 + q);
          w_[p * 16 + r * 4 + q] = a.w[r] * b.w[q];
        }
    }
  }
}

Field Resampler::operator()(const Field& f) const {
  check_same(g_, f, "resampled field");
  const int np = size();
  Field out(np, 0.0);
  if (m_ == InterpMethod::Trigonometric) {
    auto c = fft_for(g_.n1, g_.n2)->forward(f);
    const double s = 1.0 / g_.size();
    const int nc = g_.n2 / 2 + 1;
    for (int p = 0; p < np; ++p) {
      const cplx* a = &e1_[static_cast<size_t>(p) * g_.n1];
      const cplx* b = &e2_[static_cast<size_t>(p) * nc];
      double acc = 0.0;
      for (int m = 0; m < g_.n1; ++m) {
        cplx row = 0.0;
        const cplx* cm = &c[static_cast<size_t>(m) * nc];
        for (int q = 0; q < nc; ++q) row += cm[q] * b[q];
        acc += (row * a[m]).real();
      }
      out[p] = s * acc;
    }
    return out;
  }
  for (int p = 0; p < np; ++p) {
    double acc = 0.0;
    for (int r = 0; r < 16; ++r) acc += w_[p * 16 + r] * f[idx_[p * 16 + r]];
    out[p] = acc;
  }
  return out;
}

Field Resampler::adjoint(const Field& values) const {
  if (m_ != InterpMethod::Cubic)
    throw Error(ErrorKind::Config, "resampling adjoint requires cubic interpolation");
  if (static_cast<int>(values.size()) != size())
    throw Error(ErrorKind::Shape, "resampling adjoint: value count mismatch");
  Field out(g_.size(), 0.0);
  for (int p = 0; p < size(); ++p)
    for (int r = 0; r < 16; ++r) out[idx_[p * 16 + r]] += w_[p * 16 + r] * values[p];
  return out;
}

}  // namespace shellflow
