#pragma once

#include <array>
#include <cmath>

namespace shellflow {

// Truncated bivariate Taylor polynomial sum c_ab x^a y^b, a+b <= deg <= 4.
// Products keep the smaller degree; differentiation lowers it by one.
class Jet {
 public:
  static constexpr int kMaxDeg = 4;
  static constexpr int kSize = 15;

  Jet() { c_.fill(0.0); }
  explicit Jet(double v, int deg = kMaxDeg) : deg_(deg) {
    c_.fill(0.0);
    c_[0] = v;
  }

  static int index(int a, int b) {
    const int d = a + b;
    return d * (d + 1) / 2 + b;
  }
  int deg() const { return deg_; }
  double value() const { return c_[0]; }
  double coef(int a, int b) const { return c_[index(a, b)]; }
  void set_coef(int a, int b, double v) { c_[index(a, b)] = v; }
  // Partial derivative d^(a+b) / dx^a dy^b at the expansion point.
  double partial(int a, int b) const { return coef(a, b) * fact(a) * fact(b); }
  void set_partial(int a, int b, double v) { set_coef(a, b, v / (fact(a) * fact(b))); }

  // The coordinate function x (var 0) or y (var 1) around value v.
  static Jet coordinate(int var, double v) {
    Jet j(v);
    j.set_coef(var == 0 ? 1 : 0, var == 0 ? 0 : 1, 1.0);
    return j;
  }

  Jet derivative(int var) const {
    Jet out;
    out.deg_ = deg_ > 0 ? deg_ - 1 : 0;
    for (int d = 0; d < deg_; ++d)
      for (int b = 0; b <= d; ++b) {
        const int a = d - b;
        out.c_[index(a, b)] = var == 0 ? (a + 1) * coef(a + 1, b) : (b + 1) * coef(a, b + 1);
      }
    if (deg_ == 0) out.c_[0] = 0.0;
    return out;
  }

  Jet& operator+=(const Jet& o) {
    deg_ = std::min(deg_, o.deg_);
    for (int k = 0; k < kSize; ++k) c_[k] += o.c_[k];
    truncate();
    return *this;
  }
  Jet& operator-=(const Jet& o) {
    deg_ = std::min(deg_, o.deg_);
    for (int k = 0; k < kSize; ++k) c_[k] -= o.c_[k];
    truncate();
    return *this;
  }
  Jet& operator*=(double s) {
    for (double& x : c_) x *= s;
    return *this;
  }
  friend Jet operator+(Jet a, const Jet& b) { return a += b; }
  friend Jet operator-(Jet a, const Jet& b) { return a -= b; }
  friend Jet operator-(Jet a) { return a *= -1.0; }
  friend Jet operator*(Jet a, double s) { return a *= s; }
  friend Jet operator*(double s, Jet a) { return a *= s; }
  friend Jet operator+(Jet a, double s) {
    a.c_[0] += s;
    return a;
  }
  friend Jet operator+(double s, Jet a) { return a + s; }
  friend Jet operator-(Jet a, double s) { return a + (-s); }
  friend Jet operator-(double s, const Jet& a) { return (-a) + s; }

  friend Jet operator*(const Jet& a, const Jet& b) {
    Jet out;
    out.deg_ = std::min(a.deg_, b.deg_);
    for (int d1 = 0; d1 <= out.deg_; ++d1)
      for (int b1 = 0; b1 <= d1; ++b1) {
        const double x = a.coef(d1 - b1, b1);
        if (x == 0.0) continue;
        for (int d2 = 0; d1 + d2 <= out.deg_; ++d2)
          for (int b2 = 0; b2 <= d2; ++b2)
            out.c_[index(d1 - b1 + d2 - b2, b1 + b2)] += x * b.coef(d2 - b2, b2);
      }
    return out;
  }
  friend Jet operator/(const Jet& a, const Jet& b) { return a * b.reciprocal(); }
  friend Jet operator/(double s, const Jet& b) { return s * b.reciprocal(); }
  friend Jet operator/(Jet a, double s) { return a *= 1.0 / s; }

  // f(a) with a = a0 + e expanded as sum_n f^(n)(a0)/n! e^n.
  Jet compose(const std::array<double, kMaxDeg + 1>& taylor) const {
    Jet e = *this;
    e.c_[0] = 0.0;
    Jet out(taylor[0], deg_);
    Jet pw(1.0, deg_);
    for (int n = 1; n <= deg_; ++n) {
      pw = pw * e;
      out += taylor[n] * pw;
    }
    return out;
  }
  Jet reciprocal() const {
    const double a = c_[0];
    std::array<double, kMaxDeg + 1> t{};
    double p = 1.0 / a;
    for (int n = 0; n <= kMaxDeg; ++n) {
      t[n] = p;
      p *= -1.0 / a;
    }
    return compose(t);
  }
  friend Jet sqrt(const Jet& x) {
    const double a = x.c_[0];
    std::array<double, kMaxDeg + 1> t{};
    double coef = 1.0;  // binomial(1/2, n)
    for (int n = 0; n <= kMaxDeg; ++n) {
      t[n] = coef * std::sqrt(a) / std::pow(a, n);
      coef *= (0.5 - n) / (n + 1);
    }
    return x.compose(t);
  }

 private:
  static double fact(int n) {
    double f = 1.0;
    for (int k = 2; k <= n; ++k) f *= k;
    return f;
  }
  void truncate() {
    for (int d = deg_ + 1; d <= kMaxDeg; ++d)
      for (int b = 0; b <= d; ++b) c_[index(d - b, b)] = 0.0;
  }

  std::array<double, kSize> c_;
  int deg_ = kMaxDeg;
};

}  // namespace shellflow
