#pragma once

#include <cmath>
#include <numbers>
#include <random>

#include "shellflow/grid.hpp"

namespace testutil {

using shellflow::Field;
using shellflow::Grid2;
constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Random trigonometric polynomial with modes |m| <= maxmode and coefficient
// decay 1/(1+|m|^2), scaled to max-amplitude amp.
inline Field random_smooth(const Grid2& g, int maxmode, double amp, std::mt19937_64& rng) {
  std::normal_distribution<double> N(0.0, 1.0);
  Field f(g.size(), 0.0);
  for (int m1 = -maxmode; m1 <= maxmode; ++m1)
    for (int m2 = 0; m2 <= maxmode; ++m2) {
      if (m1 == 0 && m2 == 0) continue;
      const double a = N(rng) / (1.0 + m1 * m1 + m2 * m2), b = N(rng) / (1.0 + m1 * m1 + m2 * m2);
      for (int i = 0; i < g.n1; ++i)
        for (int j = 0; j < g.n2; ++j) {
          const double ph = kTwoPi * (m1 * g.y1(i) / g.L1 + m2 * g.y2(j) / g.L2);
          f[g.idx(i, j)] += a * std::cos(ph) + b * std::sin(ph);
        }
    }
  double mx = 0.0;
  for (double x : f) mx = std::max(mx, std::abs(x));
  for (double& x : f) x *= amp / mx;
  return f;
}

inline double max_abs(const Field& f) {
  double m = 0.0;
  for (double x : f) m = std::max(m, std::abs(x));
  return m;
}

inline double max_diff(const Field& a, const Field& b) {
  double m = 0.0;
  for (size_t k = 0; k < a.size(); ++k) m = std::max(m, std::abs(a[k] - b[k]));
  return m;
}

inline double slope(double e_coarse, double e_fine, double ratio = 2.0) {
  return std::log(e_coarse / e_fine) / std::log(ratio);
}

// Reference graph z = f(y) with closed-form derivatives.
struct WavyGraph {
  double a = 0.03, b = 0.01;
  double f(double x, double y) const {
    return a * std::sin(kTwoPi * x) * std::cos(kTwoPi * y) + b * std::cos(2 * kTwoPi * y);
  }
  double fx(double x, double y) const {
    return a * kTwoPi * std::cos(kTwoPi * x) * std::cos(kTwoPi * y);
  }
  double fy(double x, double y) const {
    return -a * kTwoPi * std::sin(kTwoPi * x) * std::sin(kTwoPi * y) -
           b * 2 * kTwoPi * std::sin(2 * kTwoPi * y);
  }
};

}  // namespace testutil
