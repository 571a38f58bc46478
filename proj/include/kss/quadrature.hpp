#pragma once

#include <cmath>
#include <numbers>
#include <vector>

#include "kss/errors.hpp"

namespace kss {

struct QuadratureRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

// n-point Gauss-Legendre rule on [-1, 1] (Newton iteration on P_n).
inline QuadratureRule gauss_legendre(int n) {
  require(n >= 1, "gauss_legendre: n must be positive");
  QuadratureRule rule;
  rule.nodes.resize(n);
  rule.weights.resize(n);
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      if (n == 1) p0 = 1.0;
      const double pn = n == 1 ? x : p1;
      dp = n * (x * pn - p0) / (x * x - 1.0);
      const double dx = pn / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    rule.nodes[i] = -x;
    rule.nodes[n - 1 - i] = x;
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    rule.weights[i] = w;
    rule.weights[n - 1 - i] = w;
  }
  return rule;
}

// Composite rule: `panels` equal panels of a `per_panel`-point Gauss rule on [a, b].
inline QuadratureRule composite_gauss(double a, double b, int panels, int per_panel = 16) {
  require(panels >= 1 && b > a, "composite_gauss: invalid interval or panel count");
  const QuadratureRule base = gauss_legendre(per_panel);
  QuadratureRule out;
  const double h = (b - a) / panels;
  for (int p = 0; p < panels; ++p) {
    const double lo = a + p * h;
    for (int i = 0; i < per_panel; ++i) {
      out.nodes.push_back(lo + 0.5 * h * (base.nodes[i] + 1.0));
      out.weights.push_back(0.5 * h * base.weights[i]);
    }
  }
  return out;
}

template <class F>
double integrate(const QuadratureRule& rule, F&& f) {
  double acc = 0.0;
  for (std::size_t i = 0; i < rule.nodes.size(); ++i) acc += rule.weights[i] * f(rule.nodes[i]);
  return acc;
}

// Surface area of the unit sphere S^m.
inline double kappa(int m) {
  return 2.0 * std::pow(std::numbers::pi, (m + 1) / 2.0) / std::tgamma((m + 1) / 2.0);
}

}  // namespace kss
