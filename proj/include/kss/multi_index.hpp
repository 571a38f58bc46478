#pragma once

#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "kss/errors.hpp"

namespace kss {

// A multi-index j = (j_1, ..., j_m) of nonnegative integers.
using MultiIndex = std::vector<int>;

inline int degree(const MultiIndex& j) { return std::accumulate(j.begin(), j.end(), 0); }

inline double log_factorial(int n) { return std::lgamma(static_cast<double>(n) + 1.0); }

inline std::uint64_t factorial_u64(int n) {
  require(n >= 0 && n <= 20, "factorial_u64: n out of exact range [0,20]");
  std::uint64_t f = 1;
  for (int k = 2; k <= n; ++k) f *= static_cast<std::uint64_t>(k);
  return f;
}

inline double log_choose(int n, int k) {
  if (k < 0 || k > n) return -INFINITY;
  return log_factorial(n) - log_factorial(k) - log_factorial(n - k);
}

// log of d! / (j_1! ... j_m! (d - |j|)!).
inline double log_multinomial_variance(int d, const MultiIndex& j) {
  int total = 0;
  double lv = log_factorial(d);
  for (int e : j) {
    if (e < 0) throw InvalidIndexError("multi-index has a negative entry");
    total += e;
    lv -= log_factorial(e);
  }
  if (total > d) throw InvalidIndexError("multi-index degree " + std::to_string(total) + " exceeds d=" + std::to_string(d));
  return lv - log_factorial(d - total);
}

// Var(a_j) = d! / (j_1! ... j_m! (d-|j|)!). Exact integer arithmetic for
// d <= 20, one exponential of a log-space sum beyond.
inline double multinomial_variance(int d, const MultiIndex& j) {
  const double lv = log_multinomial_variance(d, j);  // validates j
  if (d <= 20) {
    std::uint64_t v = factorial_u64(d);
    int total = 0;
    for (int e : j) {
      v /= factorial_u64(e);
      total += e;
    }
    return static_cast<double>(v / factorial_u64(d - total));
  }
  return std::exp(lv);
}

// All affine multi-indices j in N^m with |j| <= d, in lexicographic order.
inline std::vector<MultiIndex> enumerate_affine_indices(int m, int d) {
  require(m >= 1 && d >= 0, "enumerate_affine_indices: need m >= 1, d >= 0");
  std::vector<MultiIndex> out;
  MultiIndex cur(m, 0);
  auto rec = [&](auto&& self, int pos, int budget) -> void {
    if (pos == m) {
      out.push_back(cur);
      return;
    }
    for (int e = 0; e <= budget; ++e) {
      cur[pos] = e;
      self(self, pos + 1, budget - e);
    }
  };
  rec(rec, 0, d);
  return out;
}

// All multi-indices in N^n with |j| == q, lexicographic.
inline std::vector<MultiIndex> enumerate_exact_degree(int n, int q) {
  std::vector<MultiIndex> out;
  if (n == 0) {
    if (q == 0) out.emplace_back();
    return out;
  }
  MultiIndex cur(n, 0);
  auto rec = [&](auto&& self, int pos, int budget) -> void {
    if (pos == n - 1) {
      cur[pos] = budget;
      out.push_back(cur);
      return;
    }
    for (int e = 0; e <= budget; ++e) {
      cur[pos] = e;
      self(self, pos + 1, budget - e);
    }
  };
  rec(rec, 0, q);
  return out;
}

// prod_k j_k!
inline double index_factorial(const MultiIndex& j) {
  double f = 1.0;
  for (int e : j)
    for (int k = 2; k <= e; ++k) f *= k;
  return f;
}

}  // namespace kss
