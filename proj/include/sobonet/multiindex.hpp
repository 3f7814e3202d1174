#pragma once

// Multi-index utilities shared by the polynomial and quadrature code.

#include <cstddef>
#include <vector>

namespace sobonet {

using MultiIndex = std::vector<unsigned>;
using GridIndex = std::vector<unsigned>;

inline unsigned order(const MultiIndex& alpha) {
  unsigned s = 0;
  for (unsigned a : alpha) s += a;
  return s;
}

// Exact in double up to 22!; factorials used here never exceed order 12.
inline double factorial(unsigned k) {
  double f = 1.0;
  for (unsigned i = 2; i <= k; ++i) f *= i;
  return f;
}

inline double binomial(unsigned n, unsigned k) {
  if (k > n) return 0.0;
  double b = 1.0;
  for (unsigned i = 0; i < k; ++i) b = b * (n - i) / (i + 1);
  // Products of integers interleaved with exact divisions: rounds only beyond
  // 2^53, far above any binomial used here.
  return b;
}

inline double multi_factorial(const MultiIndex& alpha) {
  double f = 1.0;
  for (unsigned a : alpha) f *= factorial(a);
  return f;
}

template <typename Point>
double monomial_value(const Point& x, const MultiIndex& alpha) {
  double v = 1.0;
  for (std::size_t i = 0; i < alpha.size(); ++i)
    for (unsigned k = 0; k < alpha[i]; ++k) v *= x[i];
  return v;
}

// All alpha in d dimensions with |alpha| <= max_order, in lexicographic order.
inline std::vector<MultiIndex> multi_indices_up_to(std::size_t d, unsigned max_order) {
  std::vector<MultiIndex> result;
  if (d == 0) return {MultiIndex{}};
  MultiIndex current(d, 0);
  while (true) {
    if (order(current) <= max_order) result.push_back(current);
    std::size_t pos = d;
    while (pos > 0) {
      --pos;
      if (current[pos] < max_order) {
        ++current[pos];
        for (std::size_t j = pos + 1; j < d; ++j) current[j] = 0;
        break;
      }
      if (pos == 0) return result;
    }
  }
}

}  // namespace sobonet
