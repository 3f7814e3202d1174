#pragma once

// Tensor Gauss-Legendre quadrature over axis-aligned boxes.

#include <algorithm>
#include <boost/math/special_functions/legendre.hpp>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace sobonet {

struct QuadratureRule {
  std::vector<double> nodes;    // on [-1, 1]
  std::vector<double> weights;  // sum to 2
};

// Nodes are the Legendre roots; weights via w = 2 / ((1 - x^2) P_q'(x)^2).
inline QuadratureRule gauss_legendre(unsigned q) {
  if (q < 2) throw std::invalid_argument("gauss_legendre: order must be >= 2");
  QuadratureRule rule;
  const std::vector<double> positive = boost::math::legendre_p_zeros<double>(q);
  std::vector<double> zeros;
  for (double z : positive)
    if (z > 0.0) zeros.push_back(-z);
  std::sort(zeros.begin(), zeros.end());
  if (q % 2 == 1) zeros.push_back(0.0);
  for (double z : positive)
    if (z > 0.0) zeros.push_back(z);
  for (double x : zeros) {
    const double dp = boost::math::legendre_p_prime(static_cast<int>(q), x);
    rule.nodes.push_back(x);
    rule.weights.push_back(2.0 / ((1.0 - x * x) * dp * dp));
  }
  return rule;
}

// Integrates f over the box [lo_i, hi_i]^d with the tensor rule of order q per
// axis. f receives a point as std::vector<double>.
template <typename F>
double integrate_box(F&& f, const std::vector<double>& lo, const std::vector<double>& hi,
                     unsigned q) {
  const std::size_t d = lo.size();
  if (hi.size() != d) throw std::invalid_argument("integrate_box: box dims mismatch");
  const QuadratureRule rule = gauss_legendre(q);
  std::vector<std::size_t> idx(d, 0);
  std::vector<double> x(d);
  double jac = 1.0;
  for (std::size_t i = 0; i < d; ++i) jac *= 0.5 * (hi[i] - lo[i]);
  double sum = 0.0;
  while (true) {
    double w = 1.0;
    for (std::size_t i = 0; i < d; ++i) {
      x[i] = 0.5 * (lo[i] + hi[i]) + 0.5 * (hi[i] - lo[i]) * rule.nodes[idx[i]];
      w *= rule.weights[idx[i]];
    }
    sum += w * f(x);
    std::size_t pos = d;
    bool done = true;
    while (pos > 0) {
      --pos;
      if (++idx[pos] < rule.nodes.size()) {
        done = false;
        break;
      }
      idx[pos] = 0;
    }
    if (done) break;
  }
  return sum * jac;
}

}  // namespace sobonet
