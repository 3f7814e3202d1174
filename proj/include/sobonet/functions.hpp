#pragma once

// Registry of built-in analytic test functions with exact derivatives:
//   sin1     d=1  sin(2 pi x)
//   sincos2  d=2  sin(2 pi x1) cos(2 pi x2)
//   gauss1   d=1  exp(-4 (x - 1/2)^2)
//   linear1  d=1  2 x - 1/3
//   poly1    d=1  x^3 - x + 1/2
// Each entry supplies every derivative in closed form, so the smoothness
// contracts of DifferentiableFunction hold at any requested order. Norm
// bounds are analytic for the trigonometric entries and a padded dense scan
// over the evaluation domain [-1, 2]^d otherwise.

#include <cmath>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "multiindex.hpp"
#include "network.hpp"
#include "taylor.hpp"

namespace sobonet {

namespace detail {

// k-th derivative of sin(w t): w^k sin(w t + k pi/2), taken mod 4 to avoid
// evaluating shifted arguments.
inline double sine_derivative(double w, unsigned k, double t) {
  const double scale = std::pow(w, static_cast<double>(k));
  switch (k % 4) {
    case 0: return scale * std::sin(w * t);
    case 1: return scale * std::cos(w * t);
    case 2: return -scale * std::sin(w * t);
    default: return -scale * std::cos(w * t);
  }
}

inline double cosine_derivative(double w, unsigned k, double t) {
  const double scale = std::pow(w, static_cast<double>(k));
  switch (k % 4) {
    case 0: return scale * std::cos(w * t);
    case 1: return -scale * std::sin(w * t);
    case 2: return -scale * std::cos(w * t);
    default: return scale * std::sin(w * t);
  }
}

// k-th derivative of exp(-a t^2) via the polynomial recurrence
// p_{k+1} = p_k' - 2 a t p_k starting from p_0 = 1.
inline double gaussian_derivative(double a, unsigned k, double t) {
  std::vector<double> p{1.0};
  for (unsigned j = 0; j < k; ++j) {
    std::vector<double> next(p.size() + 1, 0.0);
    for (std::size_t i = 1; i < p.size(); ++i)
      next[i - 1] += static_cast<double>(i) * p[i];
    for (std::size_t i = 0; i < p.size(); ++i) next[i + 1] -= 2.0 * a * p[i];
    p = std::move(next);
  }
  double val = 0.0;
  for (std::size_t i = p.size(); i-- > 0;) val = val * t + p[i];
  return val * std::exp(-a * t * t);
}

// Padded scan of max_{k <= n} sup_{[-1,2]} |f^(k)| on a uniform grid; the 2%
// pad absorbs the gap between grid max and true sup for these smooth entries.
inline double scanned_norm_bound(unsigned n, double (*deriv)(unsigned, double)) {
  double best = 0.0;
  const int res = 6000;
  for (unsigned k = 0; k <= n; ++k)
    for (int i = 0; i <= res; ++i) {
      const double x = -1.0 + 3.0 * static_cast<double>(i) / res;
      best = std::max(best, std::abs(deriv(k, x)));
    }
  return 1.02 * best;
}

}  // namespace detail

// Builds the named test function with smoothness order n (n >= 1); its
// norm_bound covers W^{n,inf} on the evaluation domain.
inline DifferentiableFunction make_function(const std::string& name, unsigned n) {
  if (n < 1) throw NetworkError("make_function: order must be >= 1");
  const double two_pi = 2.0 * std::numbers::pi;
  DifferentiableFunction f;
  f.order = n;
  if (name == "sin1") {
    f.dimension = 1;
    f.norm_bound = std::pow(two_pi, static_cast<double>(n));
    f.derivative = [two_pi](const MultiIndex& alpha, std::span<const double> x) {
      return detail::sine_derivative(two_pi, alpha[0], x[0]);
    };
    return f;
  }
  if (name == "sincos2") {
    f.dimension = 2;
    f.norm_bound = std::pow(two_pi, static_cast<double>(n));
    f.derivative = [two_pi](const MultiIndex& alpha, std::span<const double> x) {
      return detail::sine_derivative(two_pi, alpha[0], x[0]) *
             detail::cosine_derivative(two_pi, alpha[1], x[1]);
    };
    return f;
  }
  if (name == "gauss1") {
    f.dimension = 1;
    f.norm_bound = detail::scanned_norm_bound(
        n, [](unsigned k, double x) {
          return detail::gaussian_derivative(4.0, k, x - 0.5);
        });
    f.derivative = [](const MultiIndex& alpha, std::span<const double> x) {
      return detail::gaussian_derivative(4.0, alpha[0], x[0] - 0.5);
    };
    return f;
  }
  if (name == "linear1") {
    f.dimension = 1;
    f.norm_bound = 11.0 / 3.0;  // max(|f(-1)|, |f(2)|, |f'|) on [-1, 2]
    f.derivative = [](const MultiIndex& alpha, std::span<const double> x) {
      if (alpha[0] == 0) return 2.0 * x[0] - 1.0 / 3.0;
      if (alpha[0] == 1) return 2.0;
      return 0.0;
    };
    return f;
  }
  if (name == "poly1") {
    f.dimension = 1;
    f.norm_bound = detail::scanned_norm_bound(n, [](unsigned k, double x) {
      switch (k) {
        case 0: return x * x * x - x + 0.5;
        case 1: return 3.0 * x * x - 1.0;
        case 2: return 6.0 * x;
        case 3: return 6.0;
        default: return 0.0;
      }
    });
    f.derivative = [](const MultiIndex& alpha, std::span<const double> x) {
      switch (alpha[0]) {
        case 0: return x[0] * x[0] * x[0] - x[0] + 0.5;
        case 1: return 3.0 * x[0] * x[0] - 1.0;
        case 2: return 6.0 * x[0];
        case 3: return 6.0;
        default: return 0.0;
      }
    };
    return f;
  }
  throw NetworkError("make_function: unknown function '" + name + "'");
}

inline std::vector<std::string> function_names() {
  return {"sin1", "sincos2", "gauss1", "linear1", "poly1"};
}

}  // namespace sobonet
