#pragma once

// Sampled estimators for L^p, W^{1,p}, and fractional Slobodeckij norms on
// [0,1]^d. All grids carry a fixed irrational shift so the dyadic kinks of
// constructed networks are never sampled; p = inf values are sampled lower
// bounds. Deterministic given (seed, budget).

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <random>
#include <string>

#include "evaluate.hpp"
#include "taylor.hpp"

namespace sobonet {

struct NormReport {
  double p = std::numeric_limits<double>::infinity();
  double s = 0.0;
  double value = 0.0;
  std::size_t samples = 0;
  std::uint64_t seed = 0;
  std::string method = "grid";
};

using ScalarFn = std::function<double(std::span<const double>)>;
using GradientFn = std::function<std::vector<double>(std::span<const double>)>;

constexpr double kInfiniteOrder = std::numeric_limits<double>::infinity();
constexpr std::size_t kDefaultNormBudget = 100000;

namespace detail {

// Uniform doubles in [0,1) with the top 53 bits of mt19937_64; bit-stable
// across platforms.
class UniformSampler {
 public:
  explicit UniformSampler(std::uint64_t seed) : eng_(seed) {}
  double next() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

 private:
  std::mt19937_64 eng_;
};

inline double irrational_shift(std::size_t axis) {
  const double v = std::sqrt(2.0) * static_cast<double>(axis + 1);
  return v - std::floor(v);
}

inline std::size_t axis_resolution(std::size_t d, std::size_t budget) {
  if (budget < 2) budget = 2;
  if (d == 1) return budget;
  auto total = [&](std::size_t r) {
    std::size_t t = 1;
    for (std::size_t i = 0; i < d; ++i) t *= r;
    return t;
  };
  std::size_t r = static_cast<std::size_t>(
      std::pow(static_cast<double>(budget), 1.0 / static_cast<double>(d)));
  if (r < 2) r = 2;
  while (total(r + 1) <= budget) ++r;
  return r;
}

// Calls visit(x) for every point of the shifted uniform grid with `r` points
// per axis.
template <typename Visit>
void for_each_grid_point(std::size_t d, std::size_t r, Visit&& visit) {
  std::vector<double> shift(d);
  for (std::size_t i = 0; i < d; ++i) shift[i] = irrational_shift(i);
  std::vector<std::size_t> idx(d, 0);
  std::vector<double> x(d);
  while (true) {
    for (std::size_t i = 0; i < d; ++i)
      x[i] = (static_cast<double>(idx[i]) + shift[i]) / static_cast<double>(r);
    visit(x);
    std::size_t pos = d;
    bool done = true;
    while (pos > 0) {
      --pos;
      if (++idx[pos] < r) {
        done = false;
        break;
      }
      idx[pos] = 0;
    }
    if (done) break;
  }
}

}  // namespace detail

// L^p norm of g on [0,1]^d: midpoint-type rule on the shifted grid for p <
// inf, grid maximum for p = inf.
inline NormReport lp_norm(const ScalarFn& g, std::size_t d, double p,
                          std::size_t resolution = kDefaultNormBudget,
                          std::uint64_t seed = 0) {
  if (!(p >= 1.0)) throw std::invalid_argument("lp_norm: p must be >= 1");
  const std::size_t r = detail::axis_resolution(d, resolution);
  NormReport report;
  report.p = p;
  report.seed = seed;
  report.method = "grid";
  double acc = 0.0;
  std::size_t count = 0;
  detail::for_each_grid_point(d, r, [&](const std::vector<double>& x) {
    const double v = std::abs(g(x));
    if (std::isinf(p))
      acc = std::max(acc, v);
    else
      acc += std::pow(v, p);
    ++count;
  });
  report.samples = count;
  report.value = std::isinf(p) ? acc : std::pow(acc / static_cast<double>(count), 1.0 / p);
  return report;
}

// First-order seminorm: L^p norms of each partial derivative, combined as a
// maximum for p = inf and a p-sum otherwise.
inline NormReport w1p_seminorm(const GradientFn& grad, std::size_t d, double p,
                               std::size_t resolution = kDefaultNormBudget,
                               std::uint64_t seed = 0) {
  if (!(p >= 1.0)) throw std::invalid_argument("w1p_seminorm: p must be >= 1");
  const std::size_t r = detail::axis_resolution(d, resolution);
  NormReport report;
  report.p = p;
  report.s = 1.0;
  report.seed = seed;
  report.method = "grid";
  double max_abs = 0.0;
  std::vector<double> acc(d, 0.0);
  std::size_t count = 0;
  detail::for_each_grid_point(d, r, [&](const std::vector<double>& x) {
    const std::vector<double> gx = grad(x);
    for (std::size_t k = 0; k < d; ++k) {
      const double v = std::abs(gx[k]);
      if (std::isinf(p))
        max_abs = std::max(max_abs, v);
      else
        acc[k] += std::pow(v, p);
    }
    ++count;
  });
  report.samples = count;
  if (std::isinf(p)) {
    report.value = max_abs;
  } else {
    double sum = 0.0;
    for (double a : acc) sum += a / static_cast<double>(count);
    report.value = std::pow(sum, 1.0 / p);
  }
  return report;
}

// Fractional Slobodeckij seminorm of order s in (0,1). For p = inf the
// estimator maximizes the Hoelder quotient over stratified pairs (half
// near-diagonal at log-uniform separations, half independent); for p < inf it
// Monte Carlo integrates the double integral over independent pairs.
inline NormReport slobodeckij_seminorm(const ScalarFn& g, std::size_t d, double s,
                                       double p, std::size_t pairs = kDefaultNormBudget,
                                       std::uint64_t seed = 0) {
  if (!(s > 0.0 && s < 1.0))
    throw std::invalid_argument("slobodeckij_seminorm: s must lie in (0,1)");
  if (!(p >= 1.0)) throw std::invalid_argument("slobodeckij_seminorm: p must be >= 1");
  detail::UniformSampler rng(seed ^ 0x9e3779b97f4a7c15ull);
  NormReport report;
  report.p = p;
  report.s = s;
  report.seed = seed;
  report.method = "monte-carlo";
  report.samples = pairs;
  std::vector<double> x(d), y(d);
  double acc = 0.0;
  for (std::size_t i = 0; i < pairs; ++i) {
    for (std::size_t k = 0; k < d; ++k) x[k] = rng.next();
    const bool near = !std::isinf(p) ? false : (i % 2 == 0);
    if (near) {
      const double delta = std::exp(std::log(1e-6) +
                                    rng.next() * (std::log(0.3) - std::log(1e-6)));
      for (std::size_t k = 0; k < d; ++k) {
        double v = x[k] + delta * (2.0 * rng.next() - 1.0);
        if (v < 0.0) v = -v;
        if (v > 1.0) v = 2.0 - v;
        y[k] = v;
      }
    } else {
      for (std::size_t k = 0; k < d; ++k) y[k] = rng.next();
    }
    double dist2 = 0.0;
    for (std::size_t k = 0; k < d; ++k) dist2 += (x[k] - y[k]) * (x[k] - y[k]);
    const double dist = std::sqrt(dist2);
    if (dist == 0.0) continue;
    const double diff = std::abs(g(x) - g(y));
    if (std::isinf(p)) {
      acc = std::max(acc, diff / std::pow(dist, s));
    } else {
      acc += std::pow(diff, p) / std::pow(dist, static_cast<double>(d) + s * p);
    }
  }
  report.value = std::isinf(p) ? acc : std::pow(acc / static_cast<double>(pairs), 1.0 / p);
  return report;
}

// W^{s,p} distance between a scalar function (with gradient) and a reference:
// s = 0 is plain L^p; s = 1 combines value and gradient parts; 0 < s < 1
// combines the L^p part with the Slobodeckij seminorm of the difference.
inline NormReport wsp_error(const ScalarFn& val, const GradientFn& grad,
                            const ScalarFn& ref_val, const GradientFn& ref_grad,
                            std::size_t d, double s, double p,
                            std::size_t budget = kDefaultNormBudget,
                            std::uint64_t seed = 0) {
  if (!(s >= 0.0 && s <= 1.0)) throw std::invalid_argument("wsp_error: s must be in [0,1]");
  ScalarFn diff = [&](std::span<const double> x) { return val(x) - ref_val(x); };
  NormReport level0 = lp_norm(diff, d, p, budget, seed);
  if (s == 0.0) return level0;

  NormReport report;
  report.p = p;
  report.s = s;
  report.seed = seed;
  if (s == 1.0) {
    GradientFn gdiff = [&](std::span<const double> x) {
      std::vector<double> a = grad(x);
      const std::vector<double> b = ref_grad(x);
      for (std::size_t k = 0; k < d; ++k) a[k] -= b[k];
      return a;
    };
    NormReport level1 = w1p_seminorm(gdiff, d, p, budget, seed);
    report.method = level1.method;
    report.samples = level0.samples + level1.samples;
    report.value = std::isinf(p)
                       ? std::max(level0.value, level1.value)
                       : std::pow(std::pow(level0.value, p) + std::pow(level1.value, p),
                                  1.0 / p);
    return report;
  }
  NormReport frac = slobodeckij_seminorm(diff, d, s, p, budget, seed);
  report.method = frac.method;
  report.samples = level0.samples + frac.samples;
  report.value = std::isinf(p)
                     ? std::max(level0.value, frac.value)
                     : std::pow(std::pow(level0.value, p) + std::pow(frac.value, p),
                                1.0 / p);
  return report;
}

// Convenience wrappers for single-output networks and reference functions.
inline ScalarFn network_value_fn(const Network& net) {
  return [&net](std::span<const double> x) { return realize(net, x)[0]; };
}

inline GradientFn network_gradient_fn(const Network& net) {
  return [&net](std::span<const double> x) {
    EvalResult r = eval_with_jacobian(net, x);
    return std::vector<double>(r.jacobian.begin(),
                               r.jacobian.begin() + net.input_dim);
  };
}

inline ScalarFn reference_value_fn(const DifferentiableFunction& f) {
  return [&f](std::span<const double> x) { return f.value(x); };
}

inline GradientFn reference_gradient_fn(const DifferentiableFunction& f) {
  return [&f](std::span<const double> x) {
    std::vector<double> g(f.dimension);
    MultiIndex alpha(f.dimension, 0);
    for (std::size_t k = 0; k < f.dimension; ++k) {
      alpha[k] = 1;
      g[k] = f.derivative(alpha, x);
      alpha[k] = 0;
    }
    return g;
  };
}

inline NormReport wsp_error(const Network& net, const DifferentiableFunction& f, double s,
                            double p, std::size_t budget = kDefaultNormBudget,
                            std::uint64_t seed = 0) {
  if (net.output_dim() != 1)
    throw NetworkError("wsp_error: network must have a single output");
  if (net.input_dim != f.dimension) throw NetworkError("wsp_error: dimension mismatch");
  return wsp_error(network_value_fn(net), network_gradient_fn(net),
                   reference_value_fn(f), reference_gradient_fn(f), f.dimension, s, p,
                   budget, seed);
}

}  // namespace sobonet
