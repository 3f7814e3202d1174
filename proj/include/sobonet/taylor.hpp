#pragma once

// Averaged Taylor polynomials over balls, local polynomial patches, and the
// closed-form localized sum f_N used as the quadrature-side reference.

#include <atomic>
#include <cmath>
#include <functional>
#include <future>
#include <optional>
#include <span>
#include <stdexcept>

#include "multiindex.hpp"
#include "quadrature.hpp"

namespace sobonet {

// A function on the enlarged domain [-1, 2]^d with analytic derivatives up to
// order `order` - 1. norm_bound, when present, is a trusted bound on the
// W^{order, inf} norm over [0, 1]^d.
struct DifferentiableFunction {
  std::size_t dimension = 1;
  unsigned order = 2;
  std::function<double(const MultiIndex&, std::span<const double>)> derivative;
  std::optional<double> norm_bound;

  double value(std::span<const double> x) const {
    return derivative(MultiIndex(dimension, 0), x);
  }
};

inline unsigned default_quadrature_order(std::size_t d) { return d <= 2 ? 20 : 10; }

// Normalized bump supported on the closed ball B_r(center):
// exp(-1/(1 - (|x-center|/r)^2)) divided by its own mass under the tensor
// Gauss-Legendre rule of order q. Using the same rule for the mass and for
// every moment integral makes constants reproduce exactly.
struct BumpCutoff {
  std::vector<double> center;
  double radius = 1.0;
  double mass = 1.0;
  unsigned q = 20;

  double raw(std::span<const double> x) const {
    double rho2 = 0.0;
    for (std::size_t i = 0; i < center.size(); ++i) {
      const double t = (x[i] - center[i]) / radius;
      rho2 += t * t;
    }
    if (rho2 >= 1.0) return 0.0;
    return std::exp(-1.0 / (1.0 - rho2));
  }
  double operator()(std::span<const double> x) const { return raw(x) / mass; }
};

inline BumpCutoff bump_cutoff(std::vector<double> center, double r, unsigned q = 0) {
  if (!(r > 0.0)) throw std::invalid_argument("bump_cutoff: radius must be positive");
  BumpCutoff bump;
  bump.center = std::move(center);
  bump.radius = r;
  bump.q = q == 0 ? default_quadrature_order(bump.center.size()) : q;
  std::vector<double> lo(bump.center.size()), hi(bump.center.size());
  for (std::size_t i = 0; i < bump.center.size(); ++i) {
    lo[i] = bump.center[i] - r;
    hi[i] = bump.center[i] + r;
  }
  bump.mass = integrate_box([&](const std::vector<double>& x) { return bump.raw(x); },
                            lo, hi, bump.q);
  return bump;
}

// Coefficients of the averaged Taylor polynomial of order n of f over
// B_r(center), as a map gamma -> c_gamma over |gamma| <= n-1:
//   c_gamma = sum_beta (-1)^{|beta|} / (gamma+beta)! * prod binom(g_i+b_i, g_i)
//             * integral D^{gamma+beta} f(y) y^beta phi(y) dy.
// One tensor quadrature pass evaluates every moment integral.
inline std::vector<std::pair<MultiIndex, double>> averaged_taylor_coefficients(
    const DifferentiableFunction& f, unsigned n, const std::vector<double>& center,
    double r, unsigned q = 0) {
  const std::size_t d = f.dimension;
  if (center.size() != d)
    throw std::invalid_argument("averaged_taylor_coefficients: center dimension mismatch");
  if (n < 1) throw std::invalid_argument("averaged_taylor_coefficients: n must be >= 1");
  for (double c : center)
    if (c - r < -1.0 || c + r > 2.0)
      throw std::invalid_argument(
          "averaged_taylor_coefficients: ball leaves the enlarged domain [-1,2]^d");
  if (q == 0) q = default_quadrature_order(d);
  if (q < 2) throw std::invalid_argument("averaged_taylor_coefficients: q must be >= 2");

  const BumpCutoff phi = bump_cutoff(center, r, q);
  const std::vector<MultiIndex> gammas = multi_indices_up_to(d, n - 1);

  // Enumerate the (gamma, beta) pairs and the derivative orders they touch.
  struct Term {
    std::size_t gamma_idx;
    MultiIndex beta;
    std::size_t deriv_idx;  // index of gamma+beta in gammas
    double factor;
    double integral = 0.0;
  };
  auto index_of = [&](const MultiIndex& a) {
    return static_cast<std::size_t>(
        std::lower_bound(gammas.begin(), gammas.end(), a) - gammas.begin());
  };
  std::vector<Term> terms;
  for (std::size_t gi = 0; gi < gammas.size(); ++gi) {
    const MultiIndex& gamma = gammas[gi];
    for (const MultiIndex& beta : multi_indices_up_to(d, n - 1 - order(gamma))) {
      MultiIndex sum(d);
      double binom_prod = 1.0;
      for (std::size_t i = 0; i < d; ++i) {
        sum[i] = gamma[i] + beta[i];
        binom_prod *= binomial(sum[i], gamma[i]);
      }
      const double sign = order(beta) % 2 == 0 ? 1.0 : -1.0;
      terms.push_back({gi, beta, index_of(sum),
                       sign * binom_prod / multi_factorial(sum)});
    }
  }

  // One pass: at each node evaluate all derivatives once, then accumulate
  // every moment integral.
  const QuadratureRule rule = gauss_legendre(q);
  std::vector<std::size_t> idx(d, 0);
  std::vector<double> y(d);
  std::vector<double> derivs(gammas.size());
  double jac = 1.0;
  for (std::size_t i = 0; i < d; ++i) jac *= r;  // half-width of each box side
  while (true) {
    double w = 1.0;
    for (std::size_t i = 0; i < d; ++i) {
      y[i] = center[i] + r * rule.nodes[idx[i]];
      w *= rule.weights[idx[i]];
    }
    const double phval = phi(y);
    if (phval != 0.0) {
      for (std::size_t gi = 0; gi < gammas.size(); ++gi)
        derivs[gi] = f.derivative(gammas[gi], y);
      for (Term& t : terms)
        t.integral += w * derivs[t.deriv_idx] * monomial_value(y, t.beta) * phval;
    }
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

  std::vector<std::pair<MultiIndex, double>> coeffs;
  coeffs.reserve(gammas.size());
  for (const MultiIndex& g : gammas) coeffs.push_back({g, 0.0});
  for (const Term& t : terms) coeffs[t.gamma_idx].second += t.factor * t.integral * jac;
  return coeffs;
}

struct PolynomialPatch {
  GridIndex m;
  std::vector<std::pair<MultiIndex, double>> coeffs;
};

// One patch per grid point m in {0..N}^d: the averaged Taylor polynomial of
// order n over the ball of radius 3/(4N) centered at m/N. Patches are
// returned in lexicographic order of m.
inline std::vector<PolynomialPatch> build_patches(const DifferentiableFunction& f,
                                                  unsigned n, unsigned N,
                                                  [[maybe_unused]] double p,
                                                  unsigned q = 0, unsigned threads = 1) {
  const std::size_t d = f.dimension;
  if (N < 1) throw std::invalid_argument("build_patches: N must be >= 1");
  std::vector<GridIndex> grid;
  {
    GridIndex m(d, 0);
    while (true) {
      grid.push_back(m);
      std::size_t pos = d;
      bool done = true;
      while (pos > 0) {
        --pos;
        if (++m[pos] <= N) {
          done = false;
          break;
        }
        m[pos] = 0;
      }
      if (done) break;
    }
  }

  const double r = 3.0 / (4.0 * N);
  auto make_patch = [&](const GridIndex& m) {
    std::vector<double> center(d);
    for (std::size_t i = 0; i < d; ++i) center[i] = static_cast<double>(m[i]) / N;
    return PolynomialPatch{m, averaged_taylor_coefficients(f, n, center, r, q)};
  };

  std::vector<PolynomialPatch> patches(grid.size());
  if (threads <= 1) {
    for (std::size_t i = 0; i < grid.size(); ++i) patches[i] = make_patch(grid[i]);
  } else {
    std::vector<std::future<void>> jobs;
    std::atomic<std::size_t> next{0};
    for (unsigned t = 0; t < threads; ++t)
      jobs.push_back(std::async(std::launch::async, [&] {
        for (std::size_t i = next.fetch_add(1); i < grid.size(); i = next.fetch_add(1))
          patches[i] = make_patch(grid[i]);
      }));
    for (auto& j : jobs) j.get();
  }
  return patches;
}

// Trapezoid bump and its a.e. derivative.
inline double psi_trapezoid(double t) {
  const double a = std::abs(t);
  if (a <= 1.0) return 1.0;
  if (a >= 2.0) return 0.0;
  return 2.0 - a;
}

inline double psi_trapezoid_derivative(double t) {
  const double a = std::abs(t);
  if (a <= 1.0 || a >= 2.0) return 0.0;
  return t > 0.0 ? -1.0 : 1.0;
}

namespace detail {

// Axis window of grid coordinates whose trapezoid factor is nonzero at x:
// |N x - m| < 2/3 allows at most two integers.
inline void pou_window(double x, unsigned N, unsigned* lo, unsigned* hi) {
  const double t = static_cast<double>(N) * x;
  const double lo_f = std::ceil(t - 2.0 / 3.0);
  const double hi_f = std::floor(t + 2.0 / 3.0);
  *lo = lo_f < 0.0 ? 0u : static_cast<unsigned>(std::min(lo_f, static_cast<double>(N)));
  *hi = hi_f < 0.0 ? 0u : static_cast<unsigned>(std::min(hi_f, static_cast<double>(N)));
}

inline std::size_t linear_index(const GridIndex& m, unsigned N) {
  std::size_t idx = 0;
  for (unsigned c : m) idx = idx * (N + 1) + c;
  return idx;
}

}  // namespace detail

// f_N(x) = sum_m phi_m(x) p_m(x) with closed-form trapezoid products; only
// the <= 2^d patches whose bump covers x are touched. Expects the patch list
// in build_patches order.
inline double evaluate_localized_sum(const std::vector<PolynomialPatch>& patches,
                                     unsigned N, std::span<const double> x) {
  const std::size_t d = x.size();
  std::vector<unsigned> lo(d), hi(d);
  for (std::size_t i = 0; i < d; ++i) detail::pou_window(x[i], N, &lo[i], &hi[i]);
  GridIndex m(d);
  for (std::size_t i = 0; i < d; ++i) m[i] = lo[i];
  double total = 0.0;
  while (true) {
    double phi = 1.0;
    for (std::size_t i = 0; i < d; ++i)
      phi *= psi_trapezoid(3.0 * N * x[i] - 3.0 * m[i]);
    if (phi != 0.0) {
      const std::size_t idx = detail::linear_index(m, N);
      if (idx >= patches.size() || patches[idx].m != m)
        throw std::invalid_argument("evaluate_localized_sum: patch list is not in "
                                    "build_patches order");
      double poly = 0.0;
      for (const auto& [alpha, c] : patches[idx].coeffs)
        poly += c * monomial_value(x, alpha);
      total += phi * poly;
    }
    std::size_t pos = d;
    bool done = true;
    while (pos > 0) {
      --pos;
      if (++m[pos] <= hi[pos]) {
        done = false;
        break;
      }
      m[pos] = lo[pos];
    }
    if (done) break;
  }
  return total;
}

// Value and gradient of f_N at x. The gradient uses the a.e. derivative of
// the trapezoid factors (zero exactly at their kinks).
inline std::pair<double, std::vector<double>> evaluate_localized_sum_with_gradient(
    const std::vector<PolynomialPatch>& patches, unsigned N, std::span<const double> x) {
  const std::size_t d = x.size();
  std::vector<unsigned> lo(d), hi(d);
  for (std::size_t i = 0; i < d; ++i) detail::pou_window(x[i], N, &lo[i], &hi[i]);
  GridIndex m(d);
  for (std::size_t i = 0; i < d; ++i) m[i] = lo[i];
  double total = 0.0;
  std::vector<double> grad(d, 0.0);
  std::vector<double> psi(d), dpsi(d);
  while (true) {
    for (std::size_t i = 0; i < d; ++i) {
      const double t = 3.0 * N * x[i] - 3.0 * m[i];
      psi[i] = psi_trapezoid(t);
      dpsi[i] = 3.0 * N * psi_trapezoid_derivative(t);
    }
    double phi = 1.0;
    for (std::size_t i = 0; i < d; ++i) phi *= psi[i];
    // A vanished trapezoid factor zeroes every product this patch contributes,
    // including the derivative ones: psi_j = 0 forces dpsi_j = 0.
    if (phi != 0.0) {
      const std::size_t idx = detail::linear_index(m, N);
      if (idx >= patches.size() || patches[idx].m != m)
        throw std::invalid_argument("evaluate_localized_sum_with_gradient: patch list "
                                    "is not in build_patches order");
      double poly = 0.0;
      std::vector<double> dpoly(d, 0.0);
      for (const auto& [alpha, c] : patches[idx].coeffs) {
        poly += c * monomial_value(x, alpha);
        for (std::size_t k = 0; k < d; ++k) {
          if (alpha[k] == 0) continue;
          MultiIndex reduced = alpha;
          --reduced[k];
          dpoly[k] += c * alpha[k] * monomial_value(x, reduced);
        }
      }
      total += phi * poly;
      for (std::size_t k = 0; k < d; ++k) {
        double others = 1.0;
        for (std::size_t i = 0; i < d; ++i)
          if (i != k) others *= psi[i];
        grad[k] += dpsi[k] * others * poly + phi * dpoly[k];
      }
    }
    std::size_t pos = d;
    bool done = true;
    while (pos > 0) {
      --pos;
      if (++m[pos] <= hi[pos]) {
        done = false;
        break;
      }
      m[pos] = lo[pos];
    }
    if (done) break;
  }
  return {total, std::move(grad)};
}

}  // namespace sobonet
