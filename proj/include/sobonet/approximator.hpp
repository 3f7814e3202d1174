#pragma once

// End-to-end pipeline: grid-density selection, patch construction, network
// assembly, verification against the target Sobolev tolerance, and scaling
// sweeps with complexity audits.

#include <chrono>
#include <cmath>
#include <optional>
#include <string>

#include "constructions.hpp"
#include "sobolev.hpp"
#include "taylor.hpp"

namespace sobonet {

struct ComplexityAudit {
  std::size_t L = 0;
  std::size_t M = 0;
  std::size_t N = 0;
  double eps = 0.0;
  unsigned N_grid = 0;
  std::string mode = "calibrated";
};

inline ComplexityAudit audit_network(const Network& net, double eps, unsigned N_grid,
                                     std::string mode) {
  return {net.depth(), net.weight_count(), net.neuron_count(), eps, N_grid,
          std::move(mode)};
}

// Inner-tolerance calibration constant C-hat per (d, n): the measured worst
// ratio |f_N - R|_{W^{s,inf}} / (B N^s eps') over the registry functions,
// N in {2,...,8}, eps' in {1e-1,...,1e-3}, s in {0,1}, padded by 1.5. Values
// frozen from the calibration run recorded in data/calibration.json; the
// fallback for unmeasured shapes is deliberately large, which only shrinks
// the inner tolerance.
inline double calibration_constant(std::size_t d, unsigned n) {
  if (d == 1 && n == 2) return 0.0727;
  if (d == 1 && n == 3) return 0.0753;
  if (d == 2 && n == 2) return 0.0342;
  if (d == 2 && n == 3) return 0.0409;
  return 4.0;
}

struct BuildOptions {
  std::string mode = "calibrated";      // "calibrated" or "theoretical"
  std::optional<double> C_theoretical;  // required in theoretical mode
  std::optional<double> C_hat;          // overrides calibration_constant
  std::size_t norm_budget = kDefaultNormBudget;
  std::size_t search_budget = 20000;
  std::uint64_t seed = 0;
  unsigned quadrature = 0;  // 0 = per-dimension default
  unsigned threads = 1;
  unsigned max_grid_retries = 3;
  unsigned max_eps_retries = 6;
  unsigned grid_cap = 1u << 15;
};

// Theoretical grid density N = ceil((eps / (2 C B))^(-1/(n-s))).
inline unsigned select_grid_density(double eps, unsigned n, double s, double C_cal,
                                    double B) {
  if (!(eps > 0.0)) throw std::invalid_argument("select_grid_density: eps must be > 0");
  if (!(C_cal > 0.0 && B > 0.0))
    throw std::invalid_argument("select_grid_density: constants must be positive");
  if (!(s >= 0.0 && s <= 1.0 && n >= 2))
    throw std::invalid_argument("select_grid_density: need n >= 2 and s in [0,1]");
  const double ratio = eps / (2.0 * C_cal * B);
  const double raw = std::pow(ratio, -1.0 / (static_cast<double>(n) - s));
  if (raw <= 1.0) return 1;
  return static_cast<unsigned>(std::ceil(raw));
}

// Sampled W^{s,inf} distance between f and its localized polynomial sum f_N.
inline double localized_sum_error(const DifferentiableFunction& f,
                                  const std::vector<PolynomialPatch>& patches, unsigned N,
                                  double s, std::size_t budget, std::uint64_t seed) {
  ScalarFn val = [&](std::span<const double> x) {
    return evaluate_localized_sum(patches, N, x);
  };
  GradientFn grad = [&](std::span<const double> x) {
    return evaluate_localized_sum_with_gradient(patches, N, x).second;
  };
  return wsp_error(val, grad, reference_value_fn(f), reference_gradient_fn(f),
                   f.dimension, s, kInfiniteOrder, budget, seed)
      .value;
}

// Smallest grid density whose localized-sum error meets the half budget:
// doubling search for a passing upper bound, then bisection of the bracket.
// The sampled error decreases with the density on every supported target, so
// bisection returns the same density a full scan would. Returns the density
// and its patches.
inline std::pair<unsigned, std::vector<PolynomialPatch>> calibrated_grid_density(
    const DifferentiableFunction& f, unsigned n, double s, double eps,
    const BuildOptions& opts) {
  auto try_density = [&](unsigned N) {
    std::vector<PolynomialPatch> patches =
        build_patches(f, n, N, kInfiniteOrder, opts.quadrature, opts.threads);
    const double err = localized_sum_error(f, patches, N, s, opts.search_budget, opts.seed);
    return std::pair<bool, std::vector<PolynomialPatch>>{err <= eps / 2.0,
                                                         std::move(patches)};
  };
  unsigned upper = 1;
  auto [ok, patches] = try_density(upper);
  while (!ok) {
    if (upper > opts.grid_cap)
      throw std::runtime_error("calibrated_grid_density: grid density cap exceeded");
    upper *= 2;
    std::tie(ok, patches) = try_density(upper);
  }
  if (upper == 1) return {1, std::move(patches)};
  unsigned lo = upper / 2;  // failed
  unsigned hi = upper;      // passed, patches held
  while (hi - lo > 1) {
    const unsigned mid = lo + (hi - lo) / 2;
    auto [fine, cand] = try_density(mid);
    if (fine) {
      hi = mid;
      patches = std::move(cand);
    } else {
      lo = mid;
    }
  }
  return {hi, std::move(patches)};
}

// Per-term view of an assembled approximant: evaluating only the terms whose
// partition bump covers x gives the same function as the assembled network up
// to inactive-term leakage (~1e-11), at a small fraction of the cost.
struct LocalizedApproximant {
  std::size_t d = 1;
  unsigned N_grid = 1;
  std::size_t alphas_per_patch = 1;
  std::vector<PatchTerm> terms;  // lexicographic (m, alpha), dense per patch
  std::vector<Network> nets;     // aligned with terms

  template <typename Visit>
  void for_each_active(std::span<const double> x, Visit&& visit) const {
    std::vector<unsigned> lo(d), hi(d);
    for (std::size_t i = 0; i < d; ++i) detail::pou_window(x[i], N_grid, &lo[i], &hi[i]);
    GridIndex m(d);
    for (std::size_t i = 0; i < d; ++i) m[i] = lo[i];
    while (true) {
      bool inside = true;
      for (std::size_t i = 0; i < d && inside; ++i)
        inside = psi_trapezoid(3.0 * N_grid * x[i] - 3.0 * m[i]) != 0.0;
      if (inside) {
        const std::size_t base = detail::linear_index(m, N_grid) * alphas_per_patch;
        for (std::size_t k = base; k < base + alphas_per_patch; ++k)
          if (terms[k].coefficient != 0.0) visit(k);
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
  }

  double value(std::span<const double> x) const {
    double sum = 0.0;
    for_each_active(x, [&](std::size_t k) {
      sum += terms[k].coefficient * realize(nets[k], x)[0];
    });
    return sum;
  }

  std::pair<double, std::vector<double>> value_and_gradient(
      std::span<const double> x) const {
    double sum = 0.0;
    std::vector<double> grad(d, 0.0);
    for_each_active(x, [&](std::size_t k) {
      const EvalResult r = eval_with_jacobian(nets[k], x);
      sum += terms[k].coefficient * r.value[0];
      for (std::size_t i = 0; i < d; ++i)
        grad[i] += terms[k].coefficient * r.jacobian[i];
    });
    return {sum, std::move(grad)};
  }

  ScalarFn value_fn() const {
    return [this](std::span<const double> x) { return value(x); };
  }
  GradientFn gradient_fn() const {
    return [this](std::span<const double> x) { return value_and_gradient(x).second; };
  }
};

struct ApproximantBuild {
  Network net;
  ComplexityAudit audit;
  LocalizedApproximant localized;
  std::vector<PolynomialPatch> patches;
  double eps_prime = 0.0;
  double error_f_fn = 0.0;    // measured |f - f_N|_{W^{s,inf}}
  double error_fn_net = 0.0;  // measured |f_N - R|_{W^{s,inf}}
  double achieved = 0.0;      // measured |f - R|_{W^{s,inf}}
};

namespace detail {

inline std::vector<PatchTerm> patches_to_terms(const std::vector<PolynomialPatch>& patches) {
  std::vector<PatchTerm> terms;
  for (const PolynomialPatch& patch : patches)
    for (const auto& [alpha, c] : patch.coeffs) terms.push_back({patch.m, alpha, c});
  return terms;
}

}  // namespace detail

// Builds the W^{s,p} approximant of f with target accuracy eps, ||f||_{W^{n,inf}}
// <= B. Calibrated mode searches the grid density against the half budget and
// verifies both halves of the error split, retrying with a doubled grid or a
// halved inner tolerance until the measured error meets eps.
inline ApproximantBuild build_approximant(const DifferentiableFunction& f, unsigned n,
                                          double p, double s, double B, double eps,
                                          const BuildOptions& opts = {}) {
  if (n < 2) throw std::invalid_argument("build_approximant: n must be >= 2");
  if (!(s >= 0.0 && s <= 1.0))
    throw std::invalid_argument("build_approximant: s must lie in [0,1]");
  if (!(eps > 0.0)) throw std::invalid_argument("build_approximant: eps must be > 0");
  if (!std::isinf(p))
    throw std::invalid_argument("build_approximant: only p = inf builds are supported");
  if (f.norm_bound && *f.norm_bound > B)
    throw std::invalid_argument("build_approximant: norm metadata exceeds the trusted "
                                "bound B");
  const std::size_t d = f.dimension;
  const double C_hat = opts.C_hat ? *opts.C_hat : calibration_constant(d, n);

  unsigned N_grid = 0;
  std::vector<PolynomialPatch> patches;
  if (opts.mode == "calibrated") {
    std::tie(N_grid, patches) = calibrated_grid_density(f, n, s, eps, opts);
  } else if (opts.mode == "theoretical") {
    if (!opts.C_theoretical)
      throw std::invalid_argument("build_approximant: theoretical mode needs an explicit "
                                  "grid constant");
    N_grid = select_grid_density(eps, n, s, *opts.C_theoretical, B);
    patches = build_patches(f, n, N_grid, p, opts.quadrature, opts.threads);
  } else {
    throw std::invalid_argument("build_approximant: unknown mode " + opts.mode);
  }

  double eps_prime =
      eps / (2.0 * C_hat * B * std::pow(static_cast<double>(N_grid), s));
  // The product construction requires an inner tolerance below 1/2.
  eps_prime = std::min(eps_prime, 0.25);

  ApproximantBuild result;
  for (unsigned grid_try = 0;; ++grid_try) {
    const double err_half1 =
        localized_sum_error(f, patches, N_grid, s, opts.norm_budget, opts.seed);
    if (err_half1 > eps / 2.0) {
      if (grid_try >= opts.max_grid_retries || 2 * N_grid > opts.grid_cap)
        throw std::runtime_error("build_approximant: localized sum cannot meet eps/2 "
                                 "within the grid cap");
      N_grid *= 2;
      patches = build_patches(f, n, N_grid, p, opts.quadrature, opts.threads);
      continue;
    }
    result.error_f_fn = err_half1;
    break;
  }

  ScalarFn fn_val = [&](std::span<const double> x) {
    return evaluate_localized_sum(patches, N_grid, x);
  };
  GradientFn fn_grad = [&](std::span<const double> x) {
    return evaluate_localized_sum_with_gradient(patches, N_grid, x).second;
  };

  for (unsigned eps_try = 0;; ++eps_try) {
    LocalizedApproximant loc;
    loc.d = d;
    loc.N_grid = N_grid;
    loc.terms = detail::patches_to_terms(patches);
    loc.alphas_per_patch = patches.front().coeffs.size();
    loc.nets.reserve(loc.terms.size());
    for (const PatchTerm& t : loc.terms)
      loc.nets.push_back(localized_monomial_network(t.m, t.alpha, N_grid, eps_prime));

    const double err_half2 =
        wsp_error(loc.value_fn(), loc.gradient_fn(), fn_val, fn_grad, d, s,
                  kInfiniteOrder, opts.norm_budget, opts.seed)
            .value;
    if (err_half2 > eps / 2.0) {
      if (eps_try >= opts.max_eps_retries)
        throw std::runtime_error("build_approximant: network half of the error budget "
                                 "not met");
      eps_prime /= 2.0;
      continue;
    }

    result.error_fn_net = err_half2;
    result.localized = std::move(loc);
    break;
  }

  Network assembled = assemble_approximant(result.localized.terms, N_grid, eps_prime);
  result.achieved = wsp_error(result.localized.value_fn(), result.localized.gradient_fn(),
                              reference_value_fn(f), reference_gradient_fn(f), d, s,
                              kInfiniteOrder, opts.norm_budget, opts.seed)
                        .value;
  result.audit = audit_network(assembled, eps, N_grid, opts.mode);
  result.net = std::move(assembled);
  result.patches = std::move(patches);
  result.eps_prime = eps_prime;
  return result;
}

struct SweepRow {
  double eps = 0.0;
  double error_s0 = 0.0;
  double error_s1 = 0.0;
  double error_target_s = 0.0;
  std::size_t L = 0;
  std::size_t M = 0;
  std::size_t N = 0;
  unsigned N_grid = 0;
  double seconds = 0.0;
};

inline std::vector<SweepRow> scaling_sweep(const DifferentiableFunction& f, unsigned n,
                                           double s, const std::vector<double>& eps_list,
                                           const BuildOptions& opts = {}) {
  std::vector<SweepRow> rows;
  for (double eps : eps_list) {
    const auto t0 = std::chrono::steady_clock::now();
    ApproximantBuild build = build_approximant(f, n, kInfiniteOrder, s,
                                               f.norm_bound.value_or(1.0), eps, opts);
    SweepRow row;
    row.eps = eps;
    row.error_target_s = build.achieved;
    row.error_s0 =
        wsp_error(build.localized.value_fn(), build.localized.gradient_fn(),
                  reference_value_fn(f), reference_gradient_fn(f), f.dimension, 0.0,
                  kInfiniteOrder, opts.norm_budget, opts.seed)
            .value;
    row.error_s1 =
        wsp_error(build.localized.value_fn(), build.localized.gradient_fn(),
                  reference_value_fn(f), reference_gradient_fn(f), f.dimension, 1.0,
                  kInfiniteOrder, opts.norm_budget, opts.seed)
            .value;
    row.L = build.audit.L;
    row.M = build.audit.M;
    row.N = build.audit.N;
    row.N_grid = build.audit.N_grid;
    row.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    rows.push_back(row);
  }
  return rows;
}

// Least-squares slope of log M against log(1/eps) after dividing out the
// log_2(eps^{-n/(n-s)}) factor; compare with d/(n-s).
inline double fit_m_exponent(const std::vector<SweepRow>& rows, unsigned n, double s) {
  if (rows.size() < 2)
    throw std::invalid_argument("fit_m_exponent: need at least two sweep rows");
  const double k = static_cast<double>(n) / (static_cast<double>(n) - s);
  std::vector<double> xs, ys;
  for (const SweepRow& row : rows) {
    const double inv = 1.0 / row.eps;
    xs.push_back(std::log(inv));
    ys.push_back(std::log(static_cast<double>(row.M) / (k * std::log2(inv))));
  }
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= xs.size();
  my /= ys.size();
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    num += (xs[i] - mx) * (ys[i] - my);
    den += (xs[i] - mx) * (xs[i] - mx);
  }
  return num / den;
}

}  // namespace sobonet
