#pragma once

// Evaluation of realizations with exact piecewise-affine derivatives.
// Convention at kinks: relu'(0) := 0; the weak derivative is defined a.e.,
// and EvalResult::on_kink makes landing on a kink observable.

#include <cmath>
#include <optional>

#include "network.hpp"

namespace sobonet {

struct EvalResult {
  std::vector<double> value;     // output_dim
  std::vector<double> jacobian;  // output_dim x input_dim, row-major
  bool on_kink = false;          // some hidden pre-activation was exactly 0
};

// Forward pass carrying d/dx of every activation alongside its value.
inline EvalResult eval_with_jacobian(const Network& net, std::span<const double> x) {
  const std::size_t d = net.input_dim;
  if (x.size() != d) throw NetworkError("eval_with_jacobian: input dimension mismatch");
  const std::vector<std::size_t> off = col_offsets(net);
  const std::size_t slots = off.back() + net.layers.back().rows;
  std::vector<double> act(slots, 0.0);
  std::vector<double> jac(slots * d, 0.0);
  for (std::size_t j = 0; j < d; ++j) {
    act[j] = x[j];
    jac[j * d + j] = 1.0;
  }

  EvalResult result;
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    const SparseLayer& layer = net.layers[l];
    const std::size_t base = off[l + 1];
    for (const BiasEntry& b : layer.bias) act[base + b.index] = b.value;
    for (const Triplet& t : layer.weights) {
      act[base + t.row] += t.value * act[t.col];
      double* jrow = &jac[(base + t.row) * d];
      const double* jsrc = &jac[t.col * d];
      for (std::size_t k = 0; k < d; ++k) jrow[k] += t.value * jsrc[k];
    }
    if (l + 1 < net.layers.size()) {
      for (std::size_t i = 0; i < layer.rows; ++i) {
        double& a = act[base + i];
        if (a == 0.0) result.on_kink = true;
        if (a <= 0.0) {
          a = 0.0;
          std::fill_n(&jac[(base + i) * d], d, 0.0);
        }
      }
    }
  }

  const std::size_t out_base = off.back();
  const std::size_t out_dim = net.layers.back().rows;
  result.value.assign(act.begin() + out_base, act.begin() + out_base + out_dim);
  result.jacobian.assign(jac.begin() + out_base * d,
                         jac.begin() + (out_base + out_dim) * d);
  return result;
}

// Central differences per input coordinate. At a kink of relu this returns
// the average of the one-sided slopes (1/2 for relu itself), which disagrees
// with the relu'(0) := 0 convention by design.
inline std::vector<double> finite_difference_jacobian(const Network& net,
                                                      std::span<const double> x,
                                                      double h) {
  if (h <= 0.0) throw NetworkError("finite_difference_jacobian: step must be positive");
  const std::size_t d = net.input_dim;
  if (x.size() != d)
    throw NetworkError("finite_difference_jacobian: input dimension mismatch");
  const std::size_t m = net.output_dim();
  std::vector<double> shifted(x.begin(), x.end());
  std::vector<double> jac(m * d, 0.0);
  for (std::size_t j = 0; j < d; ++j) {
    shifted[j] = x[j] + h;
    const std::vector<double> up = realize(net, shifted);
    shifted[j] = x[j] - h;
    const std::vector<double> down = realize(net, shifted);
    shifted[j] = x[j];
    for (std::size_t i = 0; i < m; ++i) jac[i * d + j] = (up[i] - down[i]) / (2.0 * h);
  }
  return jac;
}

// Upper bound on the Lipschitz constant of the realization in the sup norm:
// each activation's Lipschitz bound is its row's absolute sum weighted by the
// bounds of the columns it reads (relu is 1-Lipschitz).
inline double lipschitz_upper_bound(const Network& net) {
  const std::vector<std::size_t> off = col_offsets(net);
  std::vector<double> lip(off.back() + net.layers.back().rows, 0.0);
  for (std::size_t j = 0; j < net.input_dim; ++j) lip[j] = 1.0;
  double out_max = 0.0;
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    const std::size_t base = off[l + 1];
    for (const Triplet& t : net.layers[l].weights)
      lip[base + t.row] += std::abs(t.value) * lip[t.col];
    if (l + 1 == net.layers.size())
      for (std::size_t i = 0; i < net.layers[l].rows; ++i)
        out_max = std::max(out_max, lip[base + i]);
  }
  return out_max;
}

namespace detail {

// Net is const Network or CompiledNetwork; both realize bitwise identically.
template <typename Net>
struct LineProbe {
  Net& net;
  std::span<const double> x0;
  std::span<const double> v;
  std::size_t evals = 0;
  std::size_t budget;
  std::vector<double> point;

  LineProbe(Net& n, std::span<const double> x, std::span<const double> dir,
            std::size_t max_evals)
      : net(n), x0(x), v(dir), budget(max_evals), point(x.size()) {}

  std::vector<double> operator()(double t) {
    if (++evals > budget)
      throw NetworkError("line restriction probe: evaluation budget exceeded");
    for (std::size_t i = 0; i < point.size(); ++i) point[i] = x0[i] + t * v[i];
    return realize(net, point);
  }
};

// True iff every output is collinear with the segment endpoints at the three
// probe fractions. Irrational fractions avoid probing exactly on the dyadic
// kinks the constructions produce.
template <typename Probe>
inline bool segment_affine(Probe& probe, double a, double b,
                           const std::vector<double>& fa, const std::vector<double>& fb) {
  static constexpr double kFractions[3] = {0.3819660112501051, 0.5669872981077807,
                                           0.7639320225002103};
  for (double frac : kFractions) {
    const double t = a + (b - a) * frac;
    const std::vector<double> ft = probe(t);
    for (std::size_t i = 0; i < ft.size(); ++i) {
      const double lin = fa[i] + (fb[i] - fa[i]) * frac;
      const double tol = 1e-10 * (1.0 + std::abs(fa[i]) + std::abs(fb[i]));
      if (std::abs(ft[i] - lin) > tol) return false;
    }
  }
  return true;
}

// Split fraction slightly off one half: a kink sitting exactly on a split
// point is invisible to both halves, and the constructions put their kinks on
// dyadic rationals, which a repeated irrational split never reaches.
constexpr double kSplitFraction = 0.5001882920466629;

template <typename Probe>
inline void bisect_breakpoints(Probe& probe, double a, double b,
                               const std::vector<double>& fa, const std::vector<double>& fb,
                               double min_width, std::vector<double>* out) {
  if (segment_affine(probe, a, b, fa, fb)) return;
  if (b - a < min_width) {
    out->push_back(0.5 * (a + b));
    return;
  }
  const double mid = a + (b - a) * kSplitFraction;
  const std::vector<double> fm = probe(mid);
  const std::size_t before = out->size();
  bisect_breakpoints(probe, a, mid, fa, fm, min_width, out);
  bisect_breakpoints(probe, mid, b, fm, fb, min_width, out);
  // Non-affine segment whose halves are both affine: the kink is at the split
  // point to within the affine tolerance.
  if (out->size() == before) out->push_back(mid);
}

// Leftmost-only variant: descends into the left half first and stops at the
// first located breakpoint, so cost stays logarithmic even when the segment
// holds thousands of kinks.
template <typename Probe>
inline std::optional<double> leftmost_breakpoint(Probe& probe, double a, double b,
                                                 const std::vector<double>& fa,
                                                 const std::vector<double>& fb,
                                                 double min_width) {
  if (segment_affine(probe, a, b, fa, fb)) return std::nullopt;
  if (b - a < min_width) return 0.5 * (a + b);
  const double mid = a + (b - a) * kSplitFraction;
  const std::vector<double> fm = probe(mid);
  if (auto left = leftmost_breakpoint(probe, a, mid, fa, fm, min_width)) return left;
  if (auto right = leftmost_breakpoint(probe, mid, b, fm, fb, min_width)) return right;
  return mid;
}

}  // namespace detail

// Interior parameters t in (0, t_max) where t -> realize(net, x0 + t v)
// changes affine piece, located by recursive bisection on collinearity
// failures. Between consecutive reported values the restriction is affine to
// tolerance 1e-10.
inline std::vector<double> line_restriction_breakpoints(const Network& net,
                                                        std::span<const double> x0,
                                                        std::span<const double> v,
                                                        double t_max,
                                                        std::size_t budget = 1u << 20) {
  if (t_max <= 0.0) throw NetworkError("line_restriction_breakpoints: t_max must be positive");
  double vnorm = 0.0;
  for (double c : v) vnorm += c * c;
  if (vnorm == 0.0)
    throw NetworkError("line_restriction_breakpoints: direction must be nonzero");
  if (x0.size() != net.input_dim || v.size() != net.input_dim)
    throw NetworkError("line_restriction_breakpoints: dimension mismatch");

  detail::LineProbe<const Network> probe(net, x0, v, budget);
  const std::vector<double> f0 = probe(0.0);
  const std::vector<double> f1 = probe(t_max);
  std::vector<double> found;
  detail::bisect_breakpoints(probe, 0.0, t_max, f0, f1, 1e-11 * t_max, &found);
  std::sort(found.begin(), found.end());
  std::vector<double> result;
  for (double t : found)
    if (result.empty() || t - result.back() > 1e-9 * t_max) result.push_back(t);
  return result;
}

// First interior breakpoint of the line restriction, or nothing when the
// whole segment is affine to tolerance.
inline std::optional<double> first_breakpoint(const Network& net,
                                              std::span<const double> x0,
                                              std::span<const double> v, double t_max,
                                              std::size_t budget = 1u << 22) {
  if (t_max <= 0.0) throw NetworkError("first_breakpoint: t_max must be positive");
  if (x0.size() != net.input_dim || v.size() != net.input_dim)
    throw NetworkError("first_breakpoint: dimension mismatch");
  detail::LineProbe<const Network> probe(net, x0, v, budget);
  const std::vector<double> f0 = probe(0.0);
  const std::vector<double> f1 = probe(t_max);
  return detail::leftmost_breakpoint(probe, 0.0, t_max, f0, f1, 1e-11 * t_max);
}

// Overload on the flattened evaluator, for callers that probe one network
// many times.
inline std::optional<double> first_breakpoint(CompiledNetwork& net,
                                              std::span<const double> x0,
                                              std::span<const double> v, double t_max,
                                              std::size_t budget = 1u << 22) {
  if (t_max <= 0.0) throw NetworkError("first_breakpoint: t_max must be positive");
  if (x0.size() != net.input_dim() || v.size() != net.input_dim())
    throw NetworkError("first_breakpoint: dimension mismatch");
  detail::LineProbe<CompiledNetwork> probe(net, x0, v, budget);
  const std::vector<double> f0 = probe(0.0);
  const std::vector<double> f1 = probe(t_max);
  return detail::leftmost_breakpoint(probe, 0.0, t_max, f0, f1, 1e-11 * t_max);
}

}  // namespace sobonet
