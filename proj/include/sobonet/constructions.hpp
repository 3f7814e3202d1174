#pragma once

// Explicit approximation networks: squaring, absolute value, multiplication,
// trapezoid partition-of-unity factors, monomial factors, approximate products
// of outputs, localized monomials, and the assembled approximant.

#include <cmath>

#include "calculus.hpp"
#include "multiindex.hpp"
#include "network.hpp"

namespace sobonet {

// Piecewise linear interpolant of x^2 on [0,1] with knots k/2^m, realized by
// the sawtooth composition: each hidden layer carries the triple
// (relu(t), relu(t - 1/2), relu(t - 1)) of the current sawtooth iterate t,
// and the output accumulates x - sum_s saw_s(x) / 4^s through skips.
// L = m+1, M = 14m-5, N = 3m+2. Outside [0,1] the realization equals x.
inline Network squaring_network(unsigned m) {
  if (m < 1) throw NetworkError("squaring_network: m must be >= 1");
  Network net;
  net.input_dim = 1;
  SparseLayer first;
  first.rows = 3;
  first.cols = 1;
  for (std::size_t r = 0; r < 3; ++r) add_weight(first, r, 0, 1.0);
  add_bias(first, 1, -0.5);
  add_bias(first, 2, -1.0);
  sort_layer(first);
  net.layers.push_back(std::move(first));
  for (unsigned s = 2; s <= m; ++s) {
    SparseLayer layer;
    layer.rows = 3;
    layer.cols = 1 + 3 * (s - 1);
    const std::size_t prev = 1 + 3 * (s - 2);
    for (std::size_t r = 0; r < 3; ++r) {
      add_weight(layer, r, prev + 0, 2.0);
      add_weight(layer, r, prev + 1, -4.0);
      add_weight(layer, r, prev + 2, 2.0);
    }
    add_bias(layer, 1, -0.5);
    add_bias(layer, 2, -1.0);
    sort_layer(layer);
    net.layers.push_back(std::move(layer));
  }
  SparseLayer out;
  out.rows = 1;
  out.cols = 1 + 3 * m;
  add_weight(out, 0, 0, 1.0);
  for (unsigned s = 1; s <= m; ++s) {
    const std::size_t base = 1 + 3 * (s - 1);
    add_weight(out, 0, base + 0, -std::ldexp(2.0, -2 * static_cast<int>(s)));
    add_weight(out, 0, base + 1, std::ldexp(4.0, -2 * static_cast<int>(s)));
    add_weight(out, 0, base + 2, -std::ldexp(2.0, -2 * static_cast<int>(s)));
  }
  sort_layer(out);
  net.layers.push_back(std::move(out));
  return net;
}

// |x| = relu(x) + relu(-x) on all of R.
inline Network abs_network() {
  Network net;
  net.input_dim = 1;
  SparseLayer l1;
  l1.rows = 2;
  l1.cols = 1;
  add_weight(l1, 0, 0, 1.0);
  add_weight(l1, 1, 0, -1.0);
  SparseLayer l2;
  l2.rows = 1;
  l2.cols = 3;
  add_weight(l2, 0, 1, 1.0);
  add_weight(l2, 0, 2, 1.0);
  net.layers = {std::move(l1), std::move(l2)};
  return net;
}

namespace detail {

// Two-layer net realizing |cx*x + cy*y| on R^2; zero coefficients are not
// stored.
inline Network scaled_abs2(double cx, double cy) {
  Network net;
  net.input_dim = 2;
  SparseLayer l1;
  l1.rows = 2;
  l1.cols = 2;
  add_weight(l1, 0, 0, cx);
  add_weight(l1, 0, 1, cy);
  add_weight(l1, 1, 0, -cx);
  add_weight(l1, 1, 1, -cy);
  sort_layer(l1);
  SparseLayer l2;
  l2.rows = 1;
  l2.cols = 4;
  add_weight(l2, 0, 2, 1.0);
  add_weight(l2, 0, 3, 1.0);
  net.layers = {std::move(l1), std::move(l2)};
  return net;
}

}  // namespace detail

// Approximate product on (-M_box, M_box)^2 via the polarization
// 2 M^2 (sq(|x+y|/2M) - sq(|x|/2M) - sq(|y|/2M)) with inner interpolation
// accuracy delta = eps / (12 M_box^2). W^{1,inf} error <= eps; exactly zero on
// the lines x = 0 and y = 0 (the first and third branch then receive bitwise
// identical inputs and the final row is attached by sparse concatenation, so
// the cancellation is exact). L = m+3 with m = ceil(log2(1/delta)).
inline Network multiplication_network(double M_box, double eps) {
  if (!(M_box >= 1.0)) throw NetworkError("multiplication_network: M_box must be >= 1");
  if (!(eps > 0.0 && eps < 0.5))
    throw NetworkError("multiplication_network: eps must lie in (0, 1/2)");
  const double delta = eps / (12.0 * M_box * M_box);
  const unsigned m = static_cast<unsigned>(std::max(1.0, std::ceil(std::log2(1.0 / delta))));
  const Network sq = squaring_network(m);
  const double inv = 1.0 / (2.0 * M_box);
  const Network b1 = concatenate(sq, detail::scaled_abs2(inv, inv));
  const Network b2 = concatenate(sq, detail::scaled_abs2(inv, 0.0));
  const Network b3 = concatenate(sq, detail::scaled_abs2(0.0, inv));
  const Network branches = parallelize({b1, b2, b3});
  Network comb;
  comb.input_dim = 3;
  SparseLayer row;
  row.rows = 1;
  row.cols = 3;
  const double scale = 2.0 * M_box * M_box;
  add_weight(row, 0, 0, scale);
  add_weight(row, 0, 1, -scale);
  add_weight(row, 0, 2, -scale);
  comb.layers = {std::move(row)};
  return sparse_concatenate(comb, branches);
}

// Trapezoid psi: 1 on |x| <= 1, 0 on |x| >= 2, linear between.
// psi(x) = relu(x+2) - relu(x+1) - relu(x-1) + relu(x-2); 12 stored entries,
// 6 neurons.
inline Network hat_network() {
  Network net;
  net.input_dim = 1;
  SparseLayer l1;
  l1.rows = 4;
  l1.cols = 1;
  for (std::size_t r = 0; r < 4; ++r) add_weight(l1, r, 0, 1.0);
  add_bias(l1, 0, 2.0);
  add_bias(l1, 1, 1.0);
  add_bias(l1, 2, -1.0);
  add_bias(l1, 3, -2.0);
  sort_layer(l1);
  SparseLayer l2;
  l2.rows = 1;
  l2.cols = 5;
  add_weight(l2, 0, 1, 1.0);
  add_weight(l2, 0, 2, -1.0);
  add_weight(l2, 0, 3, -1.0);
  add_weight(l2, 0, 4, 1.0);
  net.layers = {std::move(l1), std::move(l2)};
  return net;
}

// d-output factor net: output l realizes psi(3N x_l - 3 m_l). The product of
// the outputs is the partition-of-unity bump phi_m at grid point m/N. Three
// layers; the affine scaling uses exact integer weights 3N and 3 m_l.
inline Network pou_factor_network(const GridIndex& m, unsigned N) {
  const std::size_t d = m.size();
  if (d == 0) throw NetworkError("pou_factor_network: empty grid index");
  if (N < 1) throw NetworkError("pou_factor_network: N must be >= 1");
  for (unsigned c : m)
    if (c > N) throw NetworkError("pou_factor_network: grid index out of range");
  std::vector<Network> branches;
  branches.reserve(d);
  for (std::size_t l = 0; l < d; ++l) {
    Network line;
    line.input_dim = d;
    SparseLayer row;
    row.rows = 1;
    row.cols = d;
    add_weight(row, 0, l, 3.0 * N);
    add_bias(row, 0, -3.0 * m[l]);
    line.layers = {std::move(row)};
    branches.push_back(sparse_concatenate(hat_network(), line));
  }
  return parallelize(branches);
}

// One-layer net listing coordinate x_i repeated alpha_i times; the product of
// the |alpha| outputs is x^alpha.
inline Network monomial_factor_network(const MultiIndex& alpha) {
  const std::size_t d = alpha.size();
  if (d == 0) throw NetworkError("monomial_factor_network: empty multi-index");
  const unsigned k = order(alpha);
  if (k == 0)
    throw NetworkError("monomial_factor_network: |alpha| must be >= 1 (the empty "
                       "product is the caller's constant 1)");
  Network net;
  net.input_dim = d;
  SparseLayer layer;
  layer.rows = k;
  layer.cols = d;
  std::size_t r = 0;
  for (std::size_t i = 0; i < d; ++i)
    for (unsigned rep = 0; rep < alpha[i]; ++rep) add_weight(layer, r++, i, 1.0);
  net.layers = {std::move(layer)};
  return net;
}

// Single-output approximation of the product of phi's outputs: peel the last
// output, recurse, then multiply back with an approximate pairwise product of
// box M_box = current output count. The first depth(phi)-1 layers stay equal
// to phi's hidden layers at every level, so the peeled row's columns remain
// valid. L-inf error <= (number of outputs) * eps when each output is bounded
// by 1; a bitwise-zero output of phi forces a bitwise-zero result.
inline Network product_of_outputs_network(const Network& phi, double eps, double N_bound,
                                          unsigned m_max = 16) {
  validated(phi);
  if (!(eps > 0.0 && eps < 0.5))
    throw NetworkError("product_of_outputs_network: eps must lie in (0, 1/2)");
  if (!(N_bound >= 1.0))
    throw NetworkError("product_of_outputs_network: N_bound must be >= 1");
  const std::size_t n = phi.output_dim();
  if (n > m_max)
    throw NetworkError("product_of_outputs_network: more outputs than the configured "
                       "factor limit");
  if (n == 1) return phi;

  Network front = phi;
  SparseLayer& last = front.layers.back();
  std::vector<Triplet> peeled;
  double peeled_bias = 0.0;
  bool has_bias = false;
  std::erase_if(last.weights, [&](const Triplet& t) {
    if (t.row + 1 == n) {
      peeled.push_back(t);
      return true;
    }
    return false;
  });
  std::erase_if(last.bias, [&](const BiasEntry& b) {
    if (b.index + 1 == n) {
      peeled_bias = b.value;
      has_bias = true;
      return true;
    }
    return false;
  });
  last.rows = n - 1;

  Network combined = product_of_outputs_network(front, eps, N_bound, m_max);
  SparseLayer& out = combined.layers.back();
  out.rows = 2;
  for (const Triplet& t : peeled) add_weight(out, 1, t.col, t.value);
  if (has_bias) add_bias(out, 1, peeled_bias);
  sort_layer(out);

  const Network mult = multiplication_network(static_cast<double>(n), eps);
  return sparse_concatenate(mult, combined);
}

// Network realization of phi_m(x) x^alpha: partition-of-unity factors (and
// monomial factors when |alpha| >= 1) run in parallel, then their outputs are
// multiplied approximately. Exactly zero wherever a factor is bitwise zero.
inline Network localized_monomial_network(const GridIndex& m, const MultiIndex& alpha,
                                          unsigned N, double eps) {
  if (m.size() != alpha.size())
    throw NetworkError("localized_monomial_network: grid index and multi-index "
                       "dimensions differ");
  const Network pou = pou_factor_network(m, N);
  const Network factors =
      order(alpha) >= 1 ? parallelize(pou, monomial_factor_network(alpha)) : pou;
  return product_of_outputs_network(factors, eps, 3.0 * N);
}

struct PatchTerm {
  GridIndex m;
  MultiIndex alpha;
  double coefficient = 0.0;
};

inline bool term_order(const PatchTerm& a, const PatchTerm& b) {
  if (a.m != b.m) return a.m < b.m;
  return a.alpha < b.alpha;
}

// Single-output network realizing sum_i c_i * phi_{m_i}(x) x^{alpha_i}: a
// coefficient row sparsely concatenated onto the parallelized localized
// monomials, assembled in lexicographic (m, alpha) order. The architecture
// depends on (d, N, eps), the term list, and which coefficients are nonzero;
// it does not depend on the nonzero coefficient values.
inline Network assemble_approximant(std::vector<PatchTerm> terms, unsigned N, double eps) {
  if (terms.empty()) throw NetworkError("assemble_approximant: empty term list");
  std::sort(terms.begin(), terms.end(), term_order);
  std::vector<Network> parts;
  parts.reserve(terms.size());
  for (const PatchTerm& t : terms)
    parts.push_back(localized_monomial_network(t.m, t.alpha, N, eps));
  const Network stacked = parallelize(parts);
  Network row_net;
  row_net.input_dim = terms.size();
  SparseLayer row;
  row.rows = 1;
  row.cols = terms.size();
  for (std::size_t i = 0; i < terms.size(); ++i)
    add_weight(row, 0, i, terms[i].coefficient);
  row_net.layers = {std::move(row)};
  return sparse_concatenate(row_net, stacked);
}

// Rewrites the coefficient row of an assembled approximant in place. The term
// list must carry the same sorted (m, alpha) structure the network was
// assembled with; only the coefficient values may differ. The sparse
// concatenation in assemble_approximant routes term output i through the
// activation pair (cols - 2T + i, cols - T + i) of the final layer, so the
// result is bitwise equal to reassembling from scratch at a fraction of the
// cost.
inline void reassign_coefficients(Network& assembled, std::vector<PatchTerm> terms) {
  if (assembled.layers.empty() || assembled.layers.back().rows != 1)
    throw NetworkError("reassign_coefficients: network must have one output");
  if (terms.empty()) throw NetworkError("reassign_coefficients: empty term list");
  std::sort(terms.begin(), terms.end(), term_order);
  SparseLayer& last = assembled.layers.back();
  const std::size_t count = terms.size();
  if (last.cols < 2 * count)
    throw NetworkError("reassign_coefficients: network is too narrow for the term list");
  const std::size_t base = last.cols - 2 * count;
  last.weights.clear();
  last.bias.clear();
  for (std::size_t i = 0; i < count; ++i)
    add_weight(last, 0, base + i, terms[i].coefficient);
  for (std::size_t i = 0; i < count; ++i)
    add_weight(last, 0, base + count + i, -terms[i].coefficient);
  sort_layer(last);
}

}  // namespace sobonet
