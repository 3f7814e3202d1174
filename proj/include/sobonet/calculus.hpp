#pragma once

// Calculus on skip-connection networks: identity, concatenation (function
// composition), sparse concatenation, parallelization, and conversion to a
// standard (skip-free) network. All operations are pure; complexity effects:
//
//   concatenate         L = L_f + L_g - 1, realization f after g
//   sparse_concatenate  L = L_f + L_g,     M <= 2 M_f + 2 M_g, N <= 2 N_f + 2 N_g
//   parallelize         L = max L_i,       M = sum M_i, N = sum N_i - (n-1) d
//   to_standard         L unchanged,       N_st <= 2 L N, M_st <= 2 (L N + M)

#include <map>
#include <utility>

#include "network.hpp"

namespace sobonet {

// Two-layer network realizing the identity on R^d: the hidden layer splits x
// into (relu(x), relu(-x)) and the affine output recombines them. M = 4d.
inline Network identity_network(std::size_t d) {
  if (d == 0) throw NetworkError("identity_network: dimension must be positive");
  Network net;
  net.input_dim = d;
  SparseLayer l1;
  l1.rows = 2 * d;
  l1.cols = d;
  for (std::size_t i = 0; i < d; ++i) {
    add_weight(l1, i, i, 1.0);
    add_weight(l1, d + i, i, -1.0);
  }
  sort_layer(l1);
  SparseLayer l2;
  l2.rows = d;
  l2.cols = 3 * d;
  for (std::size_t i = 0; i < d; ++i) {
    add_weight(l2, i, d + i, 1.0);
    add_weight(l2, i, 2 * d + i, -1.0);
  }
  sort_layer(l2);
  net.layers = {std::move(l1), std::move(l2)};
  return net;
}

namespace detail {

// Row-indexed view of a layer for sparse row-times-matrix products.
struct RowView {
  std::vector<std::vector<std::pair<std::size_t, double>>> rows;
  std::vector<double> bias_dense;

  explicit RowView(const SparseLayer& layer)
      : rows(layer.rows), bias_dense(layer.rows, 0.0) {
    for (const Triplet& t : layer.weights) rows[t.row].push_back({t.col, t.value});
    for (const BiasEntry& b : layer.bias) bias_dense[b.index] = b.value;
  }
};

// Source layer k of column j: the largest k with off[k] <= j (k = 0 is the
// input block).
inline std::size_t source_layer(const std::vector<std::size_t>& off, std::size_t j) {
  return static_cast<std::size_t>(
      std::upper_bound(off.begin(), off.end(), j) - off.begin()) - 1;
}

}  // namespace detail

// Composition f after g: g's hidden layers are kept, and every layer of f has
// its input block multiplied into g's output layer (bias included). Realizes
// x -> f(g(x)) with depth L_f + L_g - 1.
inline Network concatenate(const Network& f, const Network& g) {
  validated(f);
  validated(g);
  if (f.input_dim != g.output_dim())
    throw NetworkError("concatenate: f expects input dimension " +
                       std::to_string(f.input_dim) + " but g outputs " +
                       std::to_string(g.output_dim()));
  const std::size_t d_f = f.input_dim;
  const SparseLayer& g_last = g.layers.back();
  const std::size_t c_g = g_last.cols;  // column space shared by composed layers
  detail::RowView g_view(g_last);

  Network out;
  out.input_dim = g.input_dim;
  out.layers.assign(g.layers.begin(), g.layers.end() - 1);

  std::size_t extra_cols = 0;  // widths of f's layers already emitted
  for (const SparseLayer& src : f.layers) {
    SparseLayer dst;
    dst.rows = src.rows;
    dst.cols = c_g + extra_cols;

    // Products from the input block can collide and cancel, so they are
    // accumulated before storing; exact zeros are dropped by add_weight.
    std::map<std::pair<std::size_t, std::size_t>, double> products;
    std::map<std::size_t, double> bias_acc;
    for (const Triplet& t : src.weights) {
      if (t.col < d_f) {
        for (const auto& [col, w] : g_view.rows[t.col])
          products[{t.row, col}] += t.value * w;
        if (g_view.bias_dense[t.col] != 0.0)
          bias_acc[t.row] += t.value * g_view.bias_dense[t.col];
      } else {
        add_weight(dst, t.row, t.col - d_f + c_g, t.value);
      }
    }
    for (const BiasEntry& b : src.bias) bias_acc[b.index] += b.value;
    for (const auto& [pos, v] : products) add_weight(dst, pos.first, pos.second, v);
    for (const auto& [i, v] : bias_acc) add_bias(dst, i, v);
    sort_layer(dst);
    out.layers.push_back(std::move(dst));
    extra_cols += src.rows;
  }
  return out;
}

// f (.) g := f * identity * g. Depth adds exactly; weights and neurons at
// most double. Unlike plain concatenation this never multiplies weight
// matrices, which keeps cancellation-sensitive constructions bitwise exact.
inline Network sparse_concatenate(const Network& f, const Network& g) {
  if (f.input_dim != g.output_dim())
    throw NetworkError("sparse_concatenate: f expects input dimension " +
                       std::to_string(f.input_dim) + " but g outputs " +
                       std::to_string(g.output_dim()));
  return concatenate(f, concatenate(identity_network(g.output_dim()), g));
}

// Side-by-side stacking of networks over a shared input. Shallower networks
// defer their affine output layer to the final layer, reading their earlier
// activations through skip connections; this keeps M = sum M_i and
// N = sum N_i - (n-1) d exact.
inline Network parallelize(const std::vector<Network>& nets) {
  if (nets.empty()) throw NetworkError("parallelize: empty network list");
  const std::size_t d = nets[0].input_dim;
  std::size_t depth = 0;
  for (const Network& n : nets) {
    validated(n);
    if (n.input_dim != d)
      throw NetworkError("parallelize: mismatched input dimensions");
    depth = std::max(depth, n.depth());
  }

  // Net i contributes its layer l as global hidden rows iff l <= L_i - 1;
  // output layers all land in the global layer `depth`.
  std::vector<std::vector<std::size_t>> row_offset(
      depth + 1, std::vector<std::size_t>(nets.size(), 0));
  std::vector<std::size_t> global_width(depth + 1, 0);
  for (std::size_t l = 1; l < depth; ++l) {
    std::size_t acc = 0;
    for (std::size_t i = 0; i < nets.size(); ++i) {
      row_offset[l][i] = acc;
      if (l <= nets[i].depth() - 1) acc += nets[i].layers[l - 1].rows;
    }
    global_width[l] = acc;
  }
  {
    std::size_t acc = 0;
    for (std::size_t i = 0; i < nets.size(); ++i) {
      row_offset[depth][i] = acc;
      acc += nets[i].output_dim();
    }
    global_width[depth] = acc;
  }

  std::vector<std::size_t> global_col(depth + 1, 0);  // block start per source layer
  {
    std::size_t acc = d;
    for (std::size_t k = 1; k <= depth; ++k) {
      global_col[k] = acc;
      acc += global_width[k];
    }
  }

  Network out;
  out.input_dim = d;
  out.layers.resize(depth);
  for (std::size_t i = 0; i < nets.size(); ++i) {
    const std::vector<std::size_t> off = col_offsets(nets[i]);
    auto map_col = [&](std::size_t j) -> std::size_t {
      if (j < d) return j;
      const std::size_t k = detail::source_layer(off, j);
      return global_col[k] + row_offset[k][i] + (j - off[k]);
    };
    for (std::size_t l = 1; l <= depth; ++l) {
      std::size_t src_layer;
      if (l == depth)
        src_layer = nets[i].depth();
      else if (l <= nets[i].depth() - 1)
        src_layer = l;
      else
        continue;
      const SparseLayer& src = nets[i].layers[src_layer - 1];
      SparseLayer& dst = out.layers[l - 1];
      const std::size_t r0 = row_offset[l][i];
      for (const Triplet& t : src.weights)
        dst.weights.push_back({r0 + t.row, map_col(t.col), t.value});
      for (const BiasEntry& b : src.bias) dst.bias.push_back({r0 + b.index, b.value});
    }
  }
  for (std::size_t l = 1; l <= depth; ++l) {
    out.layers[l - 1].rows = global_width[l];
    out.layers[l - 1].cols = global_col[l];
    sort_layer(out.layers[l - 1]);
  }
  return out;
}

inline Network parallelize(const Network& a, const Network& b) {
  return parallelize(std::vector<Network>{a, b});
}

// True iff no layer reads anything but the immediately preceding layer (layer
// 1 reads the input).
inline bool is_standard(const Network& net) {
  const std::vector<std::size_t> off = col_offsets(net);
  for (std::size_t l = 1; l < net.layers.size(); ++l)
    for (const Triplet& t : net.layers[l].weights)
      if (t.col < off[l]) return false;
  return true;
}

// Removes skip connections. Each hidden layer of the result carries the state
// z_l = (relu(x0), relu(-x0), x_1, ..., x_l) forward through identity rows;
// consumers rebuild x0 as relu(x0) - relu(-x0). Realization and depth are
// unchanged; N_st <= 2 L N and M_st <= 2 (L N + M).
inline Network to_standard(const Network& net) {
  validated(net);
  const std::size_t L = net.depth();
  if (L == 1) return net;  // one affine layer has no skip connections
  const std::size_t d = net.input_dim;
  const std::vector<std::size_t> off = col_offsets(net);

  // Width of z_l and the position of layer k's activations inside z.
  auto z_width = [&](std::size_t l) {
    return 2 * d + (off[l] - d) + net.layers[l - 1].rows;
  };
  auto zpos = [&](std::size_t k) { return 2 * d + (off[k] - d); };

  Network out;
  out.input_dim = d;
  out.layers.resize(L);
  std::size_t col_acc = d;    // column count of the layer being built
  std::size_t prev_base = 0;  // global column where layer l-1's rows start
  for (std::size_t l = 1; l <= L; ++l) {
    const SparseLayer& src = net.layers[l - 1];
    SparseLayer& dst = out.layers[l - 1];
    const bool last = l == L;
    dst.rows = last ? src.rows : z_width(l);
    dst.cols = col_acc;
    if (l == 1) {
      for (std::size_t i = 0; i < d; ++i) {
        add_weight(dst, i, i, 1.0);
        add_weight(dst, d + i, i, -1.0);
      }
      for (const Triplet& t : src.weights)
        dst.weights.push_back({2 * d + t.row, t.col, t.value});
      for (const BiasEntry& b : src.bias) dst.bias.push_back({2 * d + b.index, b.value});
    } else {
      const std::size_t carry = z_width(l - 1);
      const std::size_t new_row0 = last ? 0 : carry;
      if (!last)
        for (std::size_t r = 0; r < carry; ++r) add_weight(dst, r, prev_base + r, 1.0);
      for (const Triplet& t : src.weights) {
        if (t.col < d) {
          dst.weights.push_back({new_row0 + t.row, prev_base + t.col, t.value});
          dst.weights.push_back({new_row0 + t.row, prev_base + d + t.col, -t.value});
        } else {
          const std::size_t k = detail::source_layer(off, t.col);
          dst.weights.push_back(
              {new_row0 + t.row, prev_base + zpos(k) + (t.col - off[k]), t.value});
        }
      }
      for (const BiasEntry& b : src.bias)
        dst.bias.push_back({new_row0 + b.index, b.value});
    }
    sort_layer(dst);
    prev_base = col_acc;
    col_acc += dst.rows;
  }
  return out;
}

}  // namespace sobonet
