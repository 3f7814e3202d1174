#pragma once

// Sparse skip-connection ReLU networks.
//
// A network is an ordered list of layers; layer l (1-based) owns a weight
// matrix with N_l rows and d + N_1 + ... + N_{l-1} columns, so every layer
// reads the input|x_0 and all previous activations (skip connections).
// Matrices and biases are stored sparsely as explicit nonzeros only; the
// weight count M is the number of stored entries, which is why construction
// code must never store an exact zero.

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace sobonet {

// Recoverable contract violation (dimension mismatch, bad parameter range).
class NetworkError : public std::runtime_error {
 public:
  explicit NetworkError(const std::string& what) : std::runtime_error(what) {}
};

struct Triplet {
  std::size_t row = 0;
  std::size_t col = 0;
  double value = 0.0;
};

struct BiasEntry {
  std::size_t index = 0;
  double value = 0.0;
};

// One layer: rows x cols sparse matrix plus sparse bias of length rows.
// Canonical entry order is row-major for weights, ascending index for bias;
// all construction in this library maintains it.
struct SparseLayer {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<Triplet> weights;
  std::vector<BiasEntry> bias;

  std::size_t stored_entries() const { return weights.size() + bias.size(); }
};

// Appends an entry unless it is an exact zero (stored zeros would inflate M).
inline void add_weight(SparseLayer& layer, std::size_t row, std::size_t col,
                       double value) {
  if (value != 0.0) layer.weights.push_back({row, col, value});
}

inline void add_bias(SparseLayer& layer, std::size_t index, double value) {
  if (value != 0.0) layer.bias.push_back({index, value});
}

// Restores canonical order after out-of-order appends.
inline void sort_layer(SparseLayer& layer) {
  std::sort(layer.weights.begin(), layer.weights.end(),
            [](const Triplet& a, const Triplet& b) {
              return a.row != b.row ? a.row < b.row : a.col < b.col;
            });
  std::sort(layer.bias.begin(), layer.bias.end(),
            [](const BiasEntry& a, const BiasEntry& b) {
              return a.index < b.index;
            });
}

struct Network {
  std::size_t input_dim = 0;
  std::vector<SparseLayer> layers;

  std::size_t depth() const { return layers.size(); }  // L
  std::size_t output_dim() const { return layers.empty() ? 0 : layers.back().rows; }

  // M: stored nonzeros over all weight matrices and biases. Exact, not a bound.
  std::size_t weight_count() const {
    std::size_t m = 0;
    for (const auto& l : layers) m += l.stored_entries();
    return m;
  }

  // N: input width plus all layer widths (the output layer counts).
  std::size_t neuron_count() const {
    std::size_t n = input_dim;
    for (const auto& l : layers) n += l.rows;
    return n;
  }

  // {d, N_1, ..., N_L}
  std::vector<std::size_t> widths() const {
    std::vector<std::size_t> w;
    w.reserve(layers.size() + 1);
    w.push_back(input_dim);
    for (const auto& l : layers) w.push_back(l.rows);
    return w;
  }
};

// col_offsets[k] is the first column of source layer k in any weight matrix;
// k = 0 is the input block at column 0. col_offsets[l] equals the column
// count of layer l's matrix.
inline std::vector<std::size_t> col_offsets(const Network& net) {
  std::vector<std::size_t> off(net.layers.size() + 1);
  off[0] = 0;
  std::size_t acc = net.input_dim;
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    off[l + 1] = acc;
    acc += net.layers[l].rows;
  }
  return off;
}

// Validates the structural invariants and returns the network unchanged.
// Throws NetworkError on violation. Duplicate entries are a violation: the
// sparse representation must be a function position -> value.
inline const Network& validated(const Network& net) {
  if (net.input_dim == 0) throw NetworkError("network input dimension must be positive");
  if (net.layers.empty()) throw NetworkError("network must have at least one layer");
  std::size_t cols_expected = net.input_dim;
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    const SparseLayer& layer = net.layers[l];
    if (layer.rows == 0) throw NetworkError("layer width must be positive");
    if (layer.cols != cols_expected)
      throw NetworkError("layer " + std::to_string(l + 1) + " has " +
                         std::to_string(layer.cols) + " columns, expected " +
                         std::to_string(cols_expected));
    for (std::size_t i = 1; i < layer.weights.size(); ++i) {
      const Triplet& a = layer.weights[i - 1];
      const Triplet& b = layer.weights[i];
      if (a.row > b.row || (a.row == b.row && a.col >= b.col))
        throw NetworkError("weights out of canonical order or duplicated");
    }
    for (const Triplet& t : layer.weights)
      if (t.row >= layer.rows || t.col >= layer.cols)
        throw NetworkError("weight entry out of range");
    for (std::size_t i = 1; i < layer.bias.size(); ++i)
      if (layer.bias[i - 1].index >= layer.bias[i].index)
        throw NetworkError("bias out of canonical order or duplicated");
    for (const BiasEntry& b : layer.bias)
      if (b.index >= layer.rows) throw NetworkError("bias entry out of range");
    cols_expected += layer.rows;
  }
  return net;
}

// Bitwise equality, including the stored values (distinguishes -0.0 from 0.0).
inline bool bit_equal(double a, double b) {
  return std::bit_cast<std::uint64_t>(a) == std::bit_cast<std::uint64_t>(b);
}

inline bool bit_equal(const Network& a, const Network& b) {
  if (a.input_dim != b.input_dim || a.layers.size() != b.layers.size()) return false;
  for (std::size_t l = 0; l < a.layers.size(); ++l) {
    const SparseLayer& la = a.layers[l];
    const SparseLayer& lb = b.layers[l];
    if (la.rows != lb.rows || la.cols != lb.cols) return false;
    if (la.weights.size() != lb.weights.size() || la.bias.size() != lb.bias.size())
      return false;
    for (std::size_t i = 0; i < la.weights.size(); ++i) {
      if (la.weights[i].row != lb.weights[i].row ||
          la.weights[i].col != lb.weights[i].col ||
          !bit_equal(la.weights[i].value, lb.weights[i].value))
        return false;
    }
    for (std::size_t i = 0; i < la.bias.size(); ++i) {
      if (la.bias[i].index != lb.bias[i].index ||
          !bit_equal(la.bias[i].value, lb.bias[i].value))
        return false;
    }
  }
  return true;
}

// -----------------------------------------------------------------------------
// Realization
// -----------------------------------------------------------------------------

// x_l = relu(A_l [x_0; ...; x_{l-1}] + b_l) for l < L; the last layer is
// affine. Accumulation visits stored entries in canonical order, so results
// are deterministic.
inline std::vector<double> realize(const Network& net, std::span<const double> x) {
  if (x.size() != net.input_dim)
    throw NetworkError("realize: input has length " + std::to_string(x.size()) +
                       ", network expects " + std::to_string(net.input_dim));
  std::vector<double> act(net.neuron_count(), 0.0);
  std::copy(x.begin(), x.end(), act.begin());
  std::size_t offset = net.input_dim;
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    const SparseLayer& layer = net.layers[l];
    double* out = act.data() + offset;
    for (const BiasEntry& b : layer.bias) out[b.index] = b.value;
    for (const Triplet& t : layer.weights) out[t.row] += t.value * act[t.col];
    if (l + 1 < net.layers.size())
      for (std::size_t i = 0; i < layer.rows; ++i) out[i] = std::max(0.0, out[i]);
    offset += layer.rows;
  }
  return {act.end() - static_cast<std::ptrdiff_t>(net.output_dim()), act.end()};
}

// Flattened copy of a network for repeated realization: contiguous 32-bit
// slot indexes, flat value arrays, and a reusable activation buffer. Entries
// are visited in the same canonical order as realize, so outputs are bitwise
// identical. Stateful: one instance per evaluating thread.
class CompiledNetwork {
 public:
  explicit CompiledNetwork(const Network& net) {
    validated(net);
    input_dim_ = net.input_dim;
    output_dim_ = net.output_dim();
    slots_ = net.neuron_count();
    if (slots_ > 0xffffffffull)
      throw NetworkError("CompiledNetwork: too many neurons for 32-bit indexing");
    layers_.reserve(net.layers.size());
    std::size_t offset = net.input_dim;
    for (const SparseLayer& layer : net.layers) {
      for (const BiasEntry& b : layer.bias) {
        bias_slot_.push_back(static_cast<std::uint32_t>(offset + b.index));
        bias_val_.push_back(b.value);
      }
      for (const Triplet& t : layer.weights) {
        w_dst_.push_back(static_cast<std::uint32_t>(offset + t.row));
        w_src_.push_back(static_cast<std::uint32_t>(t.col));
        w_val_.push_back(t.value);
      }
      layers_.push_back({static_cast<std::uint32_t>(offset),
                         static_cast<std::uint32_t>(layer.rows), bias_slot_.size(),
                         w_dst_.size()});
      offset += layer.rows;
    }
    act_.resize(slots_);
  }

  std::size_t input_dim() const { return input_dim_; }
  std::size_t output_dim() const { return output_dim_; }

  // Returns a view of the outputs; valid until the next call.
  std::span<const double> operator()(std::span<const double> x) {
    if (x.size() != input_dim_)
      throw NetworkError("CompiledNetwork: input has length " + std::to_string(x.size()) +
                         ", network expects " + std::to_string(input_dim_));
    std::fill(act_.begin(), act_.end(), 0.0);
    std::copy(x.begin(), x.end(), act_.begin());
    std::size_t bb = 0;
    std::size_t wb = 0;
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      const LayerMeta& m = layers_[l];
      for (; bb < m.bias_end; ++bb) act_[bias_slot_[bb]] = bias_val_[bb];
      for (; wb < m.weight_end; ++wb) act_[w_dst_[wb]] += w_val_[wb] * act_[w_src_[wb]];
      if (l + 1 < layers_.size()) {
        double* a = act_.data() + m.first_slot;
        for (std::uint32_t i = 0; i < m.rows; ++i) a[i] = std::max(0.0, a[i]);
      }
    }
    return {act_.data() + (slots_ - output_dim_), output_dim_};
  }

 private:
  struct LayerMeta {
    std::uint32_t first_slot = 0;
    std::uint32_t rows = 0;
    std::size_t bias_end = 0;    // exclusive prefix end into the flat arrays
    std::size_t weight_end = 0;
  };

  std::size_t input_dim_ = 0;
  std::size_t output_dim_ = 0;
  std::size_t slots_ = 0;
  std::vector<LayerMeta> layers_;
  std::vector<std::uint32_t> bias_slot_;
  std::vector<double> bias_val_;
  std::vector<std::uint32_t> w_dst_;
  std::vector<std::uint32_t> w_src_;
  std::vector<double> w_val_;
  std::vector<double> act_;
};

inline std::vector<double> realize(CompiledNetwork& net, std::span<const double> x) {
  const std::span<const double> out = net(x);
  return {out.begin(), out.end()};
}

// -----------------------------------------------------------------------------
// Architecture
// -----------------------------------------------------------------------------

// Sparsity mask: same shape as a network, every stored entry is 1.0. The
// weight ordering is the canonical entry order (per layer: matrix entries
// row-major, then bias entries by index), which fixes the bijection between
// weight vectors of length M and networks with this architecture.
struct Architecture {
  Network mask;

  std::size_t weight_count() const { return mask.weight_count(); }
};

inline Architecture architecture_of(const Network& net) {
  Architecture arch{net};
  for (SparseLayer& layer : arch.mask.layers) {
    for (Triplet& t : layer.weights) t.value = 1.0;
    for (BiasEntry& b : layer.bias) b.value = 1.0;
  }
  return arch;
}

// True iff widths match and every stored nonzero of net sits at a mask entry.
// Entries of net that store 0.0 are not nonzeros and do not violate the mask.
inline bool has_architecture(const Network& net, const Architecture& arch) {
  const Network& mask = arch.mask;
  if (net.input_dim != mask.input_dim || net.layers.size() != mask.layers.size())
    return false;
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    const SparseLayer& ln = net.layers[l];
    const SparseLayer& lm = mask.layers[l];
    if (ln.rows != lm.rows || ln.cols != lm.cols) return false;
    std::size_t j = 0;
    for (const Triplet& t : ln.weights) {
      if (t.value == 0.0) continue;
      while (j < lm.weights.size() &&
             (lm.weights[j].row < t.row ||
              (lm.weights[j].row == t.row && lm.weights[j].col < t.col)))
        ++j;
      if (j == lm.weights.size() || lm.weights[j].row != t.row ||
          lm.weights[j].col != t.col)
        return false;
    }
    j = 0;
    for (const BiasEntry& b : ln.bias) {
      if (b.value == 0.0) continue;
      while (j < lm.bias.size() && lm.bias[j].index < b.index) ++j;
      if (j == lm.bias.size() || lm.bias[j].index != b.index) return false;
    }
  }
  return true;
}

// Stored values in canonical order; length is M(net).
inline std::vector<double> weights_of(const Network& net) {
  std::vector<double> w;
  w.reserve(net.weight_count());
  for (const SparseLayer& layer : net.layers) {
    for (const Triplet& t : layer.weights) w.push_back(t.value);
    for (const BiasEntry& b : layer.bias) w.push_back(b.value);
  }
  return w;
}

// Places w over the mask positions in canonical order. Exact zeros in w are
// dropped from storage (the result then has strictly fewer stored entries but
// still has the architecture). Inverse of weights_of for canonical networks.
inline Network instantiate(const Architecture& arch, std::span<const double> w) {
  if (w.size() != arch.weight_count())
    throw NetworkError("instantiate: weight vector length " +
                       std::to_string(w.size()) + " does not match M = " +
                       std::to_string(arch.weight_count()));
  Network net = arch.mask;
  std::size_t k = 0;
  for (SparseLayer& layer : net.layers) {
    SparseLayer out;
    out.rows = layer.rows;
    out.cols = layer.cols;
    for (const Triplet& t : layer.weights) add_weight(out, t.row, t.col, w[k++]);
    for (const BiasEntry& b : layer.bias) add_bias(out, b.index, w[k++]);
    layer = std::move(out);
  }
  return net;
}

}  // namespace sobonet
