#pragma once

// Deterministic random inputs for property tests: valid skip networks with a
// random subset of all earlier outputs wired into each layer, plus uniform
// sample points. Everything is driven by a caller-owned engine so each test
// pins its own seed.

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <random>
#include <vector>

#include <sobonet/network.hpp>

namespace sobonet::testing {

struct RandomNetworkOptions {
  std::size_t min_input = 1;
  std::size_t max_input = 3;
  std::size_t min_layers = 1;
  std::size_t max_layers = 4;
  std::size_t max_rows = 5;
  double density = 0.6;
  double bias_density = 0.5;
};

inline Network random_network(std::mt19937_64& rng,
                              const RandomNetworkOptions& opt = {}) {
  std::uniform_int_distribution<std::size_t> dim(opt.min_input, opt.max_input);
  std::uniform_int_distribution<std::size_t> depth(opt.min_layers, opt.max_layers);
  std::uniform_int_distribution<std::size_t> rows(1, opt.max_rows);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_real_distribution<double> weight(-2.0, 2.0);

  Network net;
  net.input_dim = dim(rng);
  std::size_t cols = net.input_dim;
  const std::size_t L = depth(rng);
  for (std::size_t l = 0; l < L; ++l) {
    SparseLayer layer;
    layer.rows = rows(rng);
    layer.cols = cols;
    for (std::size_t r = 0; r < layer.rows; ++r) {
      bool any = false;
      for (std::size_t c = 0; c < cols; ++c)
        if (unit(rng) < opt.density) {
          add_weight(layer, r, c, weight(rng));
          any = true;
        }
      if (!any) add_weight(layer, r, cols - 1, weight(rng));
      if (unit(rng) < opt.bias_density) add_bias(layer, r, weight(rng));
    }
    cols += layer.rows;
    net.layers.push_back(std::move(layer));
  }
  validated(net);
  return net;
}

// Random network with a fixed input dimension, for pairing under composition
// and parallelization.
inline Network random_network_with_input(std::mt19937_64& rng, std::size_t d,
                                         RandomNetworkOptions opt = {}) {
  opt.min_input = d;
  opt.max_input = d;
  return random_network(rng, opt);
}

inline std::vector<double> random_point(std::mt19937_64& rng, std::size_t d,
                                        double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> coord(lo, hi);
  std::vector<double> x(d);
  for (double& c : x) c = coord(rng);
  return x;
}

// Named constructor for span-friendly inline points.
inline std::vector<double> pt(std::initializer_list<double> coords) { return coords; }

}  // namespace sobonet::testing
