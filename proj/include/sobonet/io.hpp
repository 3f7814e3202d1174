#pragma once

// Interchange formats. Networks and patch sets serialize to JSON with
// shortest round-trip number formatting, so save/load of finite doubles is
// bit-exact. Reports serialize to CSV with the same number formatting; given
// identical inputs the emitted bytes are identical.

#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "approximator.hpp"
#include "lb_probe.hpp"
#include "network.hpp"
#include "sobolev.hpp"
#include "taylor.hpp"

namespace sobonet {

// { "input_dim": d, "layers": [ { "rows": r, "cols": c,
//   "triplets": [[i, j, v], ...], "bias": [[i, v], ...] } ] }
inline nlohmann::json to_json(const Network& net) {
  nlohmann::json layers = nlohmann::json::array();
  for (const SparseLayer& layer : net.layers) {
    nlohmann::json triplets = nlohmann::json::array();
    for (const Triplet& t : layer.weights)
      triplets.push_back({t.row, t.col, t.value});
    nlohmann::json bias = nlohmann::json::array();
    for (const BiasEntry& b : layer.bias) bias.push_back({b.index, b.value});
    layers.push_back({{"rows", layer.rows},
                      {"cols", layer.cols},
                      {"triplets", std::move(triplets)},
                      {"bias", std::move(bias)}});
  }
  return {{"input_dim", net.input_dim}, {"layers", std::move(layers)}};
}

inline nlohmann::json to_json(const Architecture& arch) { return to_json(arch.mask); }

inline Network network_from_json(const nlohmann::json& j) try {
  Network net;
  net.input_dim = j.at("input_dim").get<std::size_t>();
  for (const nlohmann::json& jl : j.at("layers")) {
    SparseLayer layer;
    layer.rows = jl.at("rows").get<std::size_t>();
    layer.cols = jl.at("cols").get<std::size_t>();
    for (const nlohmann::json& jt : jl.at("triplets")) {
      if (!jt.is_array() || jt.size() != 3)
        throw NetworkError("network JSON: triplets must be [row, col, value]");
      layer.weights.push_back(
          {jt[0].get<std::size_t>(), jt[1].get<std::size_t>(), jt[2].get<double>()});
    }
    for (const nlohmann::json& jb : jl.at("bias")) {
      if (!jb.is_array() || jb.size() != 2)
        throw NetworkError("network JSON: bias entries must be [index, value]");
      layer.bias.push_back({jb[0].get<std::size_t>(), jb[1].get<double>()});
    }
    net.layers.push_back(std::move(layer));
  }
  validated(net);
  return net;
} catch (const nlohmann::json::exception& e) {
  throw NetworkError(std::string("network JSON: ") + e.what());
}

inline Architecture architecture_from_json(const nlohmann::json& j) {
  return architecture_of(network_from_json(j));
}

inline void save_network(const Network& net, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw NetworkError("cannot open '" + path + "' for writing");
  out << to_json(net).dump(2) << '\n';
  if (!out) throw NetworkError("write to '" + path + "' failed");
}

inline Network load_network(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw NetworkError("cannot open '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw NetworkError("parse error in '" + path + "': " + e.what());
  }
  return network_from_json(j);
}

// { "N": N, "n": n, "patches": [ { "m": [..],
//   "coeffs": [ { "alpha": [..], "c": v } ] } ] }
struct PatchSet {
  unsigned N = 1;
  unsigned n = 1;
  std::vector<PolynomialPatch> patches;
};

inline nlohmann::json to_json(const PatchSet& set) {
  nlohmann::json arr = nlohmann::json::array();
  for (const PolynomialPatch& patch : set.patches) {
    nlohmann::json coeffs = nlohmann::json::array();
    for (const auto& [alpha, c] : patch.coeffs)
      coeffs.push_back({{"alpha", alpha}, {"c", c}});
    arr.push_back({{"m", patch.m}, {"coeffs", std::move(coeffs)}});
  }
  return {{"N", set.N}, {"n", set.n}, {"patches", std::move(arr)}};
}

inline PatchSet patches_from_json(const nlohmann::json& j) try {
  PatchSet set;
  set.N = j.at("N").get<unsigned>();
  set.n = j.at("n").get<unsigned>();
  for (const nlohmann::json& jp : j.at("patches")) {
    PolynomialPatch patch;
    patch.m = jp.at("m").get<GridIndex>();
    for (const nlohmann::json& jc : jp.at("coeffs"))
      patch.coeffs.emplace_back(jc.at("alpha").get<MultiIndex>(),
                                jc.at("c").get<double>());
    set.patches.push_back(std::move(patch));
  }
  return set;
} catch (const nlohmann::json::exception& e) {
  throw NetworkError(std::string("patch JSON: ") + e.what());
}

// Shortest decimal that parses back to the same double; infinities spelled
// out because JSON has no literal for them.
inline std::string format_double(double v) {
  if (std::isinf(v)) return v > 0.0 ? "inf" : "-inf";
  return nlohmann::json(v).dump();
}

inline std::string norms_csv(const std::vector<NormReport>& reports) {
  std::string out = "p,s,value,samples,seed,method\n";
  for (const NormReport& r : reports) {
    out += format_double(r.p) + ',' + format_double(r.s) + ',' +
           format_double(r.value) + ',' + std::to_string(r.samples) + ',' +
           std::to_string(r.seed) + ',' + r.method + '\n';
  }
  return out;
}

inline std::string sweep_csv(const std::vector<SweepRow>& rows) {
  std::string out = "eps,error_s0,error_s1,error_target_s,L,M,N,N_grid,seconds\n";
  for (const SweepRow& r : rows) {
    out += format_double(r.eps) + ',' + format_double(r.error_s0) + ',' +
           format_double(r.error_s1) + ',' + format_double(r.error_target_s) + ',' +
           std::to_string(r.L) + ',' + std::to_string(r.M) + ',' +
           std::to_string(r.N) + ',' + std::to_string(r.N_grid) + ',' +
           format_double(r.seconds) + '\n';
  }
  return out;
}

inline std::string probe_csv(const ProbeReport& report) {
  std::string out = "pattern,ok,min_margin\n";
  for (const PatternResult& p : report.patterns)
    out += std::to_string(p.id) + ',' + (p.ok ? "1" : "0") + ',' +
           format_double(p.min_margin) + '\n';
  return out;
}

inline nlohmann::json to_json(const ComplexityAudit& audit) {
  return {{"L", audit.L},         {"M", audit.M},   {"N", audit.N},
          {"eps", audit.eps},     {"N_grid", audit.N_grid},
          {"mode", audit.mode}};
}

// Calibration table: JSON object keyed "d,n" with measured constants,
// e.g. { "1,2": 2.5, "1,3": 3.0 }.
using CalibrationTable = std::map<std::pair<std::size_t, unsigned>, double>;

inline CalibrationTable load_calibration(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw NetworkError("cannot open calibration file '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw NetworkError("parse error in '" + path + "': " + e.what());
  }
  CalibrationTable table;
  for (const auto& [key, value] : j.items()) {
    const std::size_t comma = key.find(',');
    if (comma == std::string::npos)
      throw NetworkError("calibration key '" + key + "' is not of the form d,n");
    try {
      const std::size_t d = std::stoul(key.substr(0, comma));
      const unsigned n = static_cast<unsigned>(std::stoul(key.substr(comma + 1)));
      table[{d, n}] = value.get<double>();
    } catch (const std::exception&) {
      throw NetworkError("calibration entry '" + key + "' is malformed");
    }
  }
  return table;
}

inline void save_calibration(const CalibrationTable& table, const std::string& path) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [key, value] : table)
    j[std::to_string(key.first) + ',' + std::to_string(key.second)] = value;
  std::ofstream out(path);
  if (!out) throw NetworkError("cannot open '" + path + "' for writing");
  out << j.dump(2) << '\n';
  if (!out) throw NetworkError("write to '" + path + "' failed");
}

}  // namespace sobonet
