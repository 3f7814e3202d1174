#pragma once

// Bit-pattern recovery from approximant derivatives. A smooth radial bump is
// planted at each point of a coarse grid according to a bit vector, one
// approximant is built per pattern on a shared architecture, and each bit is
// read back by thresholding a difference quotient taken over the first affine
// piece next to its grid point. Exhausting every pattern demonstrates that
// the shared architecture shatters the grid.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <utility>
#include <vector>

#include "approximator.hpp"
#include "constructions.hpp"
#include "evaluate.hpp"
#include "multiindex.hpp"
#include "network.hpp"
#include "taylor.hpp"

namespace sobonet {

namespace detail {

// D^alpha of the radial bump exp(1 - 1/(1 - 4|z|^2)) (value 1 at the origin,
// support |z| < 1/2). Writing the bump as e^g, the chain rule gives
//   g_j   = -8 z_j / u^2                          with u = 1 - 4|z|^2,
//   g_jk  = -8 delta_jk / u^2 - 128 z_j z_k / u^3,
// and the needed derivatives follow from D e^g = e^g (products of g's
// derivatives). Orders up to 3 are covered for d = 1 and up to 2 otherwise,
// which spans every supported probe configuration.
inline double radial_bump_derivative(const MultiIndex& alpha, std::span<const double> z) {
  double r2 = 0.0;
  for (double c : z) r2 += c * c;
  if (r2 >= 0.25) return 0.0;
  const double u = 1.0 - 4.0 * r2;
  const double psi = std::exp(1.0 - 1.0 / u);
  if (psi == 0.0) return 0.0;
  const unsigned k = order(alpha);
  if (k == 0) return psi;

  std::size_t axes[3] = {0, 0, 0};
  std::size_t pos = 0;
  for (std::size_t i = 0; i < alpha.size(); ++i)
    for (unsigned rep = 0; rep < alpha[i] && pos < 3; ++rep) axes[pos++] = i;

  const double u2 = u * u;
  if (k == 1) return psi * (-8.0 * z[axes[0]] / u2);

  const double u3 = u2 * u;
  const double u4 = u2 * u2;
  if (k == 2) {
    const double zj = z[axes[0]];
    const double zk = z[axes[1]];
    double sum = 64.0 * zj * zk / u4 - 128.0 * zj * zk / u3;
    if (axes[0] == axes[1]) sum -= 8.0 / u2;
    return psi * sum;
  }
  if (k == 3 && alpha.size() == 1) {
    const double zz = z[0];
    const double g1 = -8.0 * zz / u2;
    const double g2 = -8.0 / u2 - 128.0 * zz * zz / u3;
    const double g3 = -384.0 * zz / u3 - 3072.0 * zz * zz * zz / u4;
    return psi * (g1 * g1 * g1 + 3.0 * g1 * g2 + g3);
  }
  throw NetworkError("radial_bump_derivative: derivative order not supported");
}

// max over |alpha| <= n of sup |D^alpha bump|, by dense scan. The bump is
// even in every coordinate, so scanning the non-negative quadrant suffices.
inline double radial_bump_norm(std::size_t d, unsigned n) {
  const std::vector<MultiIndex> alphas = multi_indices_up_to(d, n);
  double best = 0.0;
  if (d == 1) {
    const std::size_t res = 400000;
    std::vector<double> z(1);
    for (std::size_t i = 0; i < res; ++i) {
      z[0] = 0.5 * static_cast<double>(i) / static_cast<double>(res);
      for (const MultiIndex& a : alphas)
        best = std::max(best, std::abs(radial_bump_derivative(a, z)));
    }
    return best;
  }
  if (d == 2) {
    const std::size_t coarse = 700;
    const double h = 0.5 / static_cast<double>(coarse);
    std::vector<double> z(2);
    for (const MultiIndex& a : alphas) {
      double peak = 0.0;
      double at0 = 0.0;
      double at1 = 0.0;
      for (std::size_t i = 0; i < coarse; ++i) {
        z[0] = h * static_cast<double>(i);
        for (std::size_t j = 0; j < coarse; ++j) {
          z[1] = h * static_cast<double>(j);
          const double v = std::abs(radial_bump_derivative(a, z));
          if (v > peak) {
            peak = v;
            at0 = z[0];
            at1 = z[1];
          }
        }
      }
      const std::size_t fine = 200;
      for (std::size_t i = 0; i <= fine; ++i) {
        z[0] = at0 + 2.0 * h * (static_cast<double>(i) / fine - 0.5);
        for (std::size_t j = 0; j <= fine; ++j) {
          z[1] = at1 + 2.0 * h * (static_cast<double>(j) / fine - 0.5);
          peak = std::max(peak, std::abs(radial_bump_derivative(a, z)));
        }
      }
      best = std::max(best, peak);
    }
    return best;
  }
  throw NetworkError("radial_bump_norm: only d <= 2 is supported");
}

inline double cached_bump_norm(std::size_t d, unsigned n) {
  static std::map<std::pair<std::size_t, unsigned>, double> cache;
  static std::mutex mutex;
  const std::lock_guard<std::mutex> lock(mutex);
  auto [it, fresh] = cache.try_emplace({d, n}, 0.0);
  if (fresh) it->second = radial_bump_norm(d, n);
  return it->second;
}

}  // namespace detail

// Geometry of a planted-bump family: one radial bump of scaled radius 1/2 per
// grid point m/N (m in {0..N-1}^d, lexicographic), switched on by its bit.
// The probe point of a grid point sits at distance 1/(4N) along the inward
// unit direction nu; the inward derivative of an active bump there equals
// slope_scale * N^{-(n-1)}, and the decoding threshold is half of that.
struct BumpFamily {
  std::size_t d = 1;
  unsigned n = 2;  // smoothness order; the family is bounded in W^{n,inf}
  unsigned N = 1;
  double B = 1.0;
  double bump_norm = 1.0;   // numeric ||bump||_{W^{n,inf}}
  double slope_scale = 0.0; // B * (32/9) e^{-1/3} / bump_norm
  double threshold = 0.0;   // slope_scale * N^{-(n-1)} / 2
  std::vector<GridIndex> grid;
  std::vector<std::vector<double>> points;      // x_m = m/N
  std::vector<std::vector<double>> directions;  // unit inward nu(x_m)
  std::vector<std::vector<double>> probes;      // x_m + nu(x_m)/(4N)
  std::vector<std::uint8_t> bits;
};

// Builds the family geometry. nu points along +e_k on every axis where the
// point touches 0 and equals e_1 at interior points, so all probe points stay
// inside [0,1]^d; pairwise grid distances are at least 1/N by construction
// and both invariants are checked. Supported configurations are tied to the
// analytic bump derivatives: d = 1 with n in {2,3} and d = 2 with n = 2.
inline BumpFamily make_bump_family(std::size_t d, unsigned n, unsigned N, double B,
                                   std::vector<std::uint8_t> bits) {
  const bool supported = (d == 1 && (n == 2 || n == 3)) || (d == 2 && n == 2);
  if (!supported)
    throw NetworkError("make_bump_family: supported configurations are d = 1 with "
                       "n in {2,3} and d = 2 with n = 2");
  if (N < 1) throw NetworkError("make_bump_family: N must be >= 1");
  if (!(B > 0.0)) throw NetworkError("make_bump_family: B must be positive");
  std::size_t count = 1;
  for (std::size_t i = 0; i < d; ++i) count *= N;
  if (bits.size() != count)
    throw NetworkError("make_bump_family: bit vector length must be N^d");

  BumpFamily fam;
  fam.d = d;
  fam.n = n;
  fam.N = N;
  fam.B = B;
  fam.bump_norm = detail::cached_bump_norm(d, n);
  // Inward slope of the unit bump at scaled radius 1/4: (32/9) e^{-1/3}.
  const double quarter_slope = 32.0 / 9.0 * std::exp(-1.0 / 3.0);
  fam.slope_scale = B * quarter_slope / fam.bump_norm;
  fam.threshold =
      fam.slope_scale *
      std::pow(static_cast<double>(N), -(static_cast<double>(n) - 1.0)) / 2.0;
  fam.bits = std::move(bits);

  GridIndex m(d, 0);
  for (std::size_t idx = 0; idx < count; ++idx) {
    fam.grid.push_back(m);
    std::vector<double> x(d);
    std::vector<double> nu(d, 0.0);
    for (std::size_t i = 0; i < d; ++i)
      x[i] = static_cast<double>(m[i]) / static_cast<double>(N);
    bool boundary = false;
    for (std::size_t i = 0; i < d; ++i) boundary = boundary || m[i] == 0;
    if (boundary) {
      double norm = 0.0;
      for (std::size_t i = 0; i < d; ++i) {
        nu[i] = m[i] == 0 ? 1.0 : 0.0;
        norm += nu[i] * nu[i];
      }
      norm = std::sqrt(norm);
      for (double& c : nu) c /= norm;
    } else {
      nu[0] = 1.0;
    }
    std::vector<double> probe(d);
    for (std::size_t i = 0; i < d; ++i)
      probe[i] = x[i] + nu[i] / (4.0 * static_cast<double>(N));
    for (double c : probe)
      if (!(c >= 0.0 && c <= 1.0))
        throw NetworkError("make_bump_family: probe point left the unit cube");
    fam.points.push_back(std::move(x));
    fam.directions.push_back(std::move(nu));
    fam.probes.push_back(std::move(probe));
    for (std::size_t i = d; i-- > 0;) {
      if (++m[i] < N) break;
      m[i] = 0;
    }
  }

  if (count <= 4096) {
    for (std::size_t a = 0; a < count; ++a)
      for (std::size_t b = a + 1; b < count; ++b) {
        double dist2 = 0.0;
        for (std::size_t i = 0; i < d; ++i) {
          const double diff = fam.points[a][i] - fam.points[b][i];
          dist2 += diff * diff;
        }
        if (std::sqrt(dist2) < 1.0 / static_cast<double>(N) - 1e-12)
          throw NetworkError("make_bump_family: grid points closer than 1/N");
      }
  }
  return fam;
}

// f(x) = sum over active bits of B N^{-n} / ||bump|| * bump(N (x - x_m)).
// The supports are disjoint balls of radius 1/(2N), so the only candidate
// bump at x is found by rounding N x to the nearest grid index. Derivatives
// are analytic up to order n - 1 and ||f||_{W^{n,inf}} <= B.
inline DifferentiableFunction bump_family_function(const BumpFamily& fam) {
  const std::size_t d = fam.d;
  const unsigned N = fam.N;
  const double scale =
      fam.B * std::pow(static_cast<double>(N), -static_cast<double>(fam.n)) /
      fam.bump_norm;
  auto bits = std::make_shared<const std::vector<std::uint8_t>>(fam.bits);
  DifferentiableFunction f;
  f.dimension = d;
  f.order = fam.n;
  f.norm_bound = fam.B;
  f.derivative = [d, N, scale, bits](const MultiIndex& alpha,
                                     std::span<const double> x) -> double {
    std::vector<double> z(d);
    std::size_t lin = 0;
    for (std::size_t i = 0; i < d; ++i) {
      const double zi = static_cast<double>(N) * x[i];
      const double mi = std::round(zi);
      if (mi < 0.0 || mi >= static_cast<double>(N)) return 0.0;
      z[i] = zi - mi;
      lin = lin * N + static_cast<std::size_t>(mi);
    }
    if (!(*bits)[lin]) return 0.0;
    const double deriv = detail::radial_bump_derivative(alpha, z);
    if (deriv == 0.0) return 0.0;
    return scale *
           std::pow(static_cast<double>(N), static_cast<double>(order(alpha))) * deriv;
  };
  return f;
}

inline DifferentiableFunction bump_family(std::size_t d, unsigned n, unsigned N,
                                          double B, std::vector<std::uint8_t> bits) {
  return bump_family_function(make_bump_family(d, n, N, B, std::move(bits)));
}

struct DecodeReport {
  std::vector<std::uint8_t> bits;
  std::vector<double> quotients;  // difference quotient g per grid point
  std::vector<double> margins;    // |g - threshold|
  double min_margin = 0.0;
};

// Reads one bit per grid point: walk from the probe point toward the grid
// point, restrict to the first affine piece of the realization, and threshold
// the difference quotient  g = (R(x~ - delta nu) - R(x~)) / delta.  delta is
// half the first interior breakpoint (or half the walk when no breakpoint is
// found), so it stays strictly inside the piece and the quotient equals the
// piece's directional slope.
inline DecodeReport decode_with_margins(const Network& net, const BumpFamily& fam) {
  if (net.input_dim != fam.d)
    throw NetworkError("decode: network input dimension does not match the family");
  if (net.layers.empty() || net.layers.back().rows != 1)
    throw NetworkError("decode: network must have exactly one output");
  CompiledNetwork compiled(net);
  DecodeReport out;
  const double t_max = 1.0 / (4.0 * static_cast<double>(fam.N));
  std::vector<double> minus_nu(fam.d);
  std::vector<double> shifted(fam.d);
  for (std::size_t idx = 0; idx < fam.points.size(); ++idx) {
    const std::vector<double>& nu = fam.directions[idx];
    const std::vector<double>& probe = fam.probes[idx];
    double norm = 0.0;
    for (double c : nu) norm += c * c;
    if (norm == 0.0) throw NetworkError("decode: degenerate probe direction");
    for (std::size_t i = 0; i < fam.d; ++i) minus_nu[i] = -nu[i];
    const std::optional<double> kink = first_breakpoint(compiled, probe, minus_nu, t_max);
    const double delta = (kink ? *kink : t_max) / 2.0;
    for (std::size_t i = 0; i < fam.d; ++i) shifted[i] = probe[i] - delta * nu[i];
    // The compiled evaluator returns a view of its own buffer, so each value
    // must be copied out before the next call.
    const double at_shifted = compiled(shifted)[0];
    const double at_probe = compiled(probe)[0];
    const double g = (at_shifted - at_probe) / delta;
    out.bits.push_back(g > fam.threshold ? 1 : 0);
    out.quotients.push_back(g);
    out.margins.push_back(std::abs(g - fam.threshold));
  }
  out.min_margin = *std::min_element(out.margins.begin(), out.margins.end());
  return out;
}

inline std::vector<std::uint8_t> decode(const Network& net, const BumpFamily& fam) {
  return decode_with_margins(net, fam).bits;
}

// Build accuracy for the probe, in the W^{1,inf} seminorm: half the slack the
// margin analysis tolerates, so correct decoding retains a margin of at least
// slope_scale * N^{-(n-1)} / 3 minus sampling error.
inline double probe_epsilon(const BumpFamily& fam) {
  return fam.slope_scale *
         std::pow(static_cast<double>(fam.N), -(static_cast<double>(fam.n) - 1.0)) /
         (6.0 * std::sqrt(static_cast<double>(fam.d)));
}

struct PatternResult {
  std::uint64_t id = 0;  // bit i of id is the bit of grid point i
  bool ok = false;
  double min_margin = 0.0;
};

struct ProbeReport {
  std::size_t d = 1;
  unsigned n = 2;
  unsigned N = 1;
  double B = 1.0;
  double eps = 0.0;        // shared build accuracy
  double threshold = 0.0;
  unsigned N_grid = 0;     // shared approximant grid density
  double eps_prime = 0.0;  // shared inner product tolerance
  double achieved = 0.0;   // measured W^{1,inf} error of the all-ones build
  std::vector<PatternResult> patterns;
  bool all_ok = false;
  double min_margin = 0.0;
};

// Decodes every bit pattern of the (d, n, N, B) family from approximants
// sharing one architecture. The all-ones pattern is built with the full
// calibrated pipeline; its grid density, inner tolerance, and term networks
// are then reused for every pattern by rewriting the coefficient row, which
// is bitwise identical to reassembling per pattern.
inline ProbeReport probe_patterns(std::size_t d, unsigned n, unsigned N, double B,
                                  const BuildOptions& opts = {}) {
  std::size_t count = 1;
  for (std::size_t i = 0; i < d; ++i) count *= N;
  if (count > 10)
    throw NetworkError("probe_patterns: exhaustive enumeration is limited to 10 grid "
                       "points (2^10 patterns)");

  const BumpFamily seed_family =
      make_bump_family(d, n, N, B, std::vector<std::uint8_t>(count, 1));
  const double eps = probe_epsilon(seed_family);
  const DifferentiableFunction f_ones = bump_family_function(seed_family);
  ApproximantBuild seed =
      build_approximant(f_ones, n, kInfiniteOrder, 1.0, B, eps, opts);

  ProbeReport report;
  report.d = d;
  report.n = n;
  report.N = N;
  report.B = B;
  report.eps = eps;
  report.threshold = seed_family.threshold;
  report.N_grid = seed.audit.N_grid;
  report.eps_prime = seed.eps_prime;
  report.achieved = seed.achieved;
  report.all_ok = true;
  report.min_margin = std::numeric_limits<double>::infinity();

  Network net = std::move(seed.net);
  for (std::uint64_t id = 0; id < (std::uint64_t{1} << count); ++id) {
    std::vector<std::uint8_t> bits(count);
    for (std::size_t i = 0; i < count; ++i)
      bits[i] = static_cast<std::uint8_t>((id >> i) & 1u);
    const BumpFamily fam = make_bump_family(d, n, N, B, std::move(bits));
    const DifferentiableFunction f = bump_family_function(fam);
    const std::vector<PolynomialPatch> patches = build_patches(
        f, n, report.N_grid, kInfiniteOrder, opts.quadrature, opts.threads);
    reassign_coefficients(net, detail::patches_to_terms(patches));
    const DecodeReport dec = decode_with_margins(net, fam);
    const bool ok = dec.bits == fam.bits;
    report.patterns.push_back({id, ok, dec.min_margin});
    report.all_ok = report.all_ok && ok;
    report.min_margin = std::min(report.min_margin, dec.min_margin);
  }
  return report;
}

}  // namespace sobonet
