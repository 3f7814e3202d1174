#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdint>
#include <vector>

#include <sobonet/lb_probe.hpp>

using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;
using namespace sobonet;

namespace {

// Central difference of a lower-order bump derivative along one axis; used to
// cross-check the closed-form derivative one order up.
double bump_fd(const MultiIndex& lower, std::size_t axis, std::vector<double> z,
               double h) {
  z[axis] += h;
  const double plus = detail::radial_bump_derivative(lower, z);
  z[axis] -= 2.0 * h;
  const double minus = detail::radial_bump_derivative(lower, z);
  return (plus - minus) / (2.0 * h);
}

void check_close(double exact, double approx, double rel, double floor) {
  if (std::abs(exact) < floor) {
    CHECK_THAT(approx, WithinAbs(exact, floor));
  } else {
    CHECK_THAT(approx, WithinRel(exact, rel));
  }
}

BuildOptions fast_options() {
  BuildOptions opts;
  opts.norm_budget = 20000;
  opts.search_budget = 10000;
  return opts;
}

Network affine_line(double slope, double intercept) {
  SparseLayer layer;
  layer.rows = 1;
  layer.cols = 1;
  add_weight(layer, 0, 0, slope);
  add_bias(layer, 0, intercept);
  Network net;
  net.input_dim = 1;
  net.layers.push_back(layer);
  return validated(net);
}

}  // namespace

TEST_CASE("radial bump value, support, and exact quarter-point slope") {
  const std::vector<double> origin{0.0};
  CHECK(detail::radial_bump_derivative(MultiIndex{0}, origin) == 1.0);

  // At scaled radius 1/4 the value is e^{-1/3} and the slope is -(32/9)e^{-1/3}.
  const std::vector<double> quarter{0.25};
  CHECK_THAT(detail::radial_bump_derivative(MultiIndex{0}, quarter),
             WithinRel(std::exp(-1.0 / 3.0), 1e-14));
  CHECK_THAT(detail::radial_bump_derivative(MultiIndex{1}, quarter),
             WithinRel(-32.0 / 9.0 * std::exp(-1.0 / 3.0), 1e-14));

  for (unsigned k = 0; k <= 3; ++k) {
    CHECK(detail::radial_bump_derivative(MultiIndex{k}, std::vector<double>{0.5}) ==
          0.0);
    CHECK(detail::radial_bump_derivative(MultiIndex{k}, std::vector<double>{-0.7}) ==
          0.0);
  }
  const std::vector<double> outside{0.4, 0.4};
  CHECK(detail::radial_bump_derivative(MultiIndex{1, 0}, outside) == 0.0);
}

TEST_CASE("radial bump derivatives match finite differences in one dimension") {
  const double h = 1e-5;
  for (double z0 : {0.05, -0.18, 0.31, 0.42}) {
    const std::vector<double> z{z0};
    for (unsigned k = 1; k <= 3; ++k) {
      const double exact = detail::radial_bump_derivative(MultiIndex{k}, z);
      const double approx = bump_fd(MultiIndex{k - 1}, 0, z, h);
      check_close(exact, approx, 1e-4, 1e-6);
    }
  }
  // Odd symmetry of the first derivative, even symmetry of the second.
  const std::vector<double> plus{0.2};
  const std::vector<double> minus{-0.2};
  CHECK(detail::radial_bump_derivative(MultiIndex{1}, plus) ==
        -detail::radial_bump_derivative(MultiIndex{1}, minus));
  CHECK(detail::radial_bump_derivative(MultiIndex{2}, plus) ==
        detail::radial_bump_derivative(MultiIndex{2}, minus));
}

TEST_CASE("radial bump derivatives match finite differences in two dimensions") {
  const double h = 1e-5;
  const std::vector<std::vector<double>> points{
      {0.1, -0.2}, {0.3, 0.1}, {-0.05, 0.41}};
  for (const std::vector<double>& z : points) {
    check_close(detail::radial_bump_derivative(MultiIndex{1, 0}, z),
                bump_fd(MultiIndex{0, 0}, 0, z, h), 1e-4, 1e-6);
    check_close(detail::radial_bump_derivative(MultiIndex{0, 1}, z),
                bump_fd(MultiIndex{0, 0}, 1, z, h), 1e-4, 1e-6);
    check_close(detail::radial_bump_derivative(MultiIndex{2, 0}, z),
                bump_fd(MultiIndex{1, 0}, 0, z, h), 1e-4, 1e-6);
    check_close(detail::radial_bump_derivative(MultiIndex{0, 2}, z),
                bump_fd(MultiIndex{0, 1}, 1, z, h), 1e-4, 1e-6);
    check_close(detail::radial_bump_derivative(MultiIndex{1, 1}, z),
                bump_fd(MultiIndex{1, 0}, 1, z, h), 1e-4, 1e-6);
  }
}

TEST_CASE("radial bump derivative rejects unsupported orders") {
  CHECK_THROWS_AS(
      detail::radial_bump_derivative(MultiIndex{4}, std::vector<double>{0.1}),
      NetworkError);
  CHECK_THROWS_AS(
      detail::radial_bump_derivative(MultiIndex{2, 1}, std::vector<double>{0.1, 0.1}),
      NetworkError);
}

TEST_CASE("radial bump Sobolev norms match frozen scan values") {
  // Dense deterministic scans; values frozen from this implementation.
  CHECK_THAT(detail::cached_bump_norm(1, 2), WithinRel(84.2635284715539, 1e-12));
  CHECK_THAT(detail::cached_bump_norm(1, 3), WithinRel(4053.50014942777, 1e-12));
  CHECK_THAT(detail::cached_bump_norm(2, 2), WithinRel(84.2635281865606, 1e-12));
  // The order-2 peak sits on an axis, so the planar norm matches the line norm.
  CHECK_THAT(detail::cached_bump_norm(2, 2),
             WithinRel(detail::cached_bump_norm(1, 2), 1e-6));
}

TEST_CASE("bump family geometry on the line") {
  const BumpFamily fam = make_bump_family(1, 2, 4, 1.0, {1, 0, 1, 1});
  REQUIRE(fam.points.size() == 4);
  REQUIRE(fam.probes.size() == 4);
  REQUIRE(fam.directions.size() == 4);
  for (std::size_t m = 0; m < 4; ++m) {
    CHECK(fam.points[m][0] == static_cast<double>(m) / 4.0);
    CHECK(fam.directions[m][0] == 1.0);
    CHECK_THAT(fam.probes[m][0], WithinAbs(static_cast<double>(m) / 4.0 + 1.0 / 16.0,
                                           1e-15));
  }
  const double quarter_slope = 32.0 / 9.0 * std::exp(-1.0 / 3.0);
  CHECK_THAT(fam.slope_scale,
             WithinRel(quarter_slope / detail::cached_bump_norm(1, 2), 1e-13));
  CHECK_THAT(fam.threshold, WithinRel(fam.slope_scale / 4.0 / 2.0, 1e-13));
  CHECK(fam.bits == std::vector<std::uint8_t>{1, 0, 1, 1});

  // Pairwise grid distances are at least 1/N.
  for (std::size_t a = 0; a < 4; ++a)
    for (std::size_t b = a + 1; b < 4; ++b)
      CHECK(std::abs(fam.points[a][0] - fam.points[b][0]) >= 0.25 - 1e-12);
}

TEST_CASE("bump family geometry in the plane keeps probes inside the cube") {
  const BumpFamily fam = make_bump_family(2, 2, 2, 3.0, {1, 1, 1, 1});
  REQUIRE(fam.points.size() == 4);
  // Lexicographic grid order with the last axis fastest.
  CHECK(fam.points[0] == std::vector<double>{0.0, 0.0});
  CHECK(fam.points[1] == std::vector<double>{0.0, 0.5});
  CHECK(fam.points[2] == std::vector<double>{0.5, 0.0});
  CHECK(fam.points[3] == std::vector<double>{0.5, 0.5});

  const double half_sqrt2 = 1.0 / std::sqrt(2.0);
  CHECK_THAT(fam.directions[0][0], WithinRel(half_sqrt2, 1e-15));
  CHECK_THAT(fam.directions[0][1], WithinRel(half_sqrt2, 1e-15));
  CHECK(fam.directions[1] == std::vector<double>{1.0, 0.0});
  CHECK(fam.directions[2] == std::vector<double>{0.0, 1.0});
  CHECK(fam.directions[3] == std::vector<double>{1.0, 0.0});

  for (const std::vector<double>& probe : fam.probes)
    for (double c : probe) {
      CHECK(c >= 0.0);
      CHECK(c <= 1.0);
    }
  // Every direction is a unit vector, so probes sit at distance 1/(4N).
  for (std::size_t m = 0; m < 4; ++m) {
    double dist2 = 0.0;
    for (std::size_t i = 0; i < 2; ++i) {
      const double diff = fam.probes[m][i] - fam.points[m][i];
      dist2 += diff * diff;
    }
    CHECK_THAT(std::sqrt(dist2), WithinRel(1.0 / 8.0, 1e-13));
  }
}

TEST_CASE("bump family rejects unsupported configurations") {
  CHECK_THROWS_AS(make_bump_family(3, 2, 2, 1.0, std::vector<std::uint8_t>(8, 1)),
                  NetworkError);
  CHECK_THROWS_AS(make_bump_family(1, 4, 2, 1.0, std::vector<std::uint8_t>(2, 1)),
                  NetworkError);
  CHECK_THROWS_AS(make_bump_family(2, 3, 2, 1.0, std::vector<std::uint8_t>(4, 1)),
                  NetworkError);
  CHECK_THROWS_AS(make_bump_family(1, 2, 0, 1.0, std::vector<std::uint8_t>{}),
                  NetworkError);
  CHECK_THROWS_AS(make_bump_family(1, 2, 2, 0.0, std::vector<std::uint8_t>(2, 1)),
                  NetworkError);
  CHECK_THROWS_AS(make_bump_family(1, 2, 2, 1.0, std::vector<std::uint8_t>(3, 1)),
                  NetworkError);
}

TEST_CASE("bump family function realizes planted bumps with disjoint supports") {
  const unsigned N = 4;
  const BumpFamily fam = make_bump_family(1, 2, N, 1.0, {1, 1, 1, 1});
  const DifferentiableFunction f = bump_family_function(fam);
  CHECK(f.dimension == 1);
  CHECK(f.order == 2);
  CHECK(f.norm_bound == 1.0);

  const double scale = std::pow(4.0, -2.0) / fam.bump_norm;
  for (std::size_t m = 0; m < 4; ++m) {
    const double center = static_cast<double>(m) / 4.0;
    CHECK_THAT(f.value(std::vector<double>{center}), WithinRel(scale, 1e-13));
    // Inward derivative at the probe point equals twice the decode threshold.
    CHECK_THAT(f.derivative(MultiIndex{1}, std::vector<double>{center + 1.0 / 16.0}),
               WithinRel(-2.0 * fam.threshold, 1e-12));
  }
  // Supports are balls of radius 1/(2N) = 1/8 around the centers.
  CHECK(f.value(std::vector<double>{0.125}) == 0.0);
  CHECK(f.value(std::vector<double>{0.625}) == 0.0);
  CHECK(f.value(std::vector<double>{0.95}) == 0.0);

  // The family stays inside the W^{2,inf} ball of radius B.
  for (unsigned k = 0; k <= 2; ++k) {
    double sup = 0.0;
    for (int i = 0; i <= 2000; ++i) {
      const double x = static_cast<double>(i) / 2000.0;
      sup = std::max(sup, std::abs(f.derivative(MultiIndex{k},
                                                std::vector<double>{x})));
    }
    CHECK(sup <= 1.0 + 1e-12);
  }
}

TEST_CASE("bump family function honours the bit pattern") {
  const BumpFamily fam = make_bump_family(1, 2, 4, 2.0, {0, 1, 0, 1});
  const DifferentiableFunction f = bump_family_function(fam);
  const double scale = 2.0 * std::pow(4.0, -2.0) / fam.bump_norm;
  CHECK(f.value(std::vector<double>{0.0}) == 0.0);
  CHECK_THAT(f.value(std::vector<double>{0.25}), WithinRel(scale, 1e-13));
  CHECK(f.value(std::vector<double>{0.5}) == 0.0);
  CHECK_THAT(f.value(std::vector<double>{0.75}), WithinRel(scale, 1e-13));

  const DifferentiableFunction zero = bump_family(1, 2, 4, 1.0, {0, 0, 0, 0});
  for (int i = 0; i <= 40; ++i) {
    const double x = static_cast<double>(i) / 40.0;
    CHECK(zero.value(std::vector<double>{x}) == 0.0);
    CHECK(zero.derivative(MultiIndex{1}, std::vector<double>{x}) == 0.0);
  }
}

TEST_CASE("decode thresholds the inward difference quotient of an affine line") {
  const BumpFamily fam = make_bump_family(1, 2, 2, 1.0, {1, 1});
  // R(x) = -3 thr x has inward quotient +3 thr at both probes: all ones.
  const Network steep = affine_line(-3.0 * fam.threshold, 0.7);
  const DecodeReport ones = decode_with_margins(steep, fam);
  CHECK(ones.bits == std::vector<std::uint8_t>{1, 1});
  REQUIRE(ones.quotients.size() == 2);
  for (double g : ones.quotients) CHECK_THAT(g, WithinRel(3.0 * fam.threshold, 1e-9));
  CHECK_THAT(ones.min_margin, WithinRel(2.0 * fam.threshold, 1e-9));

  // R(x) = x has inward quotient -1: all zeros, margin 1 + thr.
  const Network rising = affine_line(1.0, 0.0);
  const DecodeReport zeros = decode_with_margins(rising, fam);
  CHECK(zeros.bits == std::vector<std::uint8_t>{0, 0});
  CHECK_THAT(zeros.min_margin, WithinRel(1.0 + fam.threshold, 1e-9));
  CHECK(decode(rising, fam) == zeros.bits);
}

TEST_CASE("decode rejects mismatched networks") {
  const BumpFamily fam = make_bump_family(1, 2, 2, 1.0, {1, 0});
  SparseLayer layer;
  layer.rows = 1;
  layer.cols = 2;
  add_weight(layer, 0, 0, 1.0);
  add_weight(layer, 0, 1, 1.0);
  Network wide;
  wide.input_dim = 2;
  wide.layers.push_back(layer);
  CHECK_THROWS_AS(decode_with_margins(validated(wide), fam), NetworkError);

  SparseLayer pair_out;
  pair_out.rows = 2;
  pair_out.cols = 1;
  add_weight(pair_out, 0, 0, 1.0);
  add_weight(pair_out, 1, 0, -1.0);
  Network two_outputs;
  two_outputs.input_dim = 1;
  two_outputs.layers.push_back(pair_out);
  CHECK_THROWS_AS(decode_with_margins(validated(two_outputs), fam), NetworkError);
}

TEST_CASE("probe accuracy target scales like the threshold") {
  const BumpFamily line = make_bump_family(1, 3, 4, 2.5, std::vector<std::uint8_t>(4, 1));
  CHECK_THAT(probe_epsilon(line),
             WithinRel(line.slope_scale * std::pow(4.0, -2.0) / 6.0, 1e-13));
  const BumpFamily plane = make_bump_family(2, 2, 2, 1.0, std::vector<std::uint8_t>(4, 1));
  CHECK_THAT(probe_epsilon(plane),
             WithinRel(plane.slope_scale * 0.5 / (6.0 * std::sqrt(2.0)), 1e-13));
  // One third of the inward slope survives as decoding margin.
  CHECK(3.0 * probe_epsilon(line) * std::sqrt(1.0) <
        line.slope_scale * std::pow(4.0, -2.0));
}

TEST_CASE("a calibrated build of a planted pattern decodes correctly") {
  const BumpFamily fam = make_bump_family(1, 2, 2, 1.0, {1, 0});
  const DifferentiableFunction f = bump_family_function(fam);
  const ApproximantBuild build = build_approximant(
      f, 2, kInfiniteOrder, 1.0, 1.0, probe_epsilon(fam), fast_options());
  CHECK(build.achieved <= probe_epsilon(fam));
  const DecodeReport report = decode_with_margins(build.net, fam);
  CHECK(report.bits == std::vector<std::uint8_t>{1, 0});
  CHECK(report.min_margin > 0.4 * fam.threshold);
}

TEST_CASE("exhaustive pattern probe shatters the two-point grid") {
  const ProbeReport report = probe_patterns(1, 2, 2, 1.0, fast_options());
  CHECK(report.d == 1);
  CHECK(report.n == 2);
  CHECK(report.N == 2);
  REQUIRE(report.patterns.size() == 4);
  CHECK(report.all_ok);
  CHECK(report.min_margin > 0.0);
  CHECK(report.achieved <= report.eps);
  CHECK(report.N_grid >= 1);

  const BumpFamily fam = make_bump_family(1, 2, 2, 1.0, {1, 1});
  CHECK(report.threshold == fam.threshold);
  CHECK(report.eps == probe_epsilon(fam));

  double worst = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < report.patterns.size(); ++i) {
    CHECK(report.patterns[i].id == i);
    CHECK(report.patterns[i].ok);
    worst = std::min(worst, report.patterns[i].min_margin);
  }
  CHECK(report.min_margin == worst);
}

TEST_CASE("pattern probe refuses grids too large to enumerate") {
  CHECK_THROWS_AS(probe_patterns(1, 2, 11, 1.0), NetworkError);
  CHECK_THROWS_AS(probe_patterns(2, 2, 4, 1.0), NetworkError);
}
