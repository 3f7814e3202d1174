// Sampled Sobolev norm estimators: grid L^p, first-order seminorms, and the
// fractional Slobodeckij quotient.

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numbers>
#include <vector>

#include <sobonet/constructions.hpp>
#include <sobonet/functions.hpp>
#include <sobonet/sobolev.hpp>

namespace {

using namespace sobonet;

// f(x) = x^2 on d = 1 with derivatives through order 2.
DifferentiableFunction square_reference() {
  DifferentiableFunction f;
  f.dimension = 1;
  f.order = 2;
  f.derivative = [](const MultiIndex& a, std::span<const double> x) {
    switch (a[0]) {
      case 0: return x[0] * x[0];
      case 1: return 2.0 * x[0];
      case 2: return 2.0;
      default: return 0.0;
    }
  };
  return f;
}

// f(x, y) = x y on d = 2.
DifferentiableFunction product_reference() {
  DifferentiableFunction f;
  f.dimension = 2;
  f.order = 2;
  f.derivative = [](const MultiIndex& a, std::span<const double> x) {
    if (a[0] == 0 && a[1] == 0) return x[0] * x[1];
    if (a[0] == 1 && a[1] == 0) return x[1];
    if (a[0] == 0 && a[1] == 1) return x[0];
    if (a[0] == 1 && a[1] == 1) return 1.0;
    return 0.0;
  };
  return f;
}

}  // namespace

TEST_CASE("Lp norms match closed-form integrals") {
  const ScalarFn line = [](std::span<const double> x) { return x[0]; };

  const NormReport sup = lp_norm(line, 1, kInfiniteOrder);
  CHECK(sup.value <= 1.0);
  CHECK_THAT(sup.value, Catch::Matchers::WithinAbs(1.0, 1e-4));
  CHECK(sup.samples == 100000);
  CHECK(sup.method == "grid");

  const NormReport two = lp_norm(line, 1, 2.0);
  CHECK_THAT(two.value, Catch::Matchers::WithinAbs(1.0 / std::sqrt(3.0), 1e-3));
  const NormReport one = lp_norm(line, 1, 1.0);
  CHECK_THAT(one.value, Catch::Matchers::WithinAbs(0.5, 1e-3));

  const ScalarFn zero = [](std::span<const double>) { return 0.0; };
  CHECK(lp_norm(zero, 1, kInfiniteOrder).value == 0.0);
  CHECK(lp_norm(zero, 2, 2.0).value == 0.0);

  const ScalarFn constant = [](std::span<const double>) { return -2.5; };
  CHECK(lp_norm(constant, 1, kInfiniteOrder).value == 2.5);
  CHECK_THAT(lp_norm(constant, 1, 2.0).value, Catch::Matchers::WithinAbs(2.5, 1e-12));

  const ScalarFn plane = [](std::span<const double> x) { return x[0] + x[1]; };
  const NormReport plane2 = lp_norm(plane, 2, 2.0);
  CHECK_THAT(plane2.value, Catch::Matchers::WithinAbs(std::sqrt(7.0 / 6.0), 1e-3));
  CHECK(plane2.samples == 316 * 316);

  CHECK_THROWS_AS(lp_norm(line, 1, 0.5), std::invalid_argument);
}

TEST_CASE("first-order seminorms combine partial derivatives") {
  const GradientFn parabola = [](std::span<const double> x) {
    return std::vector<double>{2.0 * x[0]};
  };
  const NormReport sup = w1p_seminorm(parabola, 1, kInfiniteOrder);
  CHECK(sup.value <= 2.0);
  CHECK_THAT(sup.value, Catch::Matchers::WithinAbs(2.0, 1e-4));
  CHECK(sup.s == 1.0);

  // Affine targets have constant gradients, so the estimate is exact.
  const GradientFn slope3 = [](std::span<const double>) {
    return std::vector<double>{3.0};
  };
  CHECK(w1p_seminorm(slope3, 1, kInfiniteOrder).value == 3.0);
  CHECK_THAT(w1p_seminorm(slope3, 1, 2.0).value, Catch::Matchers::WithinAbs(3.0, 1e-12));

  const GradientFn tilt = [](std::span<const double>) {
    return std::vector<double>{2.0, -1.0};
  };
  CHECK(w1p_seminorm(tilt, 2, kInfiniteOrder).value == 2.0);
  CHECK_THAT(w1p_seminorm(tilt, 2, 2.0).value,
             Catch::Matchers::WithinAbs(std::sqrt(5.0), 1e-12));

  CHECK_THROWS_AS(w1p_seminorm(slope3, 1, 0.0), std::invalid_argument);
}

TEST_CASE("squaring network derivative error stays under the segment bound") {
  const Network net = squaring_network(3);
  const DifferentiableFunction f = square_reference();
  const GradientFn diff = [&](std::span<const double> x) {
    EvalResult r = eval_with_jacobian(net, x);
    return std::vector<double>{r.jacobian[0] - 2.0 * x[0]};
  };
  const NormReport semi = w1p_seminorm(diff, 1, kInfiniteOrder, 20000);
  // The true sup of the derivative error is exactly 2^-3, approached at the
  // segment ends; the shifted grid stays strictly below it.
  CHECK(semi.value <= 0.125);
  CHECK(semi.value >= 0.1249);
}

TEST_CASE("Slobodeckij quotient matches closed-form suprema") {
  const ScalarFn line = [](std::span<const double> x) { return x[0]; };
  const NormReport lin = slobodeckij_seminorm(line, 1, 0.5, kInfiniteOrder);
  CHECK(lin.value <= 1.0 + 1e-12);
  CHECK_THAT(lin.value, Catch::Matchers::WithinAbs(1.0, 0.01));
  CHECK(lin.method == "monte-carlo");

  const ScalarFn constant = [](std::span<const double>) { return 7.0; };
  CHECK(slobodeckij_seminorm(constant, 1, 0.5, kInfiniteOrder).value == 0.0);

  // sup (x^2 - y^2)/|x - y|^{1/2} on [0,1]^2 is (4/3)sqrt(2/3), attained at
  // y = 1, x = 1/3.
  const double parabola_sup = (4.0 / 3.0) * std::sqrt(2.0 / 3.0);
  const ScalarFn parabola = [](std::span<const double> x) { return x[0] * x[0]; };
  const NormReport par = slobodeckij_seminorm(parabola, 1, 0.5, kInfiniteOrder);
  CHECK(par.value <= parabola_sup + 1e-12);
  CHECK_THAT(par.value, Catch::Matchers::WithinAbs(parabola_sup, 0.02));

  // For g(x) = x, s = 1/2, p = 2 every pair contributes |x-y|^2/|x-y|^2 = 1.
  const NormReport unit = slobodeckij_seminorm(line, 1, 0.5, 2.0, 20000);
  CHECK_THAT(unit.value, Catch::Matchers::WithinAbs(1.0, 1e-12));

  CHECK_THROWS_AS(slobodeckij_seminorm(line, 1, 0.0, kInfiniteOrder),
                  std::invalid_argument);
  CHECK_THROWS_AS(slobodeckij_seminorm(line, 1, 1.0, kInfiniteOrder),
                  std::invalid_argument);
  CHECK_THROWS_AS(slobodeckij_seminorm(line, 1, 0.5, 0.5), std::invalid_argument);
}

TEST_CASE("estimators are deterministic given seed and budget") {
  const ScalarFn wave = [](std::span<const double> x) {
    return std::sin(4.0 * std::numbers::pi * x[0]);
  };
  const NormReport a = slobodeckij_seminorm(wave, 1, 0.5, kInfiniteOrder, 5000, 11);
  const NormReport b = slobodeckij_seminorm(wave, 1, 0.5, kInfiniteOrder, 5000, 11);
  CHECK(a.value == b.value);
  CHECK(a.samples == b.samples);
  const NormReport c = slobodeckij_seminorm(wave, 1, 0.5, kInfiniteOrder, 5000, 12);
  CHECK(a.value != c.value);

  CHECK(lp_norm(wave, 1, kInfiniteOrder, 5000).value ==
        lp_norm(wave, 1, kInfiniteOrder, 5000).value);
}

TEST_CASE("sup estimates grow toward the true value under refinement") {
  const ScalarFn wave = [](std::span<const double> x) {
    return std::sin(4.0 * std::numbers::pi * x[0]) + x[0];
  };
  const double lipschitz = 4.0 * std::numbers::pi + 1.0;
  double previous = 0.0;
  for (std::size_t budget : {500u, 1000u, 2000u, 4000u, 8000u}) {
    const NormReport r = lp_norm(wave, 1, kInfiniteOrder, budget);
    CHECK(r.value <= 2.0);
    // A refined grid may lose a lucky sample but never by more than one grid
    // cell's worth of variation.
    CHECK(r.value >= previous - lipschitz / static_cast<double>(budget));
    previous = r.value;
  }
  // True sup: the last interior maximum of sin(4 pi x) + x, near x = 0.6314.
  CHECK_THAT(previous, Catch::Matchers::WithinAbs(1.6282, 1e-3));
}

TEST_CASE("Sobolev error of an exact affine realization is zero") {
  Network net;
  net.input_dim = 1;
  SparseLayer layer;
  layer.rows = 1;
  layer.cols = 1;
  add_weight(layer, 0, 0, 2.0);
  add_bias(layer, 0, 1.0);
  net.layers.push_back(std::move(layer));

  DifferentiableFunction f;
  f.dimension = 1;
  f.order = 2;
  f.derivative = [](const MultiIndex& a, std::span<const double> x) {
    switch (a[0]) {
      case 0: return 2.0 * x[0] + 1.0;
      case 1: return 2.0;
      default: return 0.0;
    }
  };

  for (double s : {0.0, 0.5, 1.0}) {
    const NormReport r = wsp_error(net, f, s, kInfiniteOrder, 5000);
    CHECK(r.value == 0.0);
  }
}

TEST_CASE("squaring network meets its Sobolev error bounds") {
  const DifferentiableFunction f = square_reference();
  const Network net = squaring_network(4);

  const NormReport l_inf = wsp_error(net, f, 0.0, kInfiniteOrder, 20000);
  CHECK(l_inf.value <= std::pow(2.0, -10.0));
  CHECK(l_inf.value >= 0.9 * std::pow(2.0, -10.0));

  const NormReport w1 = wsp_error(net, f, 1.0, kInfiniteOrder, 20000);
  CHECK(w1.value <= std::pow(2.0, -4.0));
  CHECK(w1.value >= 0.9 * std::pow(2.0, -4.0));
  CHECK(w1.samples == 40000);

  const NormReport half = wsp_error(net, f, 0.5, kInfiniteOrder, 20000);
  CHECK(half.value <= 3.0 * std::sqrt(l_inf.value * w1.value));
  CHECK(half.value >= l_inf.value);
}

TEST_CASE("fractional error interpolates between integer orders") {
  const DifferentiableFunction fsq = square_reference();
  for (unsigned m : {2u, 3u, 4u}) {
    const Network net = squaring_network(m);
    const double e0 = wsp_error(net, fsq, 0.0, kInfiniteOrder, 20000).value;
    const double e1 = wsp_error(net, fsq, 1.0, kInfiniteOrder, 20000).value;
    const double eh = wsp_error(net, fsq, 0.5, kInfiniteOrder, 20000).value;
    INFO("squaring m=" << m);
    CHECK(eh <= 3.0 * std::sqrt(e0 * e1));
  }

  const DifferentiableFunction fxy = product_reference();
  for (double eps : {1e-1, 1e-2}) {
    const Network net = multiplication_network(1.0, eps);
    const double e0 = wsp_error(net, fxy, 0.0, kInfiniteOrder, 10000).value;
    const double e1 = wsp_error(net, fxy, 1.0, kInfiniteOrder, 10000).value;
    const double eh = wsp_error(net, fxy, 0.5, kInfiniteOrder, 10000).value;
    INFO("multiplication eps=" << eps);
    CHECK(eh <= 3.0 * std::sqrt(e0 * e1));
  }
}

TEST_CASE("Sobolev error rejects unusable arguments") {
  const DifferentiableFunction f = square_reference();
  CHECK_THROWS_AS(wsp_error(identity_network(2), f, 0.0, kInfiniteOrder, 100),
                  NetworkError);
  CHECK_THROWS_AS(
      wsp_error(squaring_network(1), make_function("sincos2", 2), 0.0, kInfiniteOrder, 100),
      NetworkError);
  CHECK_THROWS_AS(wsp_error(squaring_network(1), f, -0.1, kInfiniteOrder, 100),
                  std::invalid_argument);
  CHECK_THROWS_AS(wsp_error(squaring_network(1), f, 1.1, kInfiniteOrder, 100),
                  std::invalid_argument);
}
