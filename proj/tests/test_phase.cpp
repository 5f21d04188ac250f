#include "doctest.h"

#include <cmath>
#include <numbers>
#include <random>

#include "tlphase/phase.hpp"

using namespace tlphase;

namespace {

TaskSpec phase_spec(Activation phi, double alpha_s, double alpha_t, double rho) {
  TaskSpec s;
  s.alpha_s = alpha_s;
  s.alpha_t = alpha_t;
  s.rho = rho;
  s.lambda = 0.0;
  if (phi == Activation::Sign) {
    s.loss = {Loss::Squared, LossForm::Classification};
    s.phi = Activation::Sign;
    s.phi_hat = Activation::Sign;
    s.upsilon = 1;
  } else {
    s.loss = {Loss::Squared, LossForm::Regression};
    s.phi = phi;
    s.phi_hat = Activation::Identity;
    s.upsilon = 0;
  }
  return s;
}

}  // namespace

TEST_CASE("rho_c formula values and poles") {
  CHECK(rho_c(Activation::Relu, 4.0, 2.0).rho_c ==
        doctest::Approx(2.0 / 3.0).epsilon(1e-14));
  CHECK(rho_c(Activation::Relu, 3.0, 3.0).rho_c == doctest::Approx(1.0).epsilon(1e-14));
  // more target than source data: boundary above 1, never transfer
  CHECK(rho_c(Activation::Relu, 2.0, 4.0).rho_c > 1.0);
  CHECK_THROWS_AS(rho_c(Activation::Relu, 4.0, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(rho_c(Activation::Relu, 0.5, 2.0), std::invalid_argument);
}

TEST_CASE("rho_c is increasing in alpha_t and decreasing in alpha_s") {
  for (Activation phi : {Activation::Relu, Activation::Sign}) {
    for (double at : {1.5, 2.0, 3.0}) {
      for (double as : {2.0, 4.0, 8.0}) {
        const double base = rho_c(phi, as, at).rho_c;
        CHECK(rho_c(phi, as, at + 0.1).rho_c > base);
        CHECK(rho_c(phi, as + 0.1, at).rho_c < base);
      }
    }
  }
}

TEST_CASE("regression delta-star follows the sign of Z_t") {
  CHECK(delta_star_regression(phase_spec(Activation::Relu, 4.0, 2.0, 0.5)) ==
        DeltaStar::Zero);
  CHECK(delta_star_regression(phase_spec(Activation::Relu, 4.0, 2.0, 0.9)) ==
        DeltaStar::One);
  // Z_t sign matches the rho_c comparison across a rho grid.
  const double boundary = rho_c(Activation::Relu, 4.0, 2.0).rho_c;
  for (int i = 0; i < 20; ++i) {
    const double rho = 0.02 + 0.96 * i / 19.0;
    const DeltaStar ds = delta_star_regression(phase_spec(Activation::Relu, 4.0, 2.0, rho));
    if (rho < boundary - 1e-9) CHECK(ds == DeltaStar::Zero);
    if (rho > boundary + 1e-9) CHECK(ds == DeltaStar::One);
  }
}

TEST_CASE("g threshold value and edge cases") {
  // direct arithmetic oracle from the printed formula
  const double pi = std::numbers::pi;
  const double expected =
      1.0 - 4.0 * (1.0 - 2.0 / pi) / (3.0 * (8.0 / pi + 2.0 - 4.0 / pi));
  CHECK(g_threshold(2.0, 4.0) == doctest::Approx(expected).epsilon(1e-14));
  CHECK(g_threshold(2.0, 4.0) == doctest::Approx(0.85198).epsilon(1e-4));
  CHECK(g_threshold(3.0, 3.0) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK_THROWS_AS(g_threshold(1.0, 4.0), std::invalid_argument);
  // g <= 1 whenever alpha_s >= alpha_t > 1
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(1.05, 10.0);
  for (int i = 0; i < 100; ++i) {
    double at = u(rng), as = u(rng);
    if (at > as) std::swap(at, as);
    CHECK(g_threshold(at, as) <= 1.0 + 1e-12);
  }
}

TEST_CASE("classification cubic coefficients and sign structure") {
  const TaskSpec at_rho1 = phase_spec(Activation::Sign, 4.0, 2.0, 1.0);
  const ClassCubic cc1 = class_cubic(at_rho1);
  CHECK(cc1.a_coef == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(cc1.k1 == doctest::Approx(0.0).epsilon(1e-15));

  // Z4 sign agrees with the rho-vs-g comparison on a grid.
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> ua(1.05, 9.0);
  std::uniform_real_distribution<double> ur(-0.99, 0.99);
  for (int k = 0; k < 50; ++k) {
    double at = ua(rng), as = ua(rng);
    if (at > as) std::swap(at, as);
    as += 0.05;
    const double g = g_threshold(at, as);
    const double rho = ur(rng);
    if (std::abs(rho - g) < 1e-10) continue;
    const ClassCubic cc = class_cubic(phase_spec(Activation::Sign, as, at, rho));
    CHECK((cc.z4 > 0.0) == (rho > g));
  }
}

TEST_CASE("cubic h tracks the derivative sign of the alignment curve") {
  const Moments mom = moments(Activation::Sign);
  for (double rho : {0.3, 0.7, 0.95}) {
    const TaskSpec spec = phase_spec(Activation::Sign, 4.5, 2.0, rho);
    const ClassCubic cc = class_cubic(spec);
    for (int i = 1; i < 20; ++i) {
      const double delta = i / 20.0;
      const double h = 1e-7;
      const double fd = (cc.g(delta + h, spec.alpha_t, mom.c) -
                         cc.g(delta - h, spec.alpha_t, mom.c)) /
                        (2.0 * h);
      if (std::abs(fd) < 1e-6) continue;  // too close to a stationary point
      CHECK((cc.h(delta) > 0.0) == (fd > 0.0));
    }
  }
}

TEST_CASE("numeric delta-star sweep matches the closed-form curve") {
  const Moments mom = moments(Activation::Relu);
  TaskSpec spec = phase_spec(Activation::Relu, 4.0, 2.0, 0.5);
  const SaddleSolution source = solve_source(spec);
  const DeltaCurve curve = delta_star_numeric(spec, source, 101);
  REQUIRE(curve.delta.size() == 101);
  const double beta1 = spec.rho * source.q;
  const double beta2 =
      (1.0 - spec.rho * spec.rho) * source.q * source.q + source.r * source.r;
  for (std::size_t i = 0; i < curve.delta.size(); ++i) {
    const double d = curve.delta[i];
    const double expected =
        spec.alpha_t / (spec.alpha_t + d - 1.0) *
        (d * ((mom.c - beta1) * (mom.c - beta1) + beta2) + (mom.v - mom.c * mom.c));
    CHECK(std::abs(curve.e_test[i] - expected) < 1e-6);
  }
  // far below the boundary: no transfer; far above: full transfer
  CHECK(curve.delta_star == 0.0);
  spec.rho = 0.9;
  const SaddleSolution source_hi = solve_source(spec);
  CHECK(delta_star_numeric(spec, source_hi, 101).delta_star == 1.0);
}

TEST_CASE("boundary sweep rows are argmin-consistent") {
  TaskSpec spec = phase_spec(Activation::Relu, 4.0, 2.0, 0.5);
  const auto rows = boundary_sweep(spec, {0.60, 0.72}, {2.0}, 81);
  REQUIRE(rows.size() == 2);
  for (const auto& row : rows) {
    CHECK(row.e_test_star <= row.e_test_none + 1e-12);
    CHECK(row.e_test_star <= row.e_test_full + 1e-12);
    CHECK(row.rho_c == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
  }
  CHECK(rows[0].delta_star == 0.0);  // rho 0.60 below the 2/3 boundary
  CHECK(rows[1].delta_star == 1.0);  // rho 0.72 above it
}

TEST_CASE("sign-sign curve decreases at delta 0 when Z4 is positive") {
  const TaskSpec spec = phase_spec(Activation::Sign, 6.0, 1.8, 0.97);
  const ClassCubic cc = class_cubic(spec);
  REQUIRE(cc.z4 > 0.0);
  const SaddleSolution source = solve_source(spec);
  const DeltaCurve curve = delta_star_numeric(spec, source, 101);
  CHECK(curve.e_test[1] < curve.e_test[0]);
}
