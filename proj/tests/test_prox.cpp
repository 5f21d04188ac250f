#include "doctest.h"

#include <cmath>
#include <random>

#include "tlphase/prox.hpp"

using namespace tlphase;

namespace {

double inner_objective(const LossKind& loss, double y, double a, double b, double c) {
  return loss_value(loss, y, c) + (c - a) * (c - a) / (2.0 * b);
}

// Independent 1-D oracle: coarse grid scan followed by golden-section
// refinement of the envelope's inner objective.
double grid_golden_prox(const LossKind& loss, double y, double a, double b) {
  const double span = 5.0 + 5.0 * b + std::abs(a) + std::abs(y);
  double lo = a - span, hi = a + span;
  double best = lo, best_val = inner_objective(loss, y, a, b, lo);
  const int n = 4001;
  for (int i = 1; i < n; ++i) {
    const double c = lo + (hi - lo) * i / (n - 1);
    const double val = inner_objective(loss, y, a, b, c);
    if (val < best_val) {
      best_val = val;
      best = c;
    }
  }
  double gl = best - (hi - lo) / (n - 1), gh = best + (hi - lo) / (n - 1);
  const double phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double x1 = gh - phi * (gh - gl), x2 = gl + phi * (gh - gl);
  double f1 = inner_objective(loss, y, a, b, x1);
  double f2 = inner_objective(loss, y, a, b, x2);
  for (int it = 0; it < 120; ++it) {
    if (f1 < f2) {
      gh = x2; x2 = x1; f2 = f1;
      x1 = gh - phi * (gh - gl);
      f1 = inner_objective(loss, y, a, b, x1);
    } else {
      gl = x1; x1 = x2; f1 = f2;
      x2 = gl + phi * (gh - gl);
      f2 = inner_objective(loss, y, a, b, x2);
    }
  }
  return 0.5 * (gl + gh);
}

// Generic numeric prox via safeguarded Newton on the scaled stationarity
// residual; used as a second independent route for the squared loss.
double newton_prox_squared(double y, double a, double b) {
  double c = a;
  for (int it = 0; it < 60; ++it) {
    const double g = b * (c - y) + (c - a);
    const double h = b + 1.0;
    const double next = c - g / h;
    if (next == c) break;
    c = next;
  }
  return c;
}

const LossKind kSq{Loss::Squared, LossForm::Regression};
const LossKind kLg{Loss::Logistic, LossForm::Classification};
const LossKind kHg{Loss::Hinge, LossForm::Classification};

}  // namespace

TEST_CASE("prox frozen examples") {
  CHECK(prox(kSq, 1.0, 0.0, 1.0) == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(prox(kHg, 1.0, 2.0, 1.0) == 2.0);  // hinge inactive when y*a >= 1
  CHECK(prox(kHg, 1.0, 0.0, 0.5) == doctest::Approx(0.5).epsilon(1e-14));
  CHECK_THROWS_AS(prox(kSq, 1.0, 0.0, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(moreau(kSq, 1.0, 0.0, -1.0), std::invalid_argument);
}

TEST_CASE("prox agrees with the grid+golden oracle") {
  std::mt19937_64 rng(101);
  std::uniform_real_distribution<double> ua(-4.0, 4.0);
  std::uniform_real_distribution<double> ub(0.05, 8.0);
  std::bernoulli_distribution sign_flip(0.5);
  for (int i = 0; i < 60; ++i) {
    const double a = ua(rng);
    const double b = ub(rng);
    const double y_cls = sign_flip(rng) ? 1.0 : -1.0;
    const double y_reg = ua(rng);
    CHECK(std::abs(prox(kSq, y_reg, a, b) - grid_golden_prox(kSq, y_reg, a, b)) < 1e-6);
    CHECK(std::abs(prox(kLg, y_cls, a, b) - grid_golden_prox(kLg, y_cls, a, b)) < 1e-6);
    CHECK(std::abs(prox(kHg, y_cls, a, b) - grid_golden_prox(kHg, y_cls, a, b)) < 1e-6);
  }
}

TEST_CASE("moreau frozen examples") {
  CHECK(moreau(kSq, 1.0, 0.0, 1.0).value == doctest::Approx(0.25).epsilon(1e-14));
  CHECK(moreau(kHg, 1.0, 0.0, 0.5).value == doctest::Approx(0.75).epsilon(1e-14));
  // b -> 0 limit recovers the loss itself.
  CHECK(std::abs(moreau(kLg, 1.0, 0.0, 1e-8).value - std::log(2.0)) < 1e-6);
}

TEST_CASE("envelope invariants on random points") {
  std::mt19937_64 rng(707);
  std::uniform_real_distribution<double> ua(-5.0, 5.0);
  std::uniform_real_distribution<double> ub(1e-3, 50.0);
  std::bernoulli_distribution sign_flip(0.5);

  for (int i = 0; i < 300; ++i) {
    const double a = ua(rng);
    double b1 = ub(rng), b2 = ub(rng);
    if (b1 > b2) std::swap(b1, b2);

    for (const LossKind& loss : {kSq, kLg, kHg}) {
      const double y = loss.kind == Loss::Squared ? ua(rng)
                                                  : (sign_flip(rng) ? 1.0 : -1.0);
      const EnvelopeEval ev = moreau(loss, y, a, b1);

      // Recomputable-value invariant and the envelope-theorem slope.
      CHECK(ev.value == doctest::Approx(inner_objective(loss, y, a, b1, ev.prox))
                            .epsilon(1e-10));
      CHECK(ev.d_da == doctest::Approx((a - ev.prox) / b1).epsilon(1e-7));

      // Dominance and monotonicity in b.
      CHECK(ev.value <= loss_value(loss, y, a) + 1e-12);
      if (b2 > b1)
        CHECK(moreau(loss, y, a, b2).value <= ev.value + 1e-12);

      // Firm nonexpansiveness of the prox.
      const double a2 = ua(rng);
      CHECK(std::abs(prox(loss, y, a, b1) - prox(loss, y, a2, b1)) <=
            std::abs(a - a2) + 1e-12);
    }
  }
}

TEST_CASE("envelope derivative matches central finite differences") {
  std::mt19937_64 rng(909);
  std::uniform_real_distribution<double> ua(-5.0, 5.0);
  std::uniform_real_distribution<double> ub(0.05, 20.0);
  std::bernoulli_distribution sign_flip(0.5);
  const double h = 1e-5;

  int checked = 0;
  for (int i = 0; i < 400 && checked < 200; ++i) {
    const double a = ua(rng);
    const double b = ub(rng);
    for (const LossKind& loss : {kSq, kLg, kHg}) {
      const double y = loss.kind == Loss::Squared ? ua(rng)
                                                  : (sign_flip(rng) ? 1.0 : -1.0);
      if (loss.kind == Loss::Hinge) {
        // Exclude anchors near either hinge prox kink.
        if (std::abs(y * a - 1.0) < 1e-3) continue;
        if (std::abs(y * (a + b * y) - 1.0) < 1e-3) continue;
      }
      const double fd = (moreau(loss, y, a + h, b).value -
                         moreau(loss, y, a - h, b).value) /
                        (2.0 * h);
      const double an = moreau(loss, y, a, b).d_da;
      CHECK(std::abs(fd - an) <= 1e-5 * std::max(1.0, std::abs(an)));
      ++checked;
    }
  }
  CHECK(checked >= 200);
}

TEST_CASE("squared closed form matches the generic newton path to 1e-12") {
  std::mt19937_64 rng(311);
  std::uniform_real_distribution<double> ua(-5.0, 5.0);
  std::uniform_real_distribution<double> ub(1e-3, 100.0);
  for (int i = 0; i < 200; ++i) {
    const double y = ua(rng), a = ua(rng), b = ub(rng);
    CHECK(std::abs(prox(kSq, y, a, b) - newton_prox_squared(y, a, b)) < 1e-12);
  }
}

TEST_CASE("logistic prox meets the stationarity residual bound") {
  std::mt19937_64 rng(415);
  std::uniform_real_distribution<double> ua(-6.0, 6.0);
  std::uniform_real_distribution<double> ub(1e-3, 1e3);
  for (int i = 0; i < 500; ++i) {
    const double y = (i % 2 == 0) ? 1.0 : -1.0;
    const double a = ua(rng), b = ub(rng);
    const double c = prox(kLg, y, a, b);
    const double t = y * c;
    const double grad = t > 0.0 ? -y * std::exp(-t) / (1.0 + std::exp(-t))
                                : -y / (1.0 + std::exp(t));
    CHECK(std::abs(grad + (c - a) / b) <= 1e-12);
  }
}
