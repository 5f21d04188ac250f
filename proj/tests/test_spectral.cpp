#include "doctest.h"

#include <cmath>

#include "tlphase/spectral.hpp"

using namespace tlphase;

TEST_CASE("spectral_T exact cases") {
  auto [t1, t2] = spectral_T(SpectralDist::point_mass(1.0), 1.0);
  CHECK(t1 == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(t2 == doctest::Approx(0.5).epsilon(1e-15));

  std::tie(t1, t2) = spectral_T(SpectralDist::point_mass(0.0), 2.0);
  CHECK(t1 == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(t2 == doctest::Approx(0.0).epsilon(1e-15));

  // Direct-average oracle on {1, 3}.
  std::tie(t1, t2) = spectral_T(SpectralDist::empirical({1.0, 3.0}), 1.0);
  CHECK(t1 == doctest::Approx((0.5 + 0.25) / 2.0).epsilon(1e-15));
  CHECK(t2 == doctest::Approx((0.5 + 0.75) / 2.0).epsilon(1e-15));

  CHECK_THROWS_AS(spectral_T(SpectralDist::point_mass(1.0), -1.0),
                  std::invalid_argument);
}

TEST_CASE("scaled-squared uniform transform matches a dense riemann oracle") {
  const SpectralDist dist = SpectralDist::squared_uniform(0.7);
  for (double sigma : {0.3, 1.0, 4.2}) {
    // mu(x) = 0.7 * (2x)^2 under uniform x; midpoint rule with 2e6 cells.
    const int n = 2000000;
    double t1_ref = 0.0, t2_ref = 0.0;
    for (int i = 0; i < n; ++i) {
      const double x = (i + 0.5) / n;
      const double mu = 0.7 * 4.0 * x * x;
      t1_ref += 1.0 / (mu + sigma);
      t2_ref += mu * sigma / (mu + sigma);
    }
    t1_ref /= n;
    t2_ref /= n;
    const auto [t1, t2] = spectral_T(dist, sigma);
    CHECK(t1 == doctest::Approx(t1_ref).epsilon(1e-8));
    CHECK(t2 == doctest::Approx(t2_ref).epsilon(1e-8));
  }
}

TEST_CASE("scaled-squared beta atoms form a probability distribution") {
  const SpectralAtoms atoms = discretize(SpectralDist::squared_beta(0.5, 2.0, 5.0));
  double mass = 0.0, mean = 0.0;
  for (std::size_t i = 0; i < atoms.mu.size(); ++i) {
    CHECK(atoms.prob[i] >= 0.0);
    mass += atoms.prob[i];
    mean += atoms.prob[i] * atoms.mu[i];
  }
  CHECK(mass == doctest::Approx(1.0).epsilon(1e-12));
  // E[mu] = beta_t E[V^2] with V unit-mean: E[V^2] = 1 + Var(X)/E[X]^2.
  // Beta(2,5): mean 2/7, var 10/(49*8) -> E[V^2] = 1 + (10/392)/(4/49) = 1.3125.
  CHECK(mean == doctest::Approx(0.5 * 1.3125).epsilon(1e-10));
  CHECK(atoms.mean() == doctest::Approx(mean).epsilon(1e-14));
}

TEST_CASE("transform derivatives match finite differences") {
  for (const SpectralDist& dist :
       {SpectralDist::point_mass(0.4), SpectralDist::empirical({0.2, 1.0, 2.5}),
        SpectralDist::squared_uniform(1.3)}) {
    const SpectralAtoms atoms = discretize(dist);
    for (double sigma : {0.2, 1.7}) {
      const double h = 1e-6;
      const double d1 = (atoms.t1(sigma + h) - atoms.t1(sigma - h)) / (2 * h);
      const double d2 = (atoms.t2(sigma + h) - atoms.t2(sigma - h)) / (2 * h);
      CHECK(atoms.t1_prime(sigma) == doctest::Approx(d1).epsilon(1e-6));
      CHECK(atoms.t2_prime(sigma) == doctest::Approx(d2).epsilon(1e-6));
    }
  }
}
