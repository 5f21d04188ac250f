#pragma once

// Resolvent-type transforms of the soft-penalty spectral distribution:
// T1(sigma) = E_mu[1/(mu+sigma)] and T2(sigma) = E_mu[mu*sigma/(mu+sigma)],
// with derivatives, evaluated exactly for point-mass/empirical spectra and by
// fixed Gauss-Legendre quadrature over the base density otherwise.

#include <utility>
#include <vector>

#include "tlphase/model.hpp"

namespace tlphase {

// (T1, T2) at the given shift; requires sigma > -mu_min.
std::pair<double, double> spectral_T(const SpectralDist& dist, double sigma);

// Discretized view of a spectral distribution: atoms (mu_i, p_i) with
// sum p_i = 1. Point masses and empirical lists are exact; scaled-squared
// variants use a 200-point Gauss-Legendre rule over the base variable.
struct SpectralAtoms {
  std::vector<double> mu;
  std::vector<double> prob;
  double mu_min = 0.0;

  double t1(double sigma) const;        // E[1/(mu+sigma)]
  double t1_prime(double sigma) const;  // -E[1/(mu+sigma)^2]
  double t2(double sigma) const;        // E[mu*sigma/(mu+sigma)]
  double t2_prime(double sigma) const;  // E[mu^2/(mu+sigma)^2]
  double mean() const;                  // E[mu]
};

SpectralAtoms discretize(const SpectralDist& dist, int order = 200);

}  // namespace tlphase
