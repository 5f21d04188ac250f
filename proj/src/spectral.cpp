#include "tlphase/spectral.hpp"

#include <cmath>
#include <stdexcept>

#include "tlphase/quadrature.hpp"

namespace tlphase {

namespace {

double beta_log_norm(double a, double b) {
  return std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b);
}

}  // namespace

double SpectralAtoms::t1(double sigma) const {
  double acc = 0.0;
  for (std::size_t i = 0; i < mu.size(); ++i) acc += prob[i] / (mu[i] + sigma);
  return acc;
}

double SpectralAtoms::t1_prime(double sigma) const {
  double acc = 0.0;
  for (std::size_t i = 0; i < mu.size(); ++i) {
    const double d = mu[i] + sigma;
    acc += prob[i] / (d * d);
  }
  return -acc;
}

double SpectralAtoms::t2(double sigma) const {
  double acc = 0.0;
  for (std::size_t i = 0; i < mu.size(); ++i)
    acc += prob[i] * mu[i] * sigma / (mu[i] + sigma);
  return acc;
}

double SpectralAtoms::t2_prime(double sigma) const {
  double acc = 0.0;
  for (std::size_t i = 0; i < mu.size(); ++i) {
    const double d = mu[i] + sigma;
    acc += prob[i] * mu[i] * mu[i] / (d * d);
  }
  return acc;
}

double SpectralAtoms::mean() const {
  double acc = 0.0;
  for (std::size_t i = 0; i < mu.size(); ++i) acc += prob[i] * mu[i];
  return acc;
}

SpectralAtoms discretize(const SpectralDist& dist, int order) {
  SpectralAtoms atoms;
  atoms.mu_min = dist.mu_min();
  switch (dist.kind) {
    case SpectralDist::Kind::PointMass:
      atoms.mu = {dist.mu0};
      atoms.prob = {1.0};
      return atoms;
    case SpectralDist::Kind::Empirical: {
      if (dist.eigenvalues.empty())
        throw std::invalid_argument("empirical spectrum is empty");
      const double p = 1.0 / static_cast<double>(dist.eigenvalues.size());
      atoms.mu = dist.eigenvalues;
      atoms.prob.assign(dist.eigenvalues.size(), p);
      return atoms;
    }
    case SpectralDist::Kind::ScaledSquaredUniform: {
      // Base variable uniform on [0,1], rescaled to unit mean: V = 2x, so
      // mu = beta_t * 4 x^2 under dx on [0,1].
      const QuadRule gl = gauss_legendre(order);
      for (int i = 0; i < gl.order(); ++i) {
        const double x = 0.5 * (gl.nodes[i] + 1.0);
        const double w = 0.5 * gl.weights[i];
        atoms.mu.push_back(dist.beta_t * 4.0 * x * x);
        atoms.prob.push_back(w);
      }
      return atoms;
    }
    case SpectralDist::Kind::ScaledSquaredBeta: {
      // Base variable Beta(a,b), rescaled to unit mean (a+b)/a.
      const double a = dist.shape_a, b = dist.shape_b;
      const double scale = (a + b) / a;
      const double log_norm = beta_log_norm(a, b);
      const QuadRule gl = gauss_legendre(order);
      double mass = 0.0;
      for (int i = 0; i < gl.order(); ++i) {
        const double x = 0.5 * (gl.nodes[i] + 1.0);
        const double pdf =
            std::exp((a - 1.0) * std::log(x) + (b - 1.0) * std::log1p(-x) - log_norm);
        const double w = 0.5 * gl.weights[i] * pdf;
        const double v = scale * x;
        atoms.mu.push_back(dist.beta_t * v * v);
        atoms.prob.push_back(w);
        mass += w;
      }
      // The quadrature of the density is off by O(rule error); renormalize so
      // the atoms stay a probability distribution.
      for (auto& p : atoms.prob) p /= mass;
      return atoms;
    }
  }
  throw std::logic_error("unknown spectral kind");
}

std::pair<double, double> spectral_T(const SpectralDist& dist, double sigma) {
  if (!(sigma > -dist.mu_min()))
    throw std::invalid_argument("spectral_T: sigma must exceed -mu_min");
  const SpectralAtoms atoms = discretize(dist);
  return {atoms.t1(sigma), atoms.t2(sigma)};
}

}  // namespace tlphase
