#pragma once

// Deterministic expectation operators against the standard normal measure:
// Gauss-Hermite rules (Golub-Welsch, no tabulated constants), tensor-product
// expectations over two independent Gaussians, and a split rule for
// integrands with a single kink or jump.

#include <functional>
#include <vector>

namespace tlphase {

struct QuadRule {
  std::vector<double> nodes;
  std::vector<double> weights;  // positive, sum to 1 for probability rules

  int order() const { return static_cast<int>(nodes.size()); }
};

// Gauss-Hermite rule rescaled to the standard normal density; integrates
// polynomials of degree <= 2*order-1 exactly.
QuadRule gauss_hermite(int order);

// Gauss-Legendre rule on [-1, 1] (weights sum to 2).
QuadRule gauss_legendre(int order);

// E[f(Z)] by Gauss-Hermite.
double expect1(const std::function<double(double)>& f, int order = 60);

// E[f(H, S)] over independent standard Gaussians, tensor Gauss-Hermite.
// Throws std::runtime_error when f is non-finite at a node.
double expect2(const std::function<double(double, double)>& f, int order = 60);

// E[f(S)] for f piecewise-smooth with a single kink/jump at `kink`:
// the real line is split there and each side integrated by mapped
// Gauss-Legendre panels against the normal density.
double expect_split(const std::function<double(double)>& f, double kink,
                    int order = 60);

// Nodes and weights of the split rule itself, for callers that evaluate
// several integrands on the same grid.
QuadRule split_normal_rule(double kink, int order = 60);

}  // namespace tlphase
