#pragma once

// Proximal operators and Moreau envelopes M_{l(y,.)}(a; b) of the three
// supported losses, with the envelope derivative in the anchor. These are the
// kernel of every scalar saddle objective.

#include "tlphase/model.hpp"

namespace tlphase {

struct EnvelopeEval {
  double value = 0.0;  // M_{l(y,.)}(a; b)
  double prox = 0.0;   // minimizing c*
  double d_da = 0.0;   // dM/da = (a - prox) / b
};

// argmin_c l(y; c) + (c - a)^2 / (2b).  Requires b > 0.
// Squared and hinge are exact case analysis; logistic uses safeguarded
// Newton (tolerance 1e-12 on the scaled residual, bisection fallback) and
// throws on non-convergence.
double prox(const LossKind& loss, double y, double a, double b);

EnvelopeEval moreau(const LossKind& loss, double y, double a, double b);

}  // namespace tlphase
