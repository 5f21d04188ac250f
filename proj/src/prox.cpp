#include "tlphase/prox.hpp"

#include <cmath>
#include <stdexcept>

namespace tlphase {

namespace {

// d/dc log(1 + exp(-y c)) = -y / (1 + exp(y c)), computed without overflow.
double logistic_grad(double y, double c) {
  const double t = y * c;
  if (t > 0.0) {
    const double e = std::exp(-t);
    return -y * e / (1.0 + e);
  }
  return -y / (1.0 + std::exp(t));
}

double logistic_curv(double y, double c) {
  const double t = std::abs(y * c);
  const double e = std::exp(-t);
  const double s = e / ((1.0 + e) * (1.0 + e));
  return y * y * s;
}

// Root of psi(c) = b*l'(c) + c - a, strictly increasing in c. Newton from a,
// safeguarded by the exact bracket [a, a+by] (orientation by sign of y).
double logistic_prox(double y, double a, double b) {
  if (y == 0.0) return a;
  double lo = std::min(a, a + b * y);
  double hi = std::max(a, a + b * y);
  double c = a;
  const auto psi = [&](double x) { return b * logistic_grad(y, x) + (x - a); };
  const double tol = 1e-13 * b;
  for (int it = 0; it < 100; ++it) {
    const double g = psi(c);
    if (std::abs(g) <= tol) return c;
    if (g > 0.0) hi = c; else lo = c;
    const double dpsi = b * logistic_curv(y, c) + 1.0;
    double next = c - g / dpsi;
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (next == c) return c;
    c = next;
  }
  // Bisection fallback on the maintained bracket.
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid == lo || mid == hi) {
      if (std::abs(psi(mid)) <= 1e4 * tol) return mid;
      break;
    }
    if (psi(mid) > 0.0) hi = mid; else lo = mid;
  }
  throw std::runtime_error("logistic prox did not converge");
}

}  // namespace

double prox(const LossKind& loss, double y, double a, double b) {
  if (!(b > 0.0)) throw std::invalid_argument("prox: b must be positive");
  switch (loss.kind) {
    case Loss::Squared:
      return (a + b * y) / (1.0 + b);
    case Loss::Hinge: {
      if (y == 0.0) return a;
      if (y * a >= 1.0) return a;                       // hinge inactive
      if (y * (a + b * y) <= 1.0) return a + b * y;     // linear region
      return 1.0 / y;                                   // kink
    }
    case Loss::Logistic:
      return logistic_prox(y, a, b);
  }
  throw std::logic_error("unknown loss");
}

EnvelopeEval moreau(const LossKind& loss, double y, double a, double b) {
  if (!(b > 0.0)) throw std::invalid_argument("moreau: b must be positive");
  EnvelopeEval ev;
  switch (loss.kind) {
    case Loss::Squared: {
      ev.prox = (a + b * y) / (1.0 + b);
      const double d = y - a;
      ev.value = d * d / (2.0 * (1.0 + b));
      ev.d_da = (a - y) / (1.0 + b);
      return ev;
    }
    case Loss::Hinge: {
      ev.prox = prox(loss, y, a, b);
      if (y == 0.0 || y * a >= 1.0) {
        ev.value = loss_value(loss, y, a);
        ev.d_da = 0.0;
      } else if (y * (a + b * y) <= 1.0) {
        // prox = a + by: envelope = l(prox) + b y^2 / 2, slope -y.
        ev.value = (1.0 - y * (a + b * y)) + 0.5 * b * y * y;
        ev.d_da = -y;
      } else {
        const double d = 1.0 / y - a;
        ev.value = d * d / (2.0 * b);
        ev.d_da = -d / b;
      }
      return ev;
    }
    case Loss::Logistic: {
      ev.prox = logistic_prox(y, a, b);
      // At the stationary point (prox - a)/b = -l'(prox), so both the
      // quadratic term and the slope stay stable as b shrinks.
      const double g = logistic_grad(y, ev.prox);
      ev.value = loss_value(loss, y, ev.prox) + 0.5 * b * g * g;
      ev.d_da = g;
      return ev;
    }
  }
  throw std::logic_error("unknown loss");
}

}  // namespace tlphase
