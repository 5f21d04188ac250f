#include "tlphase/saddle.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "tlphase/prox.hpp"
#include "tlphase/quadrature.hpp"
#include "tlphase/spectral.hpp"

namespace tlphase {

namespace {

constexpr double kRFloor = 1e-10;      // keep the inner sup well posed
constexpr double kSigmaLo = 1e-8;      // bracket bounds in the shifted variable
constexpr double kSigmaHi = 1e8;

enum class PenaltyKind { NoTransfer, Hard, Spectral };

// One generic scalar saddle instance:
//   min_{q,r>=0} sup_sigma  -sigma r^2/2 + beta2 T2(sigma)/2
//                           + alpha E[M(rH+qS; T1(sigma))]
//                           + lambda (q^2+r^2)/2
//                           - (q-qbar)^2 (sigma - 1/T1(sigma))/2.
struct Instance {
  double alpha = 1.0;
  double lambda = 0.0;
  double beta2 = 0.0;
  double qbar = 0.0;
  bool coupling = false;

  PenaltyKind pkind = PenaltyKind::NoTransfer;
  double delta = 0.0;
  SpectralAtoms atoms;
  double sigma_lower = 0.0;  // feasible sigma > sigma_lower

  LossKind loss;
  Activation phi = Activation::Identity;
  bool analytic_squared = false;
  Moments mom;

  // label-aware quadrature grid (empty under the analytic route)
  std::vector<double> s_nodes, s_weights, labels;
  std::vector<double> h_nodes, h_weights;

  double t1(double sigma) const {
    switch (pkind) {
      case PenaltyKind::NoTransfer: return 1.0 / sigma;
      case PenaltyKind::Hard: return (1.0 - delta) / sigma;
      case PenaltyKind::Spectral: return atoms.t1(sigma);
    }
    return 0.0;
  }
  double t1_prime(double sigma) const {
    switch (pkind) {
      case PenaltyKind::NoTransfer: return -1.0 / (sigma * sigma);
      case PenaltyKind::Hard: return -(1.0 - delta) / (sigma * sigma);
      case PenaltyKind::Spectral: return atoms.t1_prime(sigma);
    }
    return 0.0;
  }
  double t2(double sigma) const {
    switch (pkind) {
      case PenaltyKind::NoTransfer: return 0.0;
      case PenaltyKind::Hard: return delta * sigma;
      case PenaltyKind::Spectral: return atoms.t2(sigma);
    }
    return 0.0;
  }
  double t2_prime(double sigma) const {
    switch (pkind) {
      case PenaltyKind::NoTransfer: return 0.0;
      case PenaltyKind::Hard: return delta;
      case PenaltyKind::Spectral: return atoms.t2_prime(sigma);
    }
    return 0.0;
  }
  // kappa(sigma) = sigma - 1/T1(sigma), exact per penalty kind.
  double kappa(double sigma) const {
    switch (pkind) {
      case PenaltyKind::NoTransfer: return 0.0;
      case PenaltyKind::Hard: return -sigma * delta / (1.0 - delta);
      case PenaltyKind::Spectral: return sigma - 1.0 / atoms.t1(sigma);
    }
    return 0.0;
  }
  double kappa_prime(double sigma) const {
    switch (pkind) {
      case PenaltyKind::NoTransfer: return 0.0;
      case PenaltyKind::Hard: return -delta / (1.0 - delta);
      case PenaltyKind::Spectral: {
        const double t = atoms.t1(sigma);
        return 1.0 + atoms.t1_prime(sigma) / (t * t);
      }
    }
    return 0.0;
  }

  struct Env {
    double value = 0.0;  // E[M]
    double d_b = 0.0;    // E[dM/db]
    double d_q = 0.0;    // E[dM/da * S]
    double d_r = 0.0;    // E[dM/da * H]
  };

  Env env_eval(double q, double r, double b) const {
    Env env;
    if (analytic_squared) {
      const double w2 = q * q + r * r + mom.v - 2.0 * q * mom.c;
      const double den = 1.0 + b;
      env.value = w2 / (2.0 * den);
      env.d_b = -w2 / (2.0 * den * den);
      env.d_q = (q - mom.c) / den;
      env.d_r = r / den;
      return env;
    }
    for (std::size_t j = 0; j < s_nodes.size(); ++j) {
      const double s = s_nodes[j], ws = s_weights[j], y = labels[j];
      double val = 0.0, db = 0.0, dq = 0.0, dr = 0.0;
      for (std::size_t i = 0; i < h_nodes.size(); ++i) {
        const double wh = h_weights[i];
        const EnvelopeEval ev = moreau(loss, y, r * h_nodes[i] + q * s, b);
        val += wh * ev.value;
        db += wh * ev.d_da * ev.d_da;
        dq += wh * ev.d_da;
        dr += wh * ev.d_da * h_nodes[i];
      }
      env.value += ws * val;
      env.d_b -= 0.5 * ws * db;  // dM/db = -(dM/da)^2 / 2
      env.d_q += ws * dq * s;
      env.d_r += ws * dr;
    }
    return env;
  }

  // E[l(Y; rH + qS)], the b -> 0 envelope limit (delta = 1 objective).
  double loss_expect(double q, double r) const {
    if (analytic_squared)
      return 0.5 * (q * q + r * r + mom.v - 2.0 * q * mom.c);
    double acc = 0.0;
    for (std::size_t j = 0; j < s_nodes.size(); ++j) {
      double inner = 0.0;
      for (std::size_t i = 0; i < h_nodes.size(); ++i)
        inner += h_weights[i] * loss_value(loss, labels[j], r * h_nodes[i] + q * s_nodes[j]);
      acc += s_weights[j] * inner;
    }
    return acc;
  }

  double objective(double q, double r, double sigma, const Env& env) const {
    double f = -0.5 * sigma * r * r + 0.5 * beta2 * t2(sigma) + alpha * env.value +
               0.5 * lambda * (q * q + r * r);
    if (coupling) {
      const double d = q - qbar;
      f -= 0.5 * d * d * kappa(sigma);
    }
    return f;
  }

  double dsigma(double q, double r, double sigma, const Env& env) const {
    double g = -0.5 * r * r + 0.5 * beta2 * t2_prime(sigma) + alpha * env.d_b * t1_prime(sigma);
    if (coupling) {
      const double d = q - qbar;
      g -= 0.5 * d * d * kappa_prime(sigma);
    }
    return g;
  }
};

Instance make_instance(const LossKind& loss, Activation phi, double alpha, double lambda,
                       const SolverOptions& opts) {
  Instance inst;
  inst.loss = loss;
  inst.phi = phi;
  inst.alpha = alpha;
  inst.lambda = lambda;
  inst.mom = moments(phi);
  inst.analytic_squared = opts.env_mode == SolverOptions::EnvMode::AnalyticSquared ||
                          (opts.env_mode == SolverOptions::EnvMode::Auto &&
                           loss.kind == Loss::Squared);
  if (inst.analytic_squared && loss.kind != Loss::Squared)
    throw std::invalid_argument("analytic envelope route applies to squared loss only");
  if (!inst.analytic_squared) {
    // Labels Y = phi(S) are kinked at S = 0 for relu/sign; integrate S with
    // the split rule so each half-line stays smooth.
    const QuadRule s_rule = phi == Activation::Identity
                                ? gauss_hermite(opts.s_order)
                                : split_normal_rule(0.0, opts.s_order);
    const QuadRule h_rule = gauss_hermite(opts.h_order);
    inst.s_nodes = s_rule.nodes;
    inst.s_weights = s_rule.weights;
    inst.h_nodes = h_rule.nodes;
    inst.h_weights = h_rule.weights;
    inst.labels.resize(inst.s_nodes.size());
    for (std::size_t j = 0; j < inst.s_nodes.size(); ++j)
      inst.labels[j] = apply_activation(phi, inst.s_nodes[j]);
  }
  return inst;
}

struct InnerResult {
  double sigma = 0.0;   // in the instance's own parametrization
  double deriv = 0.0;
  Instance::Env env;
  int boundary = 0;     // -1 pinned at the lower edge, +1 at the upper
};

// sup over sigma by bisection on the monotone derivative of the strictly
// concave inner objective, in the shifted variable sigma' = sigma - lower.
InnerResult inner_solve(const Instance& inst, double q, double r, double warm,
                        double rel_tol) {
  const auto deriv_at = [&](double sp, Instance::Env* env_out) {
    const double sigma = inst.sigma_lower + sp;
    const Instance::Env env = inst.env_eval(q, r, inst.t1(sigma));
    if (env_out) *env_out = env;
    return inst.dsigma(q, r, sigma, env);
  };

  double x = warm > 0.0 ? std::clamp(warm, kSigmaLo, kSigmaHi) : 1.0;
  double lo = 0.0, hi = 0.0;
  int boundary = 0;
  double gx = deriv_at(x, nullptr);
  if (gx > 0.0) {
    lo = x;
    hi = x;
    while (gx > 0.0 && hi < kSigmaHi) {
      lo = hi;
      hi = std::min(hi * 4.0, kSigmaHi);
      gx = deriv_at(hi, nullptr);
    }
    if (gx > 0.0) boundary = +1;
  } else {
    hi = x;
    lo = x;
    while (gx <= 0.0 && lo > kSigmaLo) {
      hi = lo;
      lo = std::max(lo / 4.0, kSigmaLo);
      gx = deriv_at(lo, nullptr);
    }
    if (gx <= 0.0) boundary = -1;
  }

  InnerResult res;
  if (boundary != 0) {
    const double sp = boundary > 0 ? kSigmaHi : kSigmaLo;
    res.sigma = inst.sigma_lower + sp;
    res.deriv = deriv_at(sp, &res.env);
    res.boundary = boundary;
    return res;
  }

  // Geometric bisection while the bracket spans decades, then arithmetic.
  while (hi - lo > rel_tol * hi) {
    const double mid = hi / lo > 4.0 ? std::sqrt(lo * hi) : 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    if (deriv_at(mid, nullptr) > 0.0) lo = mid; else hi = mid;
  }
  const double sp = 0.5 * (lo + hi);
  res.sigma = inst.sigma_lower + sp;
  res.deriv = deriv_at(sp, &res.env);
  return res;
}

struct OuterEval {
  double value = 0.0;
  double gq = 0.0, gr = 0.0;
  double sigma = 0.0;
  int boundary = 0;
};

OuterEval outer_eval(const Instance& inst, double q, double r, double warm,
                     const SolverOptions& opts) {
  const InnerResult inner = inner_solve(inst, q, r, warm, opts.inner_tol);
  OuterEval out;
  out.sigma = inner.sigma;
  out.boundary = inner.boundary;
  out.value = inst.objective(q, r, inner.sigma, inner.env);
  // Danskin: the inner maximizer is fixed when differentiating in (q, r).
  out.gq = inst.alpha * inner.env.d_q + inst.lambda * q;
  if (inst.coupling) out.gq -= (q - inst.qbar) * inst.kappa(inner.sigma);
  out.gr = -inner.sigma * r + inst.alpha * inner.env.d_r + inst.lambda * r;
  return out;
}

double projected_grad_norm(double q, double r, double gq, double gr) {
  const double pq = (q <= 1e-14 && gq > 0.0) ? 0.0 : gq;
  const double pr = (r <= kRFloor * 1.01 && gr > 0.0) ? 0.0 : gr;
  return std::hypot(pq, pr);
}

struct GenericSolution {
  double q = 0.0, r = 0.0, sigma = 0.0, objective = 0.0;
  double grad_norm = 0.0;
  bool converged = false;
};

// Projected BFGS over (q, r) >= 0 with envelope-theorem gradients; the inner
// sup is re-solved at every trial point (warm-started on sigma).
GenericSolution solve_generic(const Instance& inst, const SolverOptions& opts) {
  const std::array<std::array<double, 2>, 3> starts = {{
      {0.1, 0.1},
      {inst.mom.c, std::sqrt(std::max(inst.mom.v, 1e-4))},
      {1.0, 1.0},
  }};

  GenericSolution best;
  double best_value = std::numeric_limits<double>::infinity();

  for (const auto& start : starts) {
    double q = std::max(start[0], 0.0);
    double r = std::max(start[1], kRFloor);
    double warm = 0.0;
    OuterEval cur = outer_eval(inst, q, r, warm, opts);
    warm = cur.sigma - inst.sigma_lower;

    double h00 = 1.0, h01 = 0.0, h11 = 1.0;  // inverse-Hessian model
    bool converged = false;

    for (int it = 0; it < opts.max_outer_iters; ++it) {
      // Gradient entries scale with the problem data (alpha, lambda and the
      // coupling weight), so the stopping norm does too.
      const double grad_scale =
          1.0 + inst.lambda + inst.alpha +
          (inst.coupling ? std::abs(inst.kappa(cur.sigma)) : 0.0);
      if (projected_grad_norm(q, r, cur.gq, cur.gr) <= opts.grad_tol * grad_scale) {
        converged = true;
        break;
      }
      double dq = -(h00 * cur.gq + h01 * cur.gr);
      double dr = -(h01 * cur.gq + h11 * cur.gr);
      if (dq * cur.gq + dr * cur.gr > -1e-18) {  // not a descent direction
        h00 = h11 = 1.0;
        h01 = 0.0;
        dq = -cur.gq;
        dr = -cur.gr;
      }

      double t = 1.0;
      bool stepped = false;
      OuterEval next;
      double nq = q, nr = r;
      for (int ls = 0; ls < 60; ++ls) {
        nq = std::max(q + t * dq, 0.0);
        nr = std::max(r + t * dr, kRFloor);
        const double m = cur.gq * (nq - q) + cur.gr * (nr - r);
        if (!(m < 0.0)) {  // projection killed the step
          t *= 0.5;
          continue;
        }
        next = outer_eval(inst, nq, nr, warm, opts);
        if (next.value <= cur.value + 1e-4 * m) {
          stepped = true;
          break;
        }
        t *= 0.5;
      }
      if (!stepped) break;

      const double sq = nq - q, sr = nr - r;
      const double yq = next.gq - cur.gq, yr = next.gr - cur.gr;
      const double sy = sq * yq + sr * yr;
      if (sy > 1e-14 * std::hypot(sq, sr) * std::hypot(yq, yr)) {
        // 2x2 inverse BFGS update
        const double rho = 1.0 / sy;
        const double hy0 = h00 * yq + h01 * yr;
        const double hy1 = h01 * yq + h11 * yr;
        const double yhy = yq * hy0 + yr * hy1;
        const double f = rho * rho * yhy + rho;
        h00 += f * sq * sq - rho * (sq * hy0 + hy0 * sq);
        h01 += f * sq * sr - rho * (sq * hy1 + hy0 * sr);
        h11 += f * sr * sr - rho * (sr * hy1 + hy1 * sr);
      }
      q = nq;
      r = nr;
      cur = next;
      warm = cur.sigma - inst.sigma_lower;
    }

    if (converged && cur.value < best_value) {
      best_value = cur.value;
      best.q = q;
      best.r = r;
      best.sigma = cur.sigma;
      best.objective = cur.value;
      best.grad_norm = projected_grad_norm(q, r, cur.gq, cur.gr);
      best.converged = true;
      break;  // strict convexity: one converged start suffices
    }
  }

  if (!best.converged)
    throw std::runtime_error("scalar saddle solver did not converge");
  return best;
}

void check_numeric_preconditions(const LossKind& loss, double lambda, double alpha,
                                 const char* which) {
  if (lambda > 0.0) return;
  if (loss.kind == Loss::Squared && alpha > 1.0) return;
  std::ostringstream msg;
  msg << which << ": lambda = 0 requires squared loss with alpha > 1";
  throw std::invalid_argument(msg.str());
}

bool squared_fast_path(const TaskSpec& spec, double alpha, const SolverOptions& opts) {
  return !opts.force_numeric && spec.loss.kind == Loss::Squared &&
         spec.lambda == 0.0 && alpha > 1.0;
}

Instance target_instance(const TaskSpec& spec, const SaddleSolution& source,
                         const SolverOptions& opts) {
  Instance inst = make_instance(spec.loss, spec.phi, spec.alpha_t, spec.lambda, opts);
  switch (spec.transfer.mode) {
    case TransferMode::None:
      inst.pkind = PenaltyKind::NoTransfer;
      break;
    case TransferMode::Hard:
      inst.pkind = PenaltyKind::Hard;
      inst.delta = spec.transfer.delta;
      break;
    case TransferMode::Soft:
      inst.pkind = PenaltyKind::Spectral;
      inst.atoms = discretize(spec.transfer.spectrum);
      inst.sigma_lower = -inst.atoms.mu_min;
      break;
  }
  if (spec.transfer.mode != TransferMode::None) {
    inst.coupling = true;
    inst.qbar = spec.rho * source.q;
    inst.beta2 = (1.0 - spec.rho * spec.rho) * source.q * source.q + source.r * source.r;
  }
  return inst;
}

}  // namespace

SaddleSolution solve_source(const TaskSpec& spec, const SolverOptions& opts) {
  const Moments mom = moments(spec.phi);
  if (squared_fast_path(spec, spec.alpha_s, opts)) {
    SaddleSolution sol;
    sol.q = mom.c;
    sol.r = std::sqrt((mom.v - mom.c * mom.c) / (spec.alpha_s - 1.0));
    sol.sigma = std::sqrt((mom.v - mom.c * mom.c) * (spec.alpha_s - 1.0));
    sol.objective = 0.5 * (mom.v - mom.c * mom.c) * (spec.alpha_s - 1.0);
    return sol;
  }
  check_numeric_preconditions(spec.loss, spec.lambda, spec.alpha_s, "solve_source");
  Instance inst = make_instance(spec.loss, spec.phi, spec.alpha_s, spec.lambda, opts);
  inst.pkind = PenaltyKind::NoTransfer;
  const GenericSolution g = solve_generic(inst, opts);
  SaddleSolution sol;
  sol.q = g.q;
  sol.r = g.r;
  // The source problem's envelope parameter is r/sigma; the generic instance
  // solved with 1/sigma', so sigma = r * sigma'.
  sol.sigma = g.r * g.sigma;
  sol.objective = g.objective;
  return sol;
}

SaddleSolution solve_no_transfer(const TaskSpec& spec, const SolverOptions& opts) {
  const Moments mom = moments(spec.phi);
  if (squared_fast_path(spec, spec.alpha_t, opts)) {
    SaddleSolution sol;
    const double noise = mom.v - mom.c * mom.c;
    sol.q = mom.c;
    sol.r = std::sqrt(noise / (spec.alpha_t - 1.0));
    sol.sigma = spec.alpha_t - 1.0;
    sol.objective = 0.5 * noise * (spec.alpha_t - 1.0);
    return sol;
  }
  check_numeric_preconditions(spec.loss, spec.lambda, spec.alpha_t, "solve_no_transfer");
  Instance inst = make_instance(spec.loss, spec.phi, spec.alpha_t, spec.lambda, opts);
  inst.pkind = PenaltyKind::NoTransfer;
  const GenericSolution g = solve_generic(inst, opts);
  return {g.q, g.r, g.sigma, g.objective};
}

SaddleSolution solve_soft(const TaskSpec& spec, const SaddleSolution& source,
                          const SolverOptions& opts) {
  if (spec.transfer.mode != TransferMode::Soft)
    throw std::invalid_argument("solve_soft: spec.transfer must be soft");
  check_numeric_preconditions(spec.loss, spec.lambda, spec.alpha_t, "solve_soft");
  Instance inst = target_instance(spec, source, opts);
  const GenericSolution g = solve_generic(inst, opts);
  return {g.q, g.r, g.sigma, g.objective};
}

SaddleSolution solve_hard(const TaskSpec& spec, const SaddleSolution& source,
                          const SolverOptions& opts) {
  if (spec.transfer.mode != TransferMode::Hard)
    throw std::invalid_argument("solve_hard: spec.transfer must be hard");
  const double delta = spec.transfer.delta;
  const Moments mom = moments(spec.phi);
  const double beta1 = spec.rho * source.q;
  const double beta2 =
      (1.0 - spec.rho * spec.rho) * source.q * source.q + source.r * source.r;

  if (delta == 1.0) {
    // Full copy: the Moreau parameter collapses to 0 and the penalty pins the
    // overlaps at the transferred source vector.
    SaddleSolution sol;
    sol.q = beta1;
    sol.r = std::sqrt(beta2);
    sol.sigma = std::numeric_limits<double>::infinity();
    Instance inst = make_instance(spec.loss, spec.phi, spec.alpha_t, spec.lambda, opts);
    sol.objective = 0.5 * spec.lambda * (sol.q * sol.q + sol.r * sol.r) +
                    spec.alpha_t * inst.loss_expect(sol.q, sol.r);
    return sol;
  }

  if (squared_fast_path(spec, spec.alpha_t, opts)) {
    const double c = mom.c, v = mom.v;
    SaddleSolution sol;
    sol.q = (1.0 - delta) * c + delta * beta1;
    const double bracket = (delta - 1.0) * c * c + delta * beta1 * beta1 +
                           delta * beta2 + v - 2.0 * delta * beta1 * c;
    sol.r = std::sqrt((1.0 - delta) / (spec.alpha_t + delta - 1.0) * bracket +
                      delta * beta2 + delta * (1.0 - delta) * (c - beta1) * (c - beta1));
    // After x^2 = r^2 - delta*beta2 - delta/(1-delta)*(q-beta1)^2 the term
    // under alpha_t collapses to W = q^2 + r^2 + v - 2qc.
    const double w2 = sol.q * sol.q + sol.r * sol.r + v - 2.0 * sol.q * c;
    const double x2 = sol.r * sol.r - delta * beta2 -
                      delta / (1.0 - delta) * (sol.q - beta1) * (sol.q - beta1);
    const double x = std::sqrt(std::max(x2, 0.0));
    sol.sigma = x > 0.0
                    ? std::sqrt(spec.alpha_t * w2 * (1.0 - delta)) / x - (1.0 - delta)
                    : std::numeric_limits<double>::infinity();
    const double inner = -x * std::sqrt(1.0 - delta) + std::sqrt(spec.alpha_t * w2);
    sol.objective = 0.5 * std::max(inner, 0.0) * std::max(inner, 0.0);
    return sol;
  }

  check_numeric_preconditions(spec.loss, spec.lambda, spec.alpha_t, "solve_hard");
  Instance inst = target_instance(spec, source, opts);
  const GenericSolution g = solve_generic(inst, opts);
  return {g.q, g.r, g.sigma, g.objective};
}

SaddleSolution solve_target(const TaskSpec& spec, const SolverOptions& opts) {
  switch (spec.transfer.mode) {
    case TransferMode::None: return solve_no_transfer(spec, opts);
    case TransferMode::Hard: return solve_hard(spec, solve_source(spec, opts), opts);
    case TransferMode::Soft: return solve_soft(spec, solve_source(spec, opts), opts);
  }
  throw std::logic_error("unknown transfer mode");
}

double predict_train_error(const TaskSpec& spec, const SaddleSolution& solution) {
  return solution.objective -
         0.5 * spec.lambda * (solution.q * solution.q + solution.r * solution.r);
}

double predict_gen_error(const TaskSpec& spec, double q, double r) {
  if (r < 0.0) throw std::invalid_argument("predict_gen_error: r must be >= 0");
  if (spec.upsilon == 0 && spec.phi_hat == Activation::Identity) {
    const Moments mom = moments(spec.phi);
    return mom.v - 2.0 * mom.c * q + q * q + r * r;
  }
  if (spec.upsilon == 1 && spec.phi == Activation::Sign &&
      spec.phi_hat == Activation::Sign) {
    const double norm = std::hypot(q, r);
    if (norm == 0.0)
      throw std::invalid_argument("predict_gen_error: (q, r) = (0, 0) is undefined");
    const double t = std::clamp(q / norm, -1.0, 1.0);
    return std::acos(t) / std::numbers::pi;
  }
  throw std::invalid_argument("predict_gen_error: unsupported activation pairing");
}

double predict_gen_error_quadrature(const TaskSpec& spec, double q, double r,
                                    int order) {
  if (r < 0.0) throw std::invalid_argument("r must be >= 0");
  const double scale = spec.upsilon == 1 ? 0.25 : 1.0;
  const auto sq_diff = [&](double nu1, double nu2) {
    const double d = apply_activation(spec.phi, nu1) - apply_activation(spec.phi_hat, nu2);
    return d * d;
  };
  // nu1 = Z1, nu2 = q Z1 + r Z2 realizes the covariance [[1, q],[q, q^2+r^2]].
  if (r <= 1e-12) {
    return scale *
           expect_split([&](double z1) { return sq_diff(z1, q * z1); }, 0.0, order);
  }
  const QuadRule outer = split_normal_rule(0.0, order);
  double acc = 0.0;
  for (int i = 0; i < outer.order(); ++i) {
    const double z1 = outer.nodes[i];
    // For fixed z1 the predictor argument crosses its kink at z2 = -q z1 / r.
    const double inner = expect_split(
        [&](double z2) { return sq_diff(z1, q * z1 + r * z2); }, -q * z1 / r, order);
    acc += outer.weights[i] * inner;
  }
  return scale * acc;
}

double inner_sigma_derivative(const TaskSpec& spec, const SaddleSolution& source,
                              const SaddleSolution& solution, const SolverOptions& opts) {
  if (spec.transfer.mode == TransferMode::Hard && spec.transfer.delta == 1.0) return 0.0;
  Instance inst = target_instance(spec, source, opts);
  const Instance::Env env =
      inst.env_eval(solution.q, solution.r, inst.t1(solution.sigma));
  return inst.dsigma(solution.q, solution.r, solution.sigma, env);
}

double source_sigma_derivative(const TaskSpec& spec, const SaddleSolution& solution,
                               const SolverOptions& opts) {
  Instance inst = make_instance(spec.loss, spec.phi, spec.alpha_s, spec.lambda, opts);
  const double b = solution.r / solution.sigma;
  const Instance::Env env = inst.env_eval(solution.q, solution.r, b);
  return inst.alpha * env.d_b * (-solution.r / (solution.sigma * solution.sigma)) -
         0.5 * solution.r;
}

namespace {

double perturbation_slack(const Instance& inst, const SaddleSolution& solution,
                          double step, const SolverOptions& opts) {
  const auto value_at = [&](double q, double r) {
    const InnerResult inner = inner_solve(inst, q, r, 0.0, opts.inner_tol);
    return inst.objective(q, r, inner.sigma, inner.env);
  };
  const double f0 = value_at(solution.q, solution.r);
  double slack = std::numeric_limits<double>::infinity();
  for (const double dq : {-step, step}) {
    const double q = solution.q + dq;
    if (q < 0.0) continue;
    slack = std::min(slack, value_at(q, solution.r) - f0);
  }
  for (const double dr : {-step, step}) {
    const double r = solution.r + dr;
    if (r < kRFloor) continue;
    slack = std::min(slack, value_at(solution.q, r) - f0);
  }
  return slack;
}

}  // namespace

double outer_perturbation_slack(const TaskSpec& spec, const SaddleSolution& source,
                                const SaddleSolution& solution, double step,
                                const SolverOptions& opts) {
  if (spec.transfer.mode == TransferMode::Hard && spec.transfer.delta == 1.0) return 0.0;
  Instance inst = target_instance(spec, source, opts);
  return perturbation_slack(inst, solution, step, opts);
}

double source_perturbation_slack(const TaskSpec& spec, const SaddleSolution& solution,
                                 double step, const SolverOptions& opts) {
  Instance inst = make_instance(spec.loss, spec.phi, spec.alpha_s, spec.lambda, opts);
  inst.pkind = PenaltyKind::NoTransfer;
  return perturbation_slack(inst, solution, step, opts);
}

}  // namespace tlphase
