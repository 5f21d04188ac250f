#pragma once

// Deterministic scalar saddle problems predicting the high-dimensional
// limits: the source problem, the soft-transfer target problem, and the
// hard-transfer target problem, plus the error formulas built from their
// solutions.
//
// All three share one structure:
//
//   min_{q,r>=0} sup_sigma  -sigma*r^2/2 + beta2*T2(sigma)/2
//                           + alpha*E[ M_{l(Y,.)}(r*H + q*S; T1(sigma)) ]
//                           + lambda*(q^2+r^2)/2
//                           - (q - qbar)^2*(sigma - 1/T1(sigma))/2
//
// with (T1, T2) describing the transfer penalty: the resolvent transforms of
// the spectral distribution for soft transfer, T1 = (1-delta)/sigma and
// T2 = delta*sigma for hard transfer, and T1 = 1/sigma, T2 = 0 with no
// coupling for no transfer (which also covers the source problem after a
// sigma rescaling). The inner sup is solved by bisection on the monotone
// derivative of the strictly concave objective; the outer min by projected
// quasi-Newton with envelope-theorem gradients and multi-starts.

#include <optional>

#include "tlphase/model.hpp"

namespace tlphase {

struct SaddleSolution {
  double q = 0.0;          // teacher-aligned overlap
  double r = 0.0;          // orthogonal magnitude
  double sigma = 0.0;      // inner maximizer (problem's own parametrization)
  double objective = 0.0;  // optimal value C*
};

struct SolverOptions {
  // Envelope expectation route: analytic for the squared loss, label-aware
  // quadrature otherwise. Auto picks analytic whenever the loss is squared.
  enum class EnvMode { Auto, Quadrature, AnalyticSquared };
  EnvMode env_mode = EnvMode::Auto;
  int h_order = 60;             // Gauss-Hermite order in H
  int s_order = 60;             // split-rule order in S
  double grad_tol = 1e-8;       // outer projected-gradient norm target
  double inner_tol = 1e-11;     // inner derivative bisection width (relative)
  int max_outer_iters = 400;
  bool force_numeric = false;   // skip the squared-loss closed-form fast path
};

// Source problem. Fast path (squared loss, lambda = 0, alpha_s > 1) returns
// the closed form q* = c, r* = sqrt(v - c^2)/sqrt(alpha_s - 1). The numeric
// path requires lambda > 0 or squared loss and throws otherwise.
SaddleSolution solve_source(const TaskSpec& spec, const SolverOptions& opts = {});

// Target problem without transfer (also used by the delta = 0 and zero-
// spectrum reductions).
SaddleSolution solve_no_transfer(const TaskSpec& spec, const SolverOptions& opts = {});

// Soft-transfer target problem given the solved source.
SaddleSolution solve_soft(const TaskSpec& spec, const SaddleSolution& source,
                          const SolverOptions& opts = {});

// Hard-transfer target problem. delta = 1 is an explicit copy limit:
// q = rho*q_s, r^2 = (1-rho^2)*q_s^2 + r_s^2. Fast path mirrors the
// closed forms for squared loss with lambda = 0 and alpha_t > 1.
SaddleSolution solve_hard(const TaskSpec& spec, const SaddleSolution& source,
                          const SolverOptions& opts = {});

// Dispatch on spec.transfer.mode (solves the source internally when needed).
SaddleSolution solve_target(const TaskSpec& spec, const SolverOptions& opts = {});

// Predicted training error: objective - lambda*(q^2+r^2)/2.
double predict_train_error(const TaskSpec& spec, const SaddleSolution& solution);

// Predicted generalization error from the overlap pair. Closed forms for the
// identity predictor (v - 2cq + q^2 + r^2) and the sign-sign pair
// (acos(q/sqrt(q^2+r^2))/pi); classification requires (q, r) != (0, 0).
double predict_gen_error(const TaskSpec& spec, double q, double r);

// Independent route: bivariate-Gaussian quadrature of the defining
// expectation through the Cholesky factor of [[1, q], [q, q^2+r^2]].
double predict_gen_error_quadrature(const TaskSpec& spec, double q, double r,
                                    int order = 60);

// Saddle certificate pieces, exposed for tests: the inner sigma-derivative at
// the reported solution, and the worst objective change under coordinate
// perturbations of +/- step in (q, r) within the feasible orthant (negative
// slack means a perturbation found a lower objective).
double inner_sigma_derivative(const TaskSpec& spec, const SaddleSolution& source,
                              const SaddleSolution& solution,
                              const SolverOptions& opts = {});
double outer_perturbation_slack(const TaskSpec& spec, const SaddleSolution& source,
                                const SaddleSolution& solution, double step = 1e-4,
                                const SolverOptions& opts = {});

// Same certificates for a source solution, in the source problem's own
// sigma parametrization (envelope parameter r/sigma).
double source_sigma_derivative(const TaskSpec& spec, const SaddleSolution& solution,
                               const SolverOptions& opts = {});
double source_perturbation_slack(const TaskSpec& spec, const SaddleSolution& solution,
                                 double step = 1e-4, const SolverOptions& opts = {});

}  // namespace tlphase
