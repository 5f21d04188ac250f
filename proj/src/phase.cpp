#include "tlphase/phase.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace tlphase {

namespace {

void require_ratios_above_one(double alpha_t, double alpha_s, const char* who) {
  if (!(alpha_t > 1.0 && alpha_s > 1.0)) {
    std::ostringstream msg;
    msg << who << ": requires alpha_t > 1 and alpha_s > 1";
    throw std::invalid_argument(msg.str());
  }
}

void require_squared_lambda0(const TaskSpec& spec, const char* who) {
  if (spec.loss.kind != Loss::Squared || spec.lambda != 0.0) {
    std::ostringstream msg;
    msg << who << ": closed forms hold for squared loss with lambda = 0";
    throw std::invalid_argument(msg.str());
  }
  require_ratios_above_one(spec.alpha_t, spec.alpha_s, who);
}

}  // namespace

PhaseBoundary rho_c(Activation phi, double alpha_s, double alpha_t) {
  require_ratios_above_one(alpha_t, alpha_s, "rho_c");
  const Moments mom = moments(phi);
  const double noise = mom.v - mom.c * mom.c;
  PhaseBoundary pb;
  pb.rho_c = 1.0 - noise / (2.0 * mom.c * mom.c) *
                       (1.0 / (alpha_t - 1.0) - 1.0 / (alpha_s - 1.0));
  return pb;
}

DeltaStar delta_star_regression(const TaskSpec& spec) {
  require_squared_lambda0(spec, "delta_star_regression");
  if (spec.phi_hat != Activation::Identity)
    throw std::invalid_argument("delta_star_regression: identity predictor required");
  const Moments mom = moments(spec.phi);
  const double qs = mom.c;
  const double rs2 = (mom.v - mom.c * mom.c) / (spec.alpha_s - 1.0);
  const double beta1 = spec.rho * qs;
  const double beta2 = (1.0 - spec.rho * spec.rho) * qs * qs + rs2;
  const double z_t = (spec.alpha_t - 1.0) *
                         ((mom.c - beta1) * (mom.c - beta1) + beta2) -
                     (mom.v - mom.c * mom.c);
  if (std::abs(z_t) <= 1e-12) return DeltaStar::Boundary;
  return z_t > 0.0 ? DeltaStar::Zero : DeltaStar::One;
}

double g_threshold(double alpha_t, double alpha_s) {
  require_ratios_above_one(alpha_t, alpha_s, "g_threshold");
  const double pi = std::numbers::pi;
  const double one_minus = 1.0 - 2.0 / pi;
  const double num = one_minus * alpha_t * (alpha_s - alpha_t);
  const double den = (alpha_s - 1.0) * ((4.0 / pi) * (alpha_t - 1.0) * alpha_t +
                                        2.0 * one_minus * (alpha_t - 1.0));
  return 1.0 - num / den;
}

double ClassCubic::g(double delta, double alpha_t, double c) const {
  const double num = (a_coef * delta + c) * std::sqrt(delta + alpha_t - 1.0);
  const double den = std::sqrt((k1 * delta + k2) * delta + k3);
  return num / den;
}

ClassCubic class_cubic(const TaskSpec& spec) {
  require_squared_lambda0(spec, "class_cubic");
  if (spec.phi != Activation::Sign || spec.phi_hat != Activation::Sign)
    throw std::invalid_argument("class_cubic: sign-sign pairing required");
  const Moments mom = moments(spec.phi);
  const double c = mom.c, v = mom.v;
  const double at = spec.alpha_t, as = spec.alpha_s, rho = spec.rho;
  ClassCubic cc;
  cc.a_coef = rho * c - c;
  cc.k1 = -2.0 * c * c + 2.0 * c * c * rho;
  cc.k2 = at * (v - c * c) / (as - 1.0) + 4.0 * c * c - 2.0 * c * c * rho - v;
  cc.k3 = (at - 2.0) * c * c + v;
  cc.z1 = cc.a_coef * cc.k1;
  cc.z2 = 2.0 * cc.a_coef * cc.k2 - c * cc.k1;
  cc.z3 = 3.0 * cc.a_coef * cc.k3 + cc.a_coef * (at - 1.0) * cc.k2 -
          2.0 * c * (at - 1.0) * cc.k1;
  cc.z4 = (2.0 * (at - 1.0) * cc.a_coef + c) * cc.k3 - c * (at - 1.0) * cc.k2;
  return cc;
}

DeltaCurve delta_star_numeric(const TaskSpec& spec, const SaddleSolution& source,
                              int grid, const SolverOptions& opts) {
  if (grid < 2) throw std::invalid_argument("delta_star_numeric: grid must be >= 2");
  DeltaCurve curve;
  curve.delta.reserve(grid);
  curve.e_test.reserve(grid);
  TaskSpec point = spec;
  double best = std::numeric_limits<double>::infinity();
  for (int i = 0; i < grid; ++i) {
    const double delta = static_cast<double>(i) / (grid - 1);
    point.transfer = TransferConfig::hard(delta);
    SaddleSolution sol;
    try {
      sol = solve_hard(point, source, opts);
    } catch (const std::exception& e) {
      std::ostringstream msg;
      msg << "delta_star_numeric failed at delta = " << delta << ": " << e.what();
      throw std::runtime_error(msg.str());
    }
    const double err = predict_gen_error(point, sol.q, sol.r);
    curve.delta.push_back(delta);
    curve.e_test.push_back(err);
    if (err < best) {  // strict: ties break toward the smaller delta
      best = err;
      curve.delta_star = delta;
      curve.e_test_star = err;
    }
  }
  return curve;
}

std::vector<PhaseRow> boundary_sweep(const TaskSpec& spec_template,
                                     const std::vector<double>& rho_grid,
                                     const std::vector<double>& alpha_t_grid,
                                     int delta_grid, const SolverOptions& opts) {
  const double nan = std::numeric_limits<double>::quiet_NaN();
  std::vector<PhaseRow> rows;
  for (const double alpha_t : alpha_t_grid) {
    for (const double rho : rho_grid) {
      TaskSpec spec = spec_template;
      spec.alpha_t = alpha_t;
      spec.rho = rho;
      const SaddleSolution source = solve_source(spec, opts);
      const DeltaCurve curve = delta_star_numeric(spec, source, delta_grid, opts);
      PhaseRow row;
      row.alpha_t = alpha_t;
      row.alpha_s = spec.alpha_s;
      row.rho = rho;
      row.delta_star = curve.delta_star;
      row.e_test_star = curve.e_test_star;
      row.e_test_none = curve.e_test.front();
      row.e_test_full = curve.e_test.back();
      row.rho_c = nan;
      row.g_threshold = nan;
      const bool analytic_regime = spec.loss.kind == Loss::Squared &&
                                   spec.lambda == 0.0 && alpha_t > 1.0 &&
                                   spec.alpha_s > 1.0;
      if (analytic_regime && spec.phi_hat == Activation::Identity)
        row.rho_c = rho_c(spec.phi, spec.alpha_s, alpha_t).rho_c;
      if (spec.phi == Activation::Sign && spec.phi_hat == Activation::Sign &&
          alpha_t > 1.0 && spec.alpha_s > 1.0) {
        row.g_threshold = g_threshold(alpha_t, spec.alpha_s);
        row.sufficiency_gap = rho > row.g_threshold && curve.delta_star == 0.0;
      }
      rows.push_back(row);
    }
  }
  return rows;
}

}  // namespace tlphase
