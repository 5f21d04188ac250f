#pragma once

// Phase-transition analysis of the hard formulation: the analytic
// negative-to-positive transfer boundary for squared loss, the classification
// cubic, and numerical optimal-transfer-rate curves.

#include <string>
#include <vector>

#include "tlphase/saddle.hpp"

namespace tlphase {

struct PhaseBoundary {
  double rho_c = 0.0;  // may exceed 1: transfer never helps
  static constexpr const char* regime_below = "negative transfer";
  static constexpr const char* regime_above = "positive transfer";
};

// rho_c = 1 - (v - c^2)/(2c^2) * (1/(alpha_t-1) - 1/(alpha_s-1)).
// Requires alpha_s > 1 and alpha_t > 1.
PhaseBoundary rho_c(Activation phi, double alpha_s, double alpha_t);

enum class DeltaStar { Zero, One, Boundary };

// Optimal transfer rate for squared loss, lambda = 0, identity predictor,
// decided by the sign of Z_t = (alpha_t-1)*((c-beta1)^2 + beta2) - (v-c^2).
DeltaStar delta_star_regression(const TaskSpec& spec);

// Sufficient positive-transfer threshold for the sign-sign pair.
double g_threshold(double alpha_t, double alpha_s);

struct ClassCubic {
  double a_coef = 0.0;            // rho*c - c
  double k1 = 0.0, k2 = 0.0, k3 = 0.0;
  double z1 = 0.0, z2 = 0.0, z3 = 0.0, z4 = 0.0;

  double h(double delta) const {
    return ((z1 * delta + z2) * delta + z3) * delta + z4;
  }
  // The alignment curve whose derivative sign h tracks.
  double g(double delta, double alpha_t, double c) const;
};

ClassCubic class_cubic(const TaskSpec& spec);

struct DeltaCurve {
  std::vector<double> delta;
  std::vector<double> e_test;
  double delta_star = 0.0;  // ties broken toward smaller delta
  double e_test_star = 0.0;
};

// Sweeps delta over a uniform grid (endpoints included), solving the hard
// problem and evaluating the predicted generalization error at each point.
DeltaCurve delta_star_numeric(const TaskSpec& spec, const SaddleSolution& source,
                              int grid = 201, const SolverOptions& opts = {});

struct PhaseRow {
  double alpha_t = 0.0;
  double alpha_s = 0.0;
  double rho = 0.0;
  double delta_star = 0.0;
  double e_test_star = 0.0;
  double e_test_none = 0.0;  // delta = 0
  double e_test_full = 0.0;  // delta = 1
  double rho_c = 0.0;        // analytic boundary where applicable, else NaN
  double g_threshold = 0.0;  // sign-sign sufficient bound, else NaN
  bool sufficiency_gap = false;  // rho > g but delta_star = 0
};

std::vector<PhaseRow> boundary_sweep(const TaskSpec& spec_template,
                                     const std::vector<double>& rho_grid,
                                     const std::vector<double>& alpha_t_grid,
                                     int delta_grid = 201,
                                     const SolverOptions& opts = {});

}  // namespace tlphase
