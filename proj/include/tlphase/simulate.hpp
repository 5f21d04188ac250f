#pragma once

// Finite-size Monte Carlo: teacher-student data generation, the actual convex
// learning problems (source, hard transfer, soft transfer), empirical
// overlaps, and seeded trial batches. Everything is deterministic under a
// fixed seed; trials own independent counter-RNG streams and can run in
// parallel.

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "tlphase/model.hpp"

namespace tlphase {

struct TeacherPair {
  Eigen::VectorXd xi_t;  // unit target teacher
  Eigen::VectorXd xi_s;  // unit source teacher with xi_t . xi_s = rho exactly
};

// Uniform unit-sphere teachers; xi_r is Gram-Schmidt-orthogonalized against
// xi_t before mixing so the inner product is exact. Requires p >= 2.
TeacherPair gen_teachers(int p, double rho, std::uint64_t seed);

struct Dataset {
  Eigen::MatrixXd features;  // n x p, i.i.d. standard normal
  Eigen::VectorXd labels;    // y_i = phi(a_i . teacher)
  Eigen::VectorXd teacher;
};

Dataset gen_dataset(int n, int p, const Eigen::VectorXd& teacher, Activation phi,
                    std::uint64_t seed);

struct FitOptions {
  double kkt_tol = 1e-8;      // relative KKT residual (primal-dual solver)
  double cg_tol = 1e-10;      // normal-equation residual (squared loss)
  int max_iters = 200000;
  int power_iters = 50;       // operator-norm estimate for the step sizes
};

struct FitResult {
  Eigen::VectorXd w;
  int iters = 0;
  double kkt_residual = 0.0;
  double data_loss = 0.0;     // (1/p) sum_i l(y_i; a_i . w)
  double penalty_term = 0.0;  // 0.5 * ||Sigma (w - w_ref)||^2
};

// Minimizes (1/p) sum_i l(y_i; a_i . w) + lambda/2 ||w||^2
//           + 0.5 (w - w_ref)^T diag(penalty_diag) (w - w_ref)
// over the free coordinates; frozen coordinates are held at the given values
// and their feature contribution folds into per-sample offsets.
// Squared loss solves the normal equations by conjugate gradient; logistic
// and hinge run a primal-dual first-order method whose dual step reuses the
// scalar prox through the Moreau identity. Iteration cap without convergence
// is a hard error carrying the residual.
FitResult fit_erm(const LossKind& loss, const Dataset& data, double lambda,
                  const std::optional<Eigen::VectorXd>& penalty_diag = std::nullopt,
                  const std::optional<Eigen::VectorXd>& w_ref = std::nullopt,
                  const std::optional<std::vector<std::uint8_t>>& frozen_mask = std::nullopt,
                  const std::optional<Eigen::VectorXd>& frozen_values = std::nullopt,
                  const FitOptions& opts = {});

struct TrialRecord {
  std::uint64_t seed = 0;
  double q_hat = 0.0;  // xi_t . w
  double r_hat = 0.0;  // || w - (xi_t . w) xi_t ||
  double train_error = 0.0;
  double gen_error = 0.0;
  int solver_iters = 0;
  double kkt_residual = 0.0;
  double realized_delta = 0.0;  // realized frozen fraction (hard transfer)
};

// Fits the source problem at n_s = round(alpha_s * p); the record's overlaps
// are measured against the source teacher.
std::pair<Eigen::VectorXd, TrialRecord> run_source(const TaskSpec& spec, int p,
                                                   std::uint64_t seed,
                                                   const FitOptions& opts = {});

// One full pipeline: teachers, source fit, target data, target fit under the
// spec's transfer mode, overlaps against xi_t, training and generalization
// errors. The generalization error is the exact conditional expectation given
// the fitted overlaps.
TrialRecord run_transfer_trial(const TaskSpec& spec, int p, std::uint64_t seed,
                               const FitOptions& opts = {});

// Fresh-sample estimator of the generalization error; cross-check path only.
double estimate_gen_error_fresh(const TaskSpec& spec, const Eigen::VectorXd& w,
                                const Eigen::VectorXd& xi_t, int n_test,
                                std::uint64_t seed);

// The exact teacher pair a trial with this seed draws, for post-hoc analysis
// of recorded trials.
TeacherPair trial_teachers(int p, double rho, std::uint64_t seed);

struct SummaryStat {
  double mean = 0.0;
  double std_error = 0.0;  // meaningful only when has_std_error
};

struct TrialSummary {
  int n_trials = 0;
  bool has_std_error = false;
  SummaryStat q_hat, r_hat, train_error, gen_error;
  std::vector<TrialRecord> records;
};

TrialSummary summarize(std::vector<TrialRecord> records);

// Seeds derive as trial_seed(master_seed, index); any failed trial aborts the
// batch with its seed in the error message.
TrialSummary run_trials(const TaskSpec& spec, int p, int n_trials,
                        std::uint64_t master_seed, int jobs = 1,
                        const FitOptions& opts = {});

// Same trials evaluated under several transfer modes with the teachers,
// source fit and target data shared within each trial. Summaries are ordered
// like `modes`.
std::vector<TrialSummary> run_trials_multi(const TaskSpec& base,
                                           const std::vector<TransferConfig>& modes,
                                           int p, int n_trials,
                                           std::uint64_t master_seed, int jobs = 1,
                                           const FitOptions& opts = {});

// CSV with header seed,q_hat,r_hat,train_error,gen_error,solver_iters,kkt_residual.
std::string trial_records_csv(const std::vector<TrialRecord>& records);

}  // namespace tlphase
