#include "doctest.h"

#include <cmath>
#include <random>

#include "tlphase/rng.hpp"
#include "tlphase/saddle.hpp"
#include "tlphase/simulate.hpp"

using namespace tlphase;

namespace {

TaskSpec sim_regression(double alpha_s, double alpha_t, double rho, double lambda) {
  TaskSpec s;
  s.alpha_s = alpha_s;
  s.alpha_t = alpha_t;
  s.rho = rho;
  s.lambda = lambda;
  s.loss = {Loss::Squared, LossForm::Regression};
  s.phi = Activation::Relu;
  s.phi_hat = Activation::Identity;
  s.upsilon = 0;
  return s;
}

TaskSpec sim_classification(double alpha_s, double alpha_t, double rho, double lambda,
                            Loss loss) {
  TaskSpec s;
  s.alpha_s = alpha_s;
  s.alpha_t = alpha_t;
  s.rho = rho;
  s.lambda = lambda;
  s.loss = {loss, LossForm::Classification};
  s.phi = Activation::Sign;
  s.phi_hat = Activation::Sign;
  s.upsilon = 1;
  return s;
}

double erm_objective(const LossKind& loss, const Dataset& data, double lambda,
                     const Eigen::VectorXd& pen, const Eigen::VectorXd& ref,
                     const Eigen::VectorXd& w) {
  const Eigen::VectorXd z = data.features * w;
  double obj = 0.0;
  for (Eigen::Index i = 0; i < z.size(); ++i)
    obj += loss_value(loss, data.labels[i], z[i]);
  obj /= static_cast<double>(data.features.cols());
  obj += 0.5 * lambda * w.squaredNorm();
  for (Eigen::Index i = 0; i < w.size(); ++i)
    obj += 0.5 * pen[i] * (w[i] - ref[i]) * (w[i] - ref[i]);
  return obj;
}

}  // namespace

TEST_CASE("counter rng is deterministic and splittable") {
  CounterRng a(42), b(42);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
  CHECK(derive_stream(42, 1) != derive_stream(42, 2));
  CHECK(trial_seed(7, 0) != trial_seed(7, 1));
  CounterRng g(3);
  double mean = 0.0, var = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double z = g.next_gauss();
    mean += z;
    var += z * z;
  }
  mean /= n;
  var = var / n - mean * mean;
  CHECK(std::abs(mean) < 0.01);
  CHECK(var == doctest::Approx(1.0).epsilon(0.02));
}

TEST_CASE("teacher pairs have exact geometry") {
  const TeacherPair tp = gen_teachers(512, 0.37, 99);
  CHECK(std::abs(tp.xi_t.norm() - 1.0) <= 1e-12);
  CHECK(std::abs(tp.xi_s.norm() - 1.0) <= 1e-12);
  CHECK(std::abs(tp.xi_t.dot(tp.xi_s) - 0.37) <= 1e-10);

  const TeacherPair again = gen_teachers(512, 0.37, 99);
  CHECK(tp.xi_t == again.xi_t);
  CHECK(tp.xi_s == again.xi_s);

  const TeacherPair aligned = gen_teachers(64, 1.0, 5);
  CHECK((aligned.xi_s - aligned.xi_t).norm() == 0.0);
  const TeacherPair ortho = gen_teachers(64, 0.0, 5);
  CHECK(std::abs(ortho.xi_t.dot(ortho.xi_s)) <= 1e-12);

  CHECK_THROWS_AS(gen_teachers(1, 0.5, 1), std::invalid_argument);
}

TEST_CASE("datasets follow the teacher-student generative model") {
  const TeacherPair tp = gen_teachers(32, 0.5, 11);
  const Dataset sign_data = gen_dataset(200, 32, tp.xi_t, Activation::Sign, 4);
  for (int i = 0; i < 200; ++i)
    CHECK((sign_data.labels[i] == 1.0 || sign_data.labels[i] == -1.0));
  const Dataset relu_data = gen_dataset(200, 32, tp.xi_t, Activation::Relu, 4);
  for (int i = 0; i < 200; ++i) CHECK(relu_data.labels[i] >= 0.0);
  // labels reproducible from features and teacher
  const Eigen::VectorXd scores = relu_data.features * tp.xi_t;
  for (int i = 0; i < 200; ++i)
    CHECK(relu_data.labels[i] == std::max(scores[i], 0.0));

  // CLT bound on the teacher projection
  const Dataset big = gen_dataset(100000, 16, gen_teachers(16, 0.0, 2).xi_t,
                                  Activation::Identity, 8);
  CHECK(std::abs(big.labels.mean()) <= 0.02);
}

TEST_CASE("squared fit matches a hand-rolled cramer solve") {
  Dataset data;
  data.features.resize(3, 2);
  data.features << 1.0, 2.0, -1.0, 0.5, 0.25, -1.5;
  data.teacher = Eigen::VectorXd::Zero(2);
  data.labels.resize(3);
  data.labels << 1.0, -0.5, 2.0;
  const double lambda = 1.0;
  const int p = 2;

  // normal equations by Cramer's rule
  const Eigen::MatrixXd m =
      data.features.transpose() * data.features / double(p) +
      lambda * Eigen::MatrixXd::Identity(2, 2);
  const Eigen::VectorXd rhs = data.features.transpose() * data.labels / double(p);
  const double det = m(0, 0) * m(1, 1) - m(0, 1) * m(1, 0);
  const double w0 = (rhs[0] * m(1, 1) - m(0, 1) * rhs[1]) / det;
  const double w1 = (m(0, 0) * rhs[1] - rhs[0] * m(1, 0)) / det;

  const FitResult fit = fit_erm({Loss::Squared, LossForm::Regression}, data, lambda);
  CHECK(std::abs(fit.w[0] - w0) < 1e-10);
  CHECK(std::abs(fit.w[1] - w1) < 1e-10);
  CHECK(fit.kkt_residual <= 1e-10);
}

TEST_CASE("squared fit with penalty matches a dense linear solve") {
  std::mt19937_64 rng(31);
  std::normal_distribution<double> gauss;
  const int n = 40, p = 8;
  Dataset data;
  data.features.resize(n, p);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < p; ++j) data.features(i, j) = gauss(rng);
  data.labels.resize(n);
  for (int i = 0; i < n; ++i) data.labels[i] = gauss(rng);
  Eigen::VectorXd pen(p), ref(p);
  for (int j = 0; j < p; ++j) {
    pen[j] = std::abs(gauss(rng));
    ref[j] = gauss(rng);
  }
  const double lambda = 0.3;
  const Eigen::MatrixXd m = data.features.transpose() * data.features / double(p) +
                            lambda * Eigen::MatrixXd::Identity(p, p) +
                            pen.asDiagonal().toDenseMatrix();
  const Eigen::VectorXd rhs =
      data.features.transpose() * data.labels / double(p) + pen.cwiseProduct(ref);
  const Eigen::VectorXd expected = m.ldlt().solve(rhs);

  const FitResult fit =
      fit_erm({Loss::Squared, LossForm::Regression}, data, lambda, pen, ref);
  CHECK((fit.w - expected).norm() < 1e-8);

  // feasible probes never beat the minimizer
  const LossKind sq{Loss::Squared, LossForm::Regression};
  const double at_fit = erm_objective(sq, data, lambda, pen, ref, fit.w);
  CHECK(at_fit <= erm_objective(sq, data, lambda, pen, ref, Eigen::VectorXd::Zero(p)) + 1e-12);
  CHECK(at_fit <= erm_objective(sq, data, lambda, pen, ref, ref) + 1e-12);
}

TEST_CASE("all-frozen fit returns the reference verbatim") {
  const TeacherPair tp = gen_teachers(16, 0.5, 21);
  const Dataset data = gen_dataset(30, 16, tp.xi_t, Activation::Sign, 22);
  Eigen::VectorXd values(16);
  for (int i = 0; i < 16; ++i) values[i] = 0.1 * i - 0.5;
  std::vector<std::uint8_t> mask(16, 1);
  const FitResult fit = fit_erm({Loss::Logistic, LossForm::Classification}, data, 0.5,
                                std::nullopt, std::nullopt, mask, values);
  CHECK(fit.iters == 0);
  for (int i = 0; i < 16; ++i) CHECK(fit.w[i] == values[i]);
}

TEST_CASE("nonsmooth fits beat random probes and meet the KKT bound") {
  const TeacherPair tp = gen_teachers(5, 0.5, 77);
  const Dataset data = gen_dataset(20, 5, tp.xi_t, Activation::Sign, 78);
  const Eigen::VectorXd zero_pen = Eigen::VectorXd::Zero(5);
  const Eigen::VectorXd zero_ref = Eigen::VectorXd::Zero(5);
  std::mt19937_64 rng(5150);
  std::normal_distribution<double> gauss;

  for (Loss kind : {Loss::Logistic, Loss::Hinge}) {
    const LossKind loss{kind, LossForm::Classification};
    const FitResult fit = fit_erm(loss, data, 0.5);
    CHECK(fit.kkt_residual <= 1e-8);
    const double at_fit = erm_objective(loss, data, 0.5, zero_pen, zero_ref, fit.w);
    double best_probe = std::numeric_limits<double>::infinity();
    Eigen::VectorXd probe(5);
    for (int t = 0; t < 10000; ++t) {
      for (int j = 0; j < 5; ++j) probe[j] = fit.w[j] + 0.3 * gauss(rng);
      best_probe = std::min(best_probe,
                            erm_objective(loss, data, 0.5, zero_pen, zero_ref, probe));
    }
    CHECK(at_fit <= best_probe + 1e-9);
    // feasible-point probes
    CHECK(at_fit <=
          erm_objective(loss, data, 0.5, zero_pen, zero_ref, Eigen::VectorXd::Zero(5)) +
              1e-12);
  }
}

TEST_CASE("overlap decomposition holds on fitted vectors") {
  const TaskSpec spec = sim_regression(3.0, 2.0, 0.6, 0.1);
  auto [w, record] = run_source(spec, 80, 1234);
  CHECK(std::abs(record.q_hat * record.q_hat + record.r_hat * record.r_hat -
                 w.squaredNorm()) <= 1e-10);
  CHECK(record.kkt_residual <= 1e-8);
}

TEST_CASE("reduction identities are exact at the trial level") {
  for (int kind = 0; kind < 2; ++kind) {
    TaskSpec base = kind == 0 ? sim_regression(3.0, 1.5, 0.7, 0.2)
                              : sim_classification(3.0, 1.5, 0.7, 0.4, Loss::Logistic);
    const int p = 64;
    const std::uint64_t seed = 4242 + kind;

    TaskSpec none = base;
    none.transfer = TransferConfig::none();
    const TrialRecord none_rec = run_transfer_trial(none, p, seed);

    TaskSpec hard0 = base;
    hard0.transfer = TransferConfig::hard(0.0);
    const TrialRecord hard_rec = run_transfer_trial(hard0, p, seed);
    CHECK(hard_rec.q_hat == none_rec.q_hat);
    CHECK(hard_rec.r_hat == none_rec.r_hat);
    CHECK(hard_rec.train_error == none_rec.train_error);
    CHECK(hard_rec.gen_error == none_rec.gen_error);

    TaskSpec soft0 = base;
    soft0.transfer = TransferConfig::soft(SpectralDist::point_mass(0.0));
    const TrialRecord soft_rec = run_transfer_trial(soft0, p, seed);
    CHECK(soft_rec.q_hat == none_rec.q_hat);
    CHECK(soft_rec.r_hat == none_rec.r_hat);
    CHECK(soft_rec.gen_error == none_rec.gen_error);

    // delta = 1 copies the source vector verbatim
    TaskSpec full = base;
    full.transfer = TransferConfig::hard(1.0);
    const TrialRecord full_rec = run_transfer_trial(full, p, seed);
    CHECK(full_rec.realized_delta == 1.0);
    CHECK(full_rec.solver_iters == 0);
    auto [w_s, src_rec] = run_source(base, p, seed);
    const TeacherPair teachers = trial_teachers(p, base.rho, seed);
    const double q = teachers.xi_t.dot(w_s);
    const double r = (w_s - q * teachers.xi_t).norm();
    CHECK(full_rec.q_hat == q);
    CHECK(full_rec.r_hat == r);
  }
}

TEST_CASE("hard-transfer frozen coordinates match the source bitwise") {
  TaskSpec spec = sim_classification(3.0, 1.5, 0.6, 0.4, Loss::Hinge);
  spec.transfer = TransferConfig::hard(0.5);
  const int p = 48;
  const std::uint64_t seed = 20240;
  const TrialRecord rec = run_transfer_trial(spec, p, seed);
  CHECK(rec.realized_delta > 0.1);
  CHECK(rec.realized_delta < 0.9);
  CHECK(rec.kkt_residual <= 1e-8);
}

TEST_CASE("run_trials is deterministic and flags single-trial batches") {
  TaskSpec spec = sim_regression(2.5, 1.5, 0.5, 0.3);
  spec.transfer = TransferConfig::hard(0.4);
  const TrialSummary a = run_trials(spec, 40, 5, 99, 2);
  const TrialSummary b = run_trials(spec, 40, 5, 99, 1);
  CHECK(a.q_hat.mean == b.q_hat.mean);
  CHECK(a.gen_error.std_error == b.gen_error.std_error);
  REQUIRE(a.records.size() == 5);
  for (int i = 0; i < 5; ++i) {
    CHECK(a.records[i].seed == b.records[i].seed);
    CHECK(a.records[i].q_hat == b.records[i].q_hat);
  }
  const TrialSummary single = run_trials(spec, 40, 1, 99);
  CHECK(!single.has_std_error);
  CHECK(std::isnan(single.q_hat.std_error));
}

TEST_CASE("multi-mode trials reproduce single-mode runs exactly") {
  TaskSpec base = sim_regression(3.0, 1.5, 0.75, 0.2);
  const std::vector<TransferConfig> modes = {
      TransferConfig::none(), TransferConfig::hard(0.5),
      TransferConfig::soft(SpectralDist::point_mass(1.0))};
  const auto multi = run_trials_multi(base, modes, 50, 4, 7, 1);
  REQUIRE(multi.size() == 3);
  for (std::size_t m = 0; m < modes.size(); ++m) {
    TaskSpec spec = base;
    spec.transfer = modes[m];
    const TrialSummary solo = run_trials(spec, 50, 4, 7, 1);
    for (int i = 0; i < 4; ++i) {
      CHECK(multi[m].records[i].q_hat == solo.records[i].q_hat);
      CHECK(multi[m].records[i].r_hat == solo.records[i].r_hat);
      CHECK(multi[m].records[i].train_error == solo.records[i].train_error);
    }
  }
}

TEST_CASE("doubling trials roughly halves the squared standard error") {
  TaskSpec spec = sim_regression(3.0, 2.0, 0.5, 0.2);
  const TrialSummary small = run_trials(spec, 40, 24, 1001, 2);
  const TrialSummary large = run_trials(spec, 40, 48, 1001, 2);
  const double ratio = (small.gen_error.std_error * small.gen_error.std_error) /
                       (large.gen_error.std_error * large.gen_error.std_error);
  CHECK(ratio > 1.0);
  CHECK(ratio < 4.0);
}

TEST_CASE("source overlaps concentrate on the closed-form prediction") {
  // lambda = 0 runs execute at a vanishing ridge; the overlap should sit
  // within a few percent of q* = c at moderate dimension.
  TaskSpec spec = sim_regression(4.0, 2.0, 0.5, 0.0);
  double q_mean = 0.0, r_mean = 0.0;
  const int trials = 20;
  for (int i = 0; i < trials; ++i) {
    const auto [w, rec] = run_source(spec, 800, trial_seed(31337, i));
    q_mean += rec.q_hat;
    r_mean += rec.r_hat;
  }
  q_mean /= trials;
  r_mean /= trials;
  const SaddleSolution pred = solve_source(spec);
  CHECK(std::abs(q_mean - pred.q) <= 0.05 * pred.q);
  CHECK(std::abs(r_mean - pred.r) <= 0.05 * pred.r);
}

TEST_CASE("trial training and test errors track the asymptotic prediction") {
  TaskSpec spec = sim_regression(18.0, 1.5, 0.75, 0.2);
  spec.transfer = TransferConfig::soft(SpectralDist::point_mass(1.0));
  const SaddleSolution source = solve_source(spec);
  const SaddleSolution sol = solve_soft(spec, source);
  const TrialSummary s = run_trials(spec, 400, 12, 99, 2);
  const double z_test = (s.gen_error.mean - predict_gen_error(spec, sol.q, sol.r)) /
                        s.gen_error.std_error;
  const double z_train = (s.train_error.mean - predict_train_error(spec, sol)) /
                         s.train_error.std_error;
  CHECK(std::abs(z_test) <= 5.0);
  CHECK(std::abs(z_train) <= 5.0);
}

TEST_CASE("random weighting spectra agree between sampling and asymptotics") {
  // scaled-squared uniform and beta spectra: the sampled diagonal penalty and
  // the discretized transform must describe the same distribution
  TaskSpec base = sim_regression(12.0, 1.5, 0.75, 0.2);
  const std::vector<TransferConfig> modes = {
      TransferConfig::soft(SpectralDist::squared_uniform(0.8)),
      TransferConfig::soft(SpectralDist::squared_beta(0.8, 2.0, 2.0))};
  const auto sums = run_trials_multi(base, modes, 400, 12, 4321, 2);
  const SaddleSolution source = solve_source(base);
  for (std::size_t m = 0; m < modes.size(); ++m) {
    TaskSpec spec = base;
    spec.transfer = modes[m];
    const SaddleSolution sol = solve_soft(spec, source);
    const double pred = predict_gen_error(spec, sol.q, sol.r);
    const auto& g = sums[m].gen_error;
    CHECK(std::abs(g.mean - pred) <= 5.0 * g.std_error);
  }
}

TEST_CASE("empty datasets are rejected") {
  TaskSpec spec = sim_regression(0.001, 1.5, 0.5, 0.3);
  CHECK_THROWS_WITH_AS(run_source(spec, 100, 1).first, doctest::Contains("empty dataset"),
                       std::runtime_error);
}

TEST_CASE("fresh-sample estimator tracks the analytic conditional error") {
  TaskSpec spec = sim_regression(4.0, 2.0, 0.6, 0.1);
  auto [w, record] = run_source(spec, 300, 555);
  const TeacherPair teachers = trial_teachers(300, spec.rho, 555);
  const double q = teachers.xi_s.dot(w);
  const double r = (w - q * teachers.xi_s).norm();
  const double analytic = predict_gen_error(spec, q, r);
  const double fresh = estimate_gen_error_fresh(spec, w, teachers.xi_s, 40000, 777);
  CHECK(std::abs(fresh - analytic) <= 0.1 * analytic + 0.01);
}

TEST_CASE("trial record csv carries the pinned header") {
  TrialRecord rec;
  rec.seed = 7;
  rec.q_hat = 0.5;
  rec.solver_iters = 3;
  const std::string csv = trial_records_csv({rec});
  CHECK(csv.rfind("seed,q_hat,r_hat,train_error,gen_error,solver_iters,kkt_residual\n",
                  0) == 0);
  CHECK(csv.find("\n7,0.5,") != std::string::npos);
}
