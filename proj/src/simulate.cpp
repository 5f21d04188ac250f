#include "tlphase/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "tlphase/parallel.hpp"
#include "tlphase/prox.hpp"
#include "tlphase/rng.hpp"
#include "tlphase/saddle.hpp"

namespace tlphase {

namespace {

// Stage keys: every random ingredient of a trial draws from its own derived
// stream, so changing one stage (e.g. skipping the source fit) cannot shift
// any other stage's data.
enum Stage : std::uint64_t {
  kStageTeachers = 1,
  kStageSourceData = 2,
  kStageTargetData = 3,
  kStageMask = 4,
  kStageSigma = 5,
  kStageTest = 6,
};

void fill_gauss_rows(Eigen::MatrixXd& m, CounterRng& rng) {
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = rng.next_gauss();
}

Eigen::VectorXd apply_labels(Activation phi, const Eigen::VectorXd& scores) {
  Eigen::VectorXd y(scores.size());
  for (Eigen::Index i = 0; i < scores.size(); ++i)
    y[i] = apply_activation(phi, scores[i]);
  return y;
}

// Marsaglia-Tsang gamma variate, shape >= 1.
double gamma_variate(CounterRng& rng, double shape) {
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x, v;
    do {
      x = rng.next_gauss();
      v = 1.0 + c * x;
    } while (v <= 0.0);
    v = v * v * v;
    const double u = rng.next_uniform();
    if (std::log(u) < 0.5 * x * x + d - d * v + d * std::log(v)) return d * v;
  }
}

// One diagonal eigenvalue of Lambda = Sigma^T Sigma under the sampling
// convention: Sigma_ii = sqrt(beta_t) * V_ii with V unit-mean.
double sample_eigenvalue(const SpectralDist& dist, CounterRng& rng) {
  switch (dist.kind) {
    case SpectralDist::Kind::PointMass:
      return dist.mu0;
    case SpectralDist::Kind::ScaledSquaredUniform: {
      const double v = 2.0 * rng.next_uniform();
      return dist.beta_t * v * v;
    }
    case SpectralDist::Kind::ScaledSquaredBeta: {
      const double ga = gamma_variate(rng, dist.shape_a);
      const double gb = gamma_variate(rng, dist.shape_b);
      const double x = ga / (ga + gb);
      const double v = x * (dist.shape_a + dist.shape_b) / dist.shape_a;
      return dist.beta_t * v * v;
    }
    case SpectralDist::Kind::Empirical: {
      const std::size_t idx =
          static_cast<std::size_t>(rng.next_u64() % dist.eigenvalues.size());
      return dist.eigenvalues[idx];
    }
  }
  throw std::logic_error("unknown spectral kind");
}

struct FrozenSplit {
  std::vector<int> free_idx;
  std::vector<int> frozen_idx;
};

FrozenSplit split_mask(const std::optional<std::vector<std::uint8_t>>& mask, int p) {
  FrozenSplit fs;
  fs.free_idx.reserve(p);
  if (!mask) {
    for (int i = 0; i < p; ++i) fs.free_idx.push_back(i);
    return fs;
  }
  if (static_cast<int>(mask->size()) != p)
    throw std::invalid_argument("frozen mask size mismatch");
  for (int i = 0; i < p; ++i) {
    if ((*mask)[i]) fs.frozen_idx.push_back(i);
    else fs.free_idx.push_back(i);
  }
  return fs;
}

double loss_derivative(const LossKind& loss, double y, double x) {
  switch (loss.kind) {
    case Loss::Squared: return x - y;
    case Loss::Logistic: {
      const double t = y * x;
      if (t > 0.0) {
        const double e = std::exp(-t);
        return -y * e / (1.0 + e);
      }
      return -y / (1.0 + std::exp(t));
    }
    case Loss::Hinge:
      return y * x < 1.0 ? -y : 0.0;
  }
  throw std::logic_error("unknown loss");
}

// Normal equations accumulated in fixed-size blocks; works from a feature
// stream so the matrix never has to be materialized.
struct NormalEq {
  Eigen::MatrixXd G;  // A^T A
  Eigen::VectorXd g;  // A^T y
  double yy = 0.0;    // y^T y
  int n = 0;
};

NormalEq accumulate_normal_eq(int n, int p, const Eigen::VectorXd& teacher,
                              Activation phi, std::uint64_t stream_key) {
  constexpr int kBlock = 2048;
  NormalEq eq;
  eq.G = Eigen::MatrixXd::Zero(p, p);
  eq.g = Eigen::VectorXd::Zero(p);
  eq.n = n;
  CounterRng rng(stream_key);
  Eigen::MatrixXd block(kBlock, p);
  for (int row = 0; row < n; row += kBlock) {
    const int bs = std::min(kBlock, n - row);
    auto z = block.topRows(bs);
    for (int i = 0; i < bs; ++i)
      for (int j = 0; j < p; ++j) z(i, j) = rng.next_gauss();
    const Eigen::VectorXd y = apply_labels(phi, z * teacher);
    eq.G.selfadjointView<Eigen::Lower>().rankUpdate(z.transpose(), 1.0);
    eq.g.noalias() += z.transpose() * y;
    eq.yy += y.squaredNorm();
  }
  eq.G = eq.G.selfadjointView<Eigen::Lower>();
  return eq;
}

NormalEq normal_eq_from_dataset(const Dataset& data) {
  NormalEq eq;
  eq.n = static_cast<int>(data.features.rows());
  eq.G = Eigen::MatrixXd::Zero(data.features.cols(), data.features.cols());
  eq.G.selfadjointView<Eigen::Lower>().rankUpdate(data.features.transpose(), 1.0);
  eq.G = eq.G.selfadjointView<Eigen::Lower>();
  eq.g.noalias() = data.features.transpose() * data.labels;
  eq.yy = data.labels.squaredNorm();
  return eq;
}

struct SquaredFit {
  Eigen::VectorXd w;
  int iters = 0;
  double residual = 0.0;   // relative normal-equation residual
  double data_loss = 0.0;  // (1/p) * 0.5 * ||y - Aw||^2
};

// CG on (G_ff/p + lambda I + Lambda_ff) w_f = (g_f - G_fz w_z)/p + Lambda_f wr_f.
SquaredFit solve_squared_normal_eq(const NormalEq& eq, int p, double lambda,
                                   const std::optional<Eigen::VectorXd>& penalty_diag,
                                   const std::optional<Eigen::VectorXd>& w_ref,
                                   const FrozenSplit& fs,
                                   const std::optional<Eigen::VectorXd>& frozen_values,
                                   const FitOptions& opts) {
  const int pf = static_cast<int>(fs.free_idx.size());
  const int pz = static_cast<int>(fs.frozen_idx.size());
  SquaredFit fit;
  fit.w = Eigen::VectorXd::Zero(p);
  for (int k = 0; k < pz; ++k) fit.w[fs.frozen_idx[k]] = (*frozen_values)[fs.frozen_idx[k]];

  if (pf > 0) {
    Eigen::MatrixXd m(pf, pf);
    for (int a = 0; a < pf; ++a)
      for (int b = 0; b < pf; ++b) m(a, b) = eq.G(fs.free_idx[a], fs.free_idx[b]);
    m /= static_cast<double>(p);
    Eigen::VectorXd diag = Eigen::VectorXd::Constant(pf, lambda);
    Eigen::VectorXd rhs(pf);
    for (int a = 0; a < pf; ++a) rhs[a] = eq.g[fs.free_idx[a]];
    if (pz > 0) {
      for (int a = 0; a < pf; ++a) {
        double acc = 0.0;
        for (int k = 0; k < pz; ++k)
          acc += eq.G(fs.free_idx[a], fs.frozen_idx[k]) * fit.w[fs.frozen_idx[k]];
        rhs[a] -= acc;
      }
    }
    rhs /= static_cast<double>(p);
    if (penalty_diag) {
      for (int a = 0; a < pf; ++a) {
        const int i = fs.free_idx[a];
        diag[a] += (*penalty_diag)[i];
        rhs[a] += (*penalty_diag)[i] * (w_ref ? (*w_ref)[i] : 0.0);
      }
    }
    m.diagonal() += diag;

    // Plain conjugate gradient; the system is symmetric positive definite.
    // The recursion residual can drift from the true one, so each pass ends
    // with a fresh residual and restarts if it is still above target.
    Eigen::VectorXd x = Eigen::VectorXd::Zero(pf);
    const double target = opts.cg_tol * std::max(1.0, rhs.norm());
    const int max_cg = std::max(20 * pf, 200);
    int it = 0;
    double true_res = rhs.norm();
    for (int pass = 0; pass < 3 && true_res > target; ++pass) {
      Eigen::VectorXd res = rhs - m.selfadjointView<Eigen::Lower>() * x;
      Eigen::VectorXd dir = res;
      double rr = res.squaredNorm();
      while (std::sqrt(rr) > target && it < max_cg) {
        const Eigen::VectorXd md = m.selfadjointView<Eigen::Lower>() * dir;
        const double alpha = rr / dir.dot(md);
        x += alpha * dir;
        res -= alpha * md;
        const double rr_new = res.squaredNorm();
        dir = res + (rr_new / rr) * dir;
        rr = rr_new;
        ++it;
      }
      true_res = (rhs - m.selfadjointView<Eigen::Lower>() * x).norm();
    }
    fit.iters = it;
    fit.residual = true_res / std::max(1.0, rhs.norm());
    if (fit.residual > 10.0 * opts.cg_tol) {
      std::ostringstream msg;
      msg << "conjugate gradient stalled at relative residual " << fit.residual;
      throw std::runtime_error(msg.str());
    }
    for (int a = 0; a < pf; ++a) fit.w[fs.free_idx[a]] = x[a];
  }

  const double quad = fit.w.dot(eq.G.selfadjointView<Eigen::Lower>() * fit.w);
  fit.data_loss = 0.5 * (eq.yy - 2.0 * fit.w.dot(eq.g) + quad) / static_cast<double>(p);
  return fit;
}

double penalty_value(const Eigen::VectorXd& w,
                     const std::optional<Eigen::VectorXd>& penalty_diag,
                     const std::optional<Eigen::VectorXd>& w_ref) {
  if (!penalty_diag) return 0.0;
  double acc = 0.0;
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    const double d = w[i] - (w_ref ? (*w_ref)[i] : 0.0);
    acc += (*penalty_diag)[i] * d * d;
  }
  return 0.5 * acc;
}

// Chambolle-Pock primal-dual iteration for the nonsmooth losses. The dual
// step goes through the scalar prox via the Moreau identity; acceleration
// uses the strong convexity lambda + min(penalty).
FitResult fit_primal_dual(const LossKind& loss, const Dataset& data, double lambda,
                          const std::optional<Eigen::VectorXd>& penalty_diag,
                          const std::optional<Eigen::VectorXd>& w_ref,
                          const FrozenSplit& fs,
                          const std::optional<Eigen::VectorXd>& frozen_values,
                          const FitOptions& opts) {
  const int n = static_cast<int>(data.features.rows());
  const int p = static_cast<int>(data.features.cols());
  const int pf = static_cast<int>(fs.free_idx.size());
  const double np = static_cast<double>(p);

  FitResult out;
  out.w = Eigen::VectorXd::Zero(p);
  for (int k : fs.frozen_idx) out.w[k] = (*frozen_values)[k];

  Eigen::MatrixXd a_free(n, pf);
  for (int a = 0; a < pf; ++a) a_free.col(a) = data.features.col(fs.free_idx[a]);
  Eigen::VectorXd offset = Eigen::VectorXd::Zero(n);
  for (int k : fs.frozen_idx) offset += data.features.col(k) * out.w[k];

  Eigen::VectorXd pen = Eigen::VectorXd::Zero(pf);
  Eigen::VectorXd ref = Eigen::VectorXd::Zero(pf);
  double min_pen = penalty_diag ? std::numeric_limits<double>::infinity() : 0.0;
  for (int a = 0; a < pf; ++a) {
    const int i = fs.free_idx[a];
    if (penalty_diag) {
      pen[a] = (*penalty_diag)[i];
      min_pen = std::min(min_pen, pen[a]);
    }
    if (w_ref) ref[a] = (*w_ref)[i];
  }

  if (pf == 0) {
    out.iters = 0;
    out.kkt_residual = 0.0;
    Eigen::VectorXd z = offset;
    double dl = 0.0;
    for (int i = 0; i < n; ++i) dl += loss_value(loss, data.labels[i], z[i]);
    out.data_loss = dl / np;
    out.penalty_term = penalty_value(out.w, penalty_diag, w_ref);
    return out;
  }

  // Operator norm from power iterations on A_f^T A_f.
  Eigen::VectorXd v = Eigen::VectorXd::Constant(pf, 1.0 / std::sqrt(double(pf)));
  double l2 = 1.0;
  for (int it = 0; it < opts.power_iters; ++it) {
    Eigen::VectorXd av = a_free * v;
    Eigen::VectorXd atav = a_free.transpose() * av;
    l2 = atav.norm();
    if (l2 == 0.0) break;
    v = atav / l2;
  }
  const double op_norm = std::sqrt(std::max(l2, 1e-12)) * 1.01;

  // Balanced steps with theta = 1 are the safe default (hinge). When the loss
  // is smooth and g strongly convex, the linear-rate parametrization with
  // constant asymmetric steps converges far faster: the dual of f is strongly
  // convex with modulus 1/sup f'' = 4p for the logistic loss.
  const double gamma = lambda + (std::isfinite(min_pen) ? min_pen : 0.0);
  double tau = 1.0 / op_norm;
  double kappa = 1.0 / op_norm;
  double theta = 1.0;
  if (loss.kind == Loss::Logistic && gamma > 0.0) {
    const double dual_gamma = 4.0 * np;
    const double mu = 2.0 * std::sqrt(gamma * dual_gamma) / op_norm;
    tau = mu / (2.0 * gamma);
    kappa = mu / (2.0 * dual_gamma);
    theta = 1.0 / (1.0 + mu);
  }

  Eigen::VectorXd w = Eigen::VectorXd::Zero(pf);
  Eigen::VectorXd w_bar = w;
  Eigen::VectorXd u = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd w_prev = w;

  const auto kkt_residual = [&](const Eigen::VectorXd& wf, const Eigen::VectorXd& uf) {
    const Eigen::VectorXd z = a_free * wf + offset;
    double dual = 0.0;
    for (int i = 0; i < n; ++i) {
      const double y = data.labels[i];
      double d;
      if (loss.kind == Loss::Hinge) {
        const double slope = -y / np;
        const double lo = std::min(slope, 0.0), hi = std::max(slope, 0.0);
        const double t = y * z[i];
        double proj;
        if (t < 1.0 - 1e-7) proj = slope;
        else if (t > 1.0 + 1e-7) proj = 0.0;
        else proj = std::clamp(uf[i], lo, hi);
        d = uf[i] - proj;
      } else {
        d = uf[i] - loss_derivative(loss, y, z[i]) / np;
      }
      dual += d * d;
    }
    Eigen::VectorXd stat = a_free.transpose() * uf + lambda * wf;
    stat.array() += pen.array() * (wf - ref).array();
    return std::max(stat.norm() / (1.0 + wf.norm()),
                    std::sqrt(dual) / (1.0 + uf.norm()));
  };

  int iter = 0;
  double res = std::numeric_limits<double>::infinity();
  for (; iter < opts.max_iters; ++iter) {
    // dual ascent through the Moreau identity
    Eigen::VectorXd uhat = u + kappa * (a_free * w_bar);
    const double b = 1.0 / (kappa * np);
    for (int i = 0; i < n; ++i) {
      const double anchor = uhat[i] / kappa + offset[i];
      const double px = prox(loss, data.labels[i], anchor, b);
      u[i] = uhat[i] - kappa * (px - offset[i]);
    }
    // primal descent on g
    w_prev = w;
    Eigen::VectorXd what = w - tau * (a_free.transpose() * u);
    w = (what.array() + tau * pen.array() * ref.array()) /
        (1.0 + tau * lambda + tau * pen.array());
    w_bar = w + theta * (w - w_prev);

    if ((iter + 1) % 25 == 0 || iter + 1 == opts.max_iters) {
      res = kkt_residual(w, u);
      if (res <= opts.kkt_tol) {
        ++iter;
        break;
      }
    }
  }
  if (res > opts.kkt_tol) {
    std::ostringstream msg;
    msg << "primal-dual solver hit the iteration cap with KKT residual " << res;
    throw std::runtime_error(msg.str());
  }

  for (int a = 0; a < pf; ++a) out.w[fs.free_idx[a]] = w[a];
  out.iters = iter;
  out.kkt_residual = res;
  const Eigen::VectorXd z = a_free * w + offset;
  double dl = 0.0;
  for (int i = 0; i < n; ++i) dl += loss_value(loss, data.labels[i], z[i]);
  out.data_loss = dl / np;
  out.penalty_term = penalty_value(out.w, penalty_diag, w_ref);
  return out;
}

}  // namespace

TeacherPair gen_teachers(int p, double rho, std::uint64_t seed) {
  if (p < 2) throw std::invalid_argument("gen_teachers: p must be >= 2");
  if (!(rho >= -1.0 && rho <= 1.0))
    throw std::invalid_argument("gen_teachers: rho out of range");
  CounterRng rng_t(derive_stream(seed, 1));
  CounterRng rng_r(derive_stream(seed, 2));
  TeacherPair pair;
  pair.xi_t.resize(p);
  for (int i = 0; i < p; ++i) pair.xi_t[i] = rng_t.next_gauss();
  pair.xi_t.normalize();
  Eigen::VectorXd xi_r(p);
  for (int i = 0; i < p; ++i) xi_r[i] = rng_r.next_gauss();
  // One Gram-Schmidt pass pins the inner product to rho at round-off level.
  xi_r -= pair.xi_t.dot(xi_r) * pair.xi_t;
  xi_r.normalize();
  pair.xi_s = rho * pair.xi_t + std::sqrt(1.0 - rho * rho) * xi_r;
  return pair;
}

Dataset gen_dataset(int n, int p, const Eigen::VectorXd& teacher, Activation phi,
                    std::uint64_t seed) {
  if (n < 1) throw std::invalid_argument("gen_dataset: empty dataset");
  Dataset data;
  data.teacher = teacher;
  data.features.resize(n, p);
  CounterRng rng(seed);
  fill_gauss_rows(data.features, rng);
  data.labels = apply_labels(phi, data.features * teacher);
  return data;
}

FitResult fit_erm(const LossKind& loss, const Dataset& data, double lambda,
                  const std::optional<Eigen::VectorXd>& penalty_diag,
                  const std::optional<Eigen::VectorXd>& w_ref,
                  const std::optional<std::vector<std::uint8_t>>& frozen_mask,
                  const std::optional<Eigen::VectorXd>& frozen_values,
                  const FitOptions& opts) {
  const int p = static_cast<int>(data.features.cols());
  const FrozenSplit fs = split_mask(frozen_mask, p);
  if (!fs.frozen_idx.empty() && !frozen_values)
    throw std::invalid_argument("frozen mask without frozen values");
  if (lambda < 0.0) throw std::invalid_argument("lambda must be nonnegative");
  if (lambda == 0.0 && loss.kind != Loss::Squared && !penalty_diag)
    throw std::invalid_argument("non-squared losses need lambda > 0 or a penalty");

  if (loss.kind == Loss::Squared) {
    const NormalEq eq = normal_eq_from_dataset(data);
    const SquaredFit fit = solve_squared_normal_eq(eq, p, lambda, penalty_diag, w_ref,
                                                   fs, frozen_values, opts);
    FitResult out;
    out.w = fit.w;
    out.iters = fit.iters;
    out.kkt_residual = fit.residual;
    out.data_loss = fit.data_loss;
    out.penalty_term = penalty_value(fit.w, penalty_diag, w_ref);
    return out;
  }
  return fit_primal_dual(loss, data, lambda, penalty_diag, w_ref, fs, frozen_values,
                         opts);
}

namespace {

struct OverlapPair {
  double q = 0.0;
  double r = 0.0;
};

OverlapPair overlaps(const Eigen::VectorXd& w, const Eigen::VectorXd& teacher) {
  OverlapPair ov;
  ov.q = teacher.dot(w);
  ov.r = (w - ov.q * teacher).norm();
  return ov;
}

// Shared per-trial context so several transfer modes can reuse the teachers,
// the fitted source vector and the target data.
struct TrialContext {
  TeacherPair teachers;
  Eigen::VectorXd w_source;
  bool have_source = false;
  // target data, either streamed (squared) or materialized
  std::optional<NormalEq> target_eq;
  std::optional<Dataset> target_data;
  int n_t = 0;
  int p = 0;
  std::uint64_t seed = 0;
};

// lambda = 0 runs execute at a vanishing ridge so the solvers keep their
// convergence guarantees while approaching the min-norm limit.
double empirical_lambda(const TaskSpec& spec) {
  return spec.lambda == 0.0 ? 1e-8 : spec.lambda;
}

int sample_count(double alpha, int p, const char* which) {
  const long long n = std::llround(alpha * static_cast<double>(p));
  if (n < 1) {
    std::ostringstream msg;
    msg << which << ": empty dataset (alpha * p rounds below 1)";
    throw std::runtime_error(msg.str());
  }
  return static_cast<int>(n);
}

Eigen::VectorXd fit_source_vector(const TaskSpec& spec, int p, std::uint64_t seed,
                                  const FitOptions& opts, TrialRecord* record) {
  const int n_s = sample_count(spec.alpha_s, p, "run_source");
  const TeacherPair teachers = gen_teachers(p, spec.rho, derive_stream(seed, kStageTeachers));
  const std::uint64_t data_key = derive_stream(seed, kStageSourceData);

  Eigen::VectorXd w;
  int iters = 0;
  double kkt = 0.0, data_loss = 0.0;
  if (spec.loss.kind == Loss::Squared) {
    const NormalEq eq = accumulate_normal_eq(n_s, p, teachers.xi_s, spec.phi, data_key);
    const FrozenSplit fs = split_mask(std::nullopt, p);
    const SquaredFit fit = solve_squared_normal_eq(eq, p, empirical_lambda(spec), std::nullopt,
                                                   std::nullopt, fs, std::nullopt, opts);
    w = fit.w;
    iters = fit.iters;
    kkt = fit.residual;
    data_loss = fit.data_loss;
  } else {
    const Dataset data = gen_dataset(n_s, p, teachers.xi_s, spec.phi, data_key);
    const FitResult fit = fit_erm(spec.loss, data, empirical_lambda(spec), std::nullopt,
                                  std::nullopt, std::nullopt, std::nullopt, opts);
    w = fit.w;
    iters = fit.iters;
    kkt = fit.kkt_residual;
    data_loss = fit.data_loss;
  }
  if (record) {
    const OverlapPair ov = overlaps(w, teachers.xi_s);
    record->seed = seed;
    record->q_hat = ov.q;
    record->r_hat = ov.r;
    record->train_error = data_loss;
    record->gen_error = predict_gen_error(spec, ov.q, ov.r);
    record->solver_iters = iters;
    record->kkt_residual = kkt;
  }
  return w;
}

TrialContext make_trial_context(const TaskSpec& spec, int p, std::uint64_t seed,
                                bool need_source, const FitOptions& opts) {
  TrialContext ctx;
  ctx.p = p;
  ctx.seed = seed;
  ctx.n_t = sample_count(spec.alpha_t, p, "run_transfer_trial");
  ctx.teachers = gen_teachers(p, spec.rho, derive_stream(seed, kStageTeachers));
  if (need_source) {
    ctx.w_source = fit_source_vector(spec, p, seed, opts, nullptr);
    ctx.have_source = true;
  }
  const std::uint64_t data_key = derive_stream(seed, kStageTargetData);
  if (spec.loss.kind == Loss::Squared) {
    ctx.target_eq = accumulate_normal_eq(ctx.n_t, p, ctx.teachers.xi_t, spec.phi, data_key);
  } else {
    ctx.target_data = gen_dataset(ctx.n_t, p, ctx.teachers.xi_t, spec.phi, data_key);
  }
  return ctx;
}

TrialRecord run_mode_on_context(const TaskSpec& base, const TransferConfig& mode,
                                TrialContext& ctx, const FitOptions& opts) {
  TaskSpec spec = base;
  spec.transfer = mode;
  validate(spec);

  const int p = ctx.p;
  std::optional<Eigen::VectorXd> penalty_diag;
  std::optional<Eigen::VectorXd> w_ref;
  std::optional<std::vector<std::uint8_t>> mask;
  std::optional<Eigen::VectorXd> frozen_values;
  double realized_delta = 0.0;

  if (mode.mode == TransferMode::Hard) {
    CounterRng rng(derive_stream(ctx.seed, kStageMask));
    std::vector<std::uint8_t> m(p, 0);
    int count = 0;
    for (int i = 0; i < p; ++i) {
      m[i] = rng.next_uniform() <= mode.delta ? 1 : 0;
      count += m[i];
    }
    mask = std::move(m);
    frozen_values = ctx.w_source;
    realized_delta = static_cast<double>(count) / p;
  } else if (mode.mode == TransferMode::Soft) {
    CounterRng rng(derive_stream(ctx.seed, kStageSigma));
    Eigen::VectorXd diag(p);
    for (int i = 0; i < p; ++i) diag[i] = sample_eigenvalue(mode.spectrum, rng);
    penalty_diag = std::move(diag);
    w_ref = ctx.w_source;
  }

  const FrozenSplit fs = split_mask(mask, p);
  Eigen::VectorXd w;
  int iters = 0;
  double kkt = 0.0, data_loss = 0.0, penalty_term = 0.0;
  if (spec.loss.kind == Loss::Squared) {
    const SquaredFit fit = solve_squared_normal_eq(*ctx.target_eq, p, empirical_lambda(spec),
                                                   penalty_diag, w_ref, fs,
                                                   frozen_values, opts);
    w = fit.w;
    iters = fit.iters;
    kkt = fit.residual;
    data_loss = fit.data_loss;
    penalty_term = penalty_value(w, penalty_diag, w_ref);
  } else {
    const FitResult fit = fit_erm(spec.loss, *ctx.target_data, empirical_lambda(spec),
                                  penalty_diag, w_ref, mask, frozen_values, opts);
    w = fit.w;
    iters = fit.iters;
    kkt = fit.kkt_residual;
    data_loss = fit.data_loss;
    penalty_term = fit.penalty_term;
  }

  const OverlapPair ov = overlaps(w, ctx.teachers.xi_t);
  TrialRecord rec;
  rec.seed = ctx.seed;
  rec.q_hat = ov.q;
  rec.r_hat = ov.r;
  rec.train_error = data_loss + penalty_term;
  rec.gen_error = predict_gen_error(spec, ov.q, ov.r);
  rec.solver_iters = iters;
  rec.kkt_residual = kkt;
  rec.realized_delta = realized_delta;
  return rec;
}

}  // namespace

std::pair<Eigen::VectorXd, TrialRecord> run_source(const TaskSpec& spec, int p,
                                                   std::uint64_t seed,
                                                   const FitOptions& opts) {
  validate(spec);
  TrialRecord record;
  Eigen::VectorXd w = fit_source_vector(spec, p, seed, opts, &record);
  return {std::move(w), record};
}

TrialRecord run_transfer_trial(const TaskSpec& spec, int p, std::uint64_t seed,
                               const FitOptions& opts) {
  validate(spec);
  const bool need_source = spec.transfer.mode != TransferMode::None;
  TrialContext ctx = make_trial_context(spec, p, seed, need_source, opts);
  return run_mode_on_context(spec, spec.transfer, ctx, opts);
}

TeacherPair trial_teachers(int p, double rho, std::uint64_t seed) {
  return gen_teachers(p, rho, derive_stream(seed, kStageTeachers));
}

double estimate_gen_error_fresh(const TaskSpec& spec, const Eigen::VectorXd& w,
                                const Eigen::VectorXd& xi_t, int n_test,
                                std::uint64_t seed) {
  CounterRng rng(derive_stream(seed, kStageTest));
  const int p = static_cast<int>(w.size());
  Eigen::VectorXd a(p);
  double acc = 0.0;
  for (int t = 0; t < n_test; ++t) {
    for (int i = 0; i < p; ++i) a[i] = rng.next_gauss();
    const double y = apply_activation(spec.phi, a.dot(xi_t));
    const double pred = apply_activation(spec.phi_hat, a.dot(w));
    acc += (y - pred) * (y - pred);
  }
  const double scale = spec.upsilon == 1 ? 0.25 : 1.0;
  return scale * acc / n_test;
}

TrialSummary summarize(std::vector<TrialRecord> records) {
  TrialSummary s;
  s.n_trials = static_cast<int>(records.size());
  s.has_std_error = s.n_trials >= 2;
  const auto reduce = [&](auto getter, SummaryStat& stat) {
    double mean = 0.0;
    for (const auto& r : records) mean += getter(r);
    mean /= s.n_trials;
    double var = 0.0;
    for (const auto& r : records) {
      const double d = getter(r) - mean;
      var += d * d;
    }
    stat.mean = mean;
    stat.std_error = s.has_std_error
                         ? std::sqrt(var / (s.n_trials - 1.0) / s.n_trials)
                         : std::numeric_limits<double>::quiet_NaN();
  };
  if (s.n_trials > 0) {
    reduce([](const TrialRecord& r) { return r.q_hat; }, s.q_hat);
    reduce([](const TrialRecord& r) { return r.r_hat; }, s.r_hat);
    reduce([](const TrialRecord& r) { return r.train_error; }, s.train_error);
    reduce([](const TrialRecord& r) { return r.gen_error; }, s.gen_error);
  }
  s.records = std::move(records);
  return s;
}

TrialSummary run_trials(const TaskSpec& spec, int p, int n_trials,
                        std::uint64_t master_seed, int jobs, const FitOptions& opts) {
  if (n_trials < 1) throw std::invalid_argument("run_trials: n_trials must be >= 1");
  validate(spec);
  std::vector<TrialRecord> records(n_trials);
  parallel_for(n_trials, jobs, [&](std::size_t i) {
    const std::uint64_t seed = trial_seed(master_seed, i);
    try {
      records[i] = run_transfer_trial(spec, p, seed, opts);
    } catch (const std::exception& e) {
      std::ostringstream msg;
      msg << "trial with seed " << seed << " failed: " << e.what();
      throw std::runtime_error(msg.str());
    }
  });
  return summarize(std::move(records));
}

std::vector<TrialSummary> run_trials_multi(const TaskSpec& base,
                                           const std::vector<TransferConfig>& modes,
                                           int p, int n_trials,
                                           std::uint64_t master_seed, int jobs,
                                           const FitOptions& opts) {
  if (n_trials < 1) throw std::invalid_argument("run_trials_multi: n_trials must be >= 1");
  bool need_source = false;
  for (const auto& m : modes)
    if (m.mode != TransferMode::None) need_source = true;

  std::vector<std::vector<TrialRecord>> per_mode(modes.size(),
                                                 std::vector<TrialRecord>(n_trials));
  parallel_for(n_trials, jobs, [&](std::size_t i) {
    const std::uint64_t seed = trial_seed(master_seed, i);
    try {
      TrialContext ctx = make_trial_context(base, p, seed, need_source, opts);
      for (std::size_t m = 0; m < modes.size(); ++m)
        per_mode[m][i] = run_mode_on_context(base, modes[m], ctx, opts);
    } catch (const std::exception& e) {
      std::ostringstream msg;
      msg << "trial with seed " << seed << " failed: " << e.what();
      throw std::runtime_error(msg.str());
    }
  });

  std::vector<TrialSummary> out;
  out.reserve(modes.size());
  for (auto& records : per_mode) out.push_back(summarize(std::move(records)));
  return out;
}

std::string trial_records_csv(const std::vector<TrialRecord>& records) {
  std::ostringstream os;
  os << "seed,q_hat,r_hat,train_error,gen_error,solver_iters,kkt_residual\n";
  char buf[64];
  const auto num = [&](double x) {
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return std::string(buf);
  };
  for (const auto& r : records) {
    os << r.seed << ',' << num(r.q_hat) << ',' << num(r.r_hat) << ','
       << num(r.train_error) << ',' << num(r.gen_error) << ',' << r.solver_iters << ','
       << num(r.kkt_residual) << '\n';
  }
  return os.str();
}

}  // namespace tlphase
