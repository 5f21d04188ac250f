#include "tlphase/quadrature.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include <Eigen/Dense>

namespace tlphase {

namespace {

constexpr double kInvSqrt2Pi = 0.39894228040143267794;

// Nodes/weights from the symmetric tridiagonal Jacobi matrix (Golub-Welsch).
QuadRule rule_from_jacobi(const Eigen::VectorXd& diag, const Eigen::VectorXd& sub,
                          double total_mass) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
  es.computeFromTridiagonal(diag, sub);
  if (es.info() != Eigen::Success)
    throw std::runtime_error("quadrature eigen-decomposition failed");
  const int n = static_cast<int>(diag.size());
  QuadRule rule;
  rule.nodes.resize(n);
  rule.weights.resize(n);
  for (int i = 0; i < n; ++i) {
    rule.nodes[i] = es.eigenvalues()[i];
    const double v0 = es.eigenvectors()(0, i);
    rule.weights[i] = total_mass * v0 * v0;
  }
  return rule;
}

}  // namespace

QuadRule gauss_hermite(int order) {
  if (order < 1) throw std::invalid_argument("quadrature order must be >= 1");
  if (order == 1) return {{0.0}, {1.0}};
  Eigen::VectorXd diag = Eigen::VectorXd::Zero(order);
  Eigen::VectorXd sub(order - 1);
  // Probabilists' Hermite recurrence: off-diagonal sqrt(k).
  for (int k = 1; k < order; ++k) sub[k - 1] = std::sqrt(static_cast<double>(k));
  return rule_from_jacobi(diag, sub, 1.0);
}

QuadRule gauss_legendre(int order) {
  if (order < 1) throw std::invalid_argument("quadrature order must be >= 1");
  if (order == 1) return {{0.0}, {2.0}};
  Eigen::VectorXd diag = Eigen::VectorXd::Zero(order);
  Eigen::VectorXd sub(order - 1);
  for (int k = 1; k < order; ++k)
    sub[k - 1] = k / std::sqrt(4.0 * k * k - 1.0);
  return rule_from_jacobi(diag, sub, 2.0);
}

double expect1(const std::function<double(double)>& f, int order) {
  const QuadRule rule = gauss_hermite(order);
  double acc = 0.0;
  for (int i = 0; i < rule.order(); ++i) {
    const double fi = f(rule.nodes[i]);
    if (!std::isfinite(fi)) throw std::runtime_error("expect1: non-finite integrand");
    acc += rule.weights[i] * fi;
  }
  return acc;
}

double expect2(const std::function<double(double, double)>& f, int order) {
  const QuadRule rule = gauss_hermite(order);
  double acc = 0.0;
  for (int i = 0; i < rule.order(); ++i) {
    double inner = 0.0;
    for (int j = 0; j < rule.order(); ++j) {
      const double fij = f(rule.nodes[i], rule.nodes[j]);
      if (!std::isfinite(fij))
        throw std::runtime_error("expect2: non-finite integrand");
      inner += rule.weights[j] * fij;
    }
    acc += rule.weights[i] * inner;
  }
  return acc;
}

QuadRule split_normal_rule(double kink, int order) {
  if (order < 1) throw std::invalid_argument("quadrature order must be >= 1");
  // Cover the bulk of the normal mass on both sides of the kink. Panels are
  // capped in width so the mapped Gauss-Legendre rule stays sharp.
  const double reach = 13.5;
  const double lo = std::min(kink - 1.0, -reach);
  const double hi = std::max(kink + 1.0, reach);
  const QuadRule gl = gauss_legendre(order);

  QuadRule out;
  auto add_side = [&](double a, double b) {
    if (!(b > a)) return;
    const int panels = std::max(1, static_cast<int>(std::ceil((b - a) / 7.0)));
    const double h = (b - a) / panels;
    for (int p = 0; p < panels; ++p) {
      const double pa = a + p * h;
      const double mid = pa + 0.5 * h;
      const double half = 0.5 * h;
      for (int i = 0; i < gl.order(); ++i) {
        const double s = mid + half * gl.nodes[i];
        const double w =
            half * gl.weights[i] * kInvSqrt2Pi * std::exp(-0.5 * s * s);
        out.nodes.push_back(s);
        out.weights.push_back(w);
      }
    }
  };
  add_side(lo, kink);
  add_side(kink, hi);
  return out;
}

double expect_split(const std::function<double(double)>& f, double kink, int order) {
  const QuadRule rule = split_normal_rule(kink, order);
  double acc = 0.0;
  for (int i = 0; i < rule.order(); ++i) {
    const double fi = f(rule.nodes[i]);
    if (!std::isfinite(fi))
      throw std::runtime_error("expect_split: non-finite integrand");
    acc += rule.weights[i] * fi;
  }
  return acc;
}

}  // namespace tlphase
