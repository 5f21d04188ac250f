#pragma once

// Experiment vocabulary: activations, losses, task specifications and the
// scalar teacher moments c = E[z phi(z)], v = E[phi(z)^2] that drive the
// closed forms. All types are immutable values and safe to share across
// threads.

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace tlphase {

enum class Activation { Identity, Relu, Sign };

// sign(0) is fixed to +1 so that runs are deterministic at the tie.
double apply_activation(Activation phi, double x);

std::string to_string(Activation a);
Activation activation_from_string(const std::string& s);

enum class Loss { Squared, Logistic, Hinge };
enum class LossForm { Regression, Classification };

struct LossKind {
  Loss kind = Loss::Squared;
  LossForm form = LossForm::Regression;
};

// Pointwise loss value l(y; x). Squared is 0.5*(y-x)^2 in both forms (for
// labels in {-1,+1} the classification form 0.5*(1-yx)^2 coincides with it).
double loss_value(const LossKind& loss, double y, double x);

std::string to_string(Loss l);
Loss loss_from_string(const std::string& s);
std::string to_string(LossForm f);
LossForm loss_form_from_string(const std::string& s);

struct Moments {
  double c = 0.0;  // E[z phi(z)]
  double v = 0.0;  // E[phi(z)^2]
};

// Analytic moments for the supported activations.
Moments moments(Activation phi);

// Independent numerical route (split 1-D quadrature against the normal
// density); agrees with the analytic values to 1e-8.
Moments moments_quadrature(Activation phi, int order = 80);

// Limiting spectral distribution of Lambda = Sigma^T Sigma for soft transfer.
struct SpectralDist {
  enum class Kind { PointMass, ScaledSquaredUniform, ScaledSquaredBeta, Empirical };

  Kind kind = Kind::PointMass;
  double mu0 = 0.0;     // PointMass location
  double beta_t = 1.0;  // overall scale of the scaled-squared variants
  double shape_a = 2.0;
  double shape_b = 2.0;
  std::vector<double> eigenvalues;  // Empirical support

  double mu_min() const;
  double mu_max() const;

  static SpectralDist point_mass(double mu0);
  static SpectralDist squared_uniform(double beta_t);
  static SpectralDist squared_beta(double beta_t, double shape_a, double shape_b);
  static SpectralDist empirical(std::vector<double> eigenvalues);
};

enum class TransferMode { None, Hard, Soft };

struct TransferConfig {
  TransferMode mode = TransferMode::None;
  double delta = 0.0;     // Hard: expected fraction of frozen coordinates
  SpectralDist spectrum;  // Soft: distribution of Lambda eigenvalues

  static TransferConfig none();
  static TransferConfig hard(double delta);
  static TransferConfig soft(SpectralDist spectrum);
};

struct TaskSpec {
  double alpha_s = 2.0;  // n_s / p
  double alpha_t = 2.0;  // n_t / p
  double rho = 0.0;      // teacher similarity, in [-1, 1]
  double lambda = 0.0;   // ridge strength
  LossKind loss;
  Activation phi = Activation::Identity;      // teacher link
  Activation phi_hat = Activation::Identity;  // predictor link
  int upsilon = 0;                            // 0 regression, 1 classification
  TransferConfig transfer;
};

// Returns the violated constraints, empty when the spec is valid.
std::vector<std::string> validate_errors(const TaskSpec& spec);

// Returns the spec unchanged or throws std::invalid_argument listing every
// violated constraint.
TaskSpec validate(const TaskSpec& spec);

nlohmann::json to_json(const SpectralDist& dist);
SpectralDist spectral_dist_from_json(const nlohmann::json& j);
nlohmann::json to_json(const TaskSpec& spec);
TaskSpec task_spec_from_json(const nlohmann::json& j);

}  // namespace tlphase
