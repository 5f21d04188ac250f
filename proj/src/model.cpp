#include "tlphase/model.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include <nlohmann/json.hpp>

#include "tlphase/quadrature.hpp"

namespace tlphase {

double apply_activation(Activation phi, double x) {
  switch (phi) {
    case Activation::Identity: return x;
    case Activation::Relu: return x > 0.0 ? x : 0.0;
    case Activation::Sign: return x < 0.0 ? -1.0 : 1.0;
  }
  throw std::logic_error("unknown activation");
}

std::string to_string(Activation a) {
  switch (a) {
    case Activation::Identity: return "identity";
    case Activation::Relu: return "relu";
    case Activation::Sign: return "sign";
  }
  throw std::logic_error("unknown activation");
}

Activation activation_from_string(const std::string& s) {
  if (s == "identity") return Activation::Identity;
  if (s == "relu") return Activation::Relu;
  if (s == "sign") return Activation::Sign;
  throw std::invalid_argument("unknown activation: " + s);
}

double loss_value(const LossKind& loss, double y, double x) {
  switch (loss.kind) {
    case Loss::Squared: {
      const double u = y - x;
      return 0.5 * u * u;
    }
    case Loss::Logistic: {
      const double u = y * x;
      // log(1 + exp(-u)) without overflow
      return u > 0.0 ? std::log1p(std::exp(-u)) : -u + std::log1p(std::exp(u));
    }
    case Loss::Hinge: {
      const double u = y * x;
      return u < 1.0 ? 1.0 - u : 0.0;
    }
  }
  throw std::logic_error("unknown loss");
}

std::string to_string(Loss l) {
  switch (l) {
    case Loss::Squared: return "squared";
    case Loss::Logistic: return "logistic";
    case Loss::Hinge: return "hinge";
  }
  throw std::logic_error("unknown loss");
}

Loss loss_from_string(const std::string& s) {
  if (s == "squared") return Loss::Squared;
  if (s == "logistic") return Loss::Logistic;
  if (s == "hinge") return Loss::Hinge;
  throw std::invalid_argument("unknown loss: " + s);
}

std::string to_string(LossForm f) {
  return f == LossForm::Regression ? "regression" : "classification";
}

LossForm loss_form_from_string(const std::string& s) {
  if (s == "regression") return LossForm::Regression;
  if (s == "classification") return LossForm::Classification;
  throw std::invalid_argument("unknown loss form: " + s);
}

Moments moments(Activation phi) {
  switch (phi) {
    case Activation::Identity: return {1.0, 1.0};
    case Activation::Relu: return {0.5, 0.5};
    case Activation::Sign: return {std::sqrt(2.0 / std::numbers::pi), 1.0};
  }
  throw std::logic_error("unknown activation");
}

Moments moments_quadrature(Activation phi, int order) {
  const auto f_c = [phi](double z) { return z * apply_activation(phi, z); };
  const auto f_v = [phi](double z) {
    const double p = apply_activation(phi, z);
    return p * p;
  };
  // Relu and Sign are kinked at the origin; identity is smooth but the split
  // rule handles it just as well.
  return {expect_split(f_c, 0.0, order), expect_split(f_v, 0.0, order)};
}

double SpectralDist::mu_min() const {
  switch (kind) {
    case Kind::PointMass: return mu0;
    case Kind::ScaledSquaredUniform:
    case Kind::ScaledSquaredBeta: return 0.0;
    case Kind::Empirical:
      return eigenvalues.empty()
                 ? 0.0
                 : *std::min_element(eigenvalues.begin(), eigenvalues.end());
  }
  throw std::logic_error("unknown spectral kind");
}

double SpectralDist::mu_max() const {
  switch (kind) {
    case Kind::PointMass: return mu0;
    case Kind::ScaledSquaredUniform:
      // base variable uniform on [0,1] scaled to unit mean: V in [0,2]
      return 4.0 * beta_t;
    case Kind::ScaledSquaredBeta: {
      const double scale = (shape_a + shape_b) / shape_a;  // unit-mean rescale
      return beta_t * scale * scale;
    }
    case Kind::Empirical:
      return eigenvalues.empty()
                 ? 0.0
                 : *std::max_element(eigenvalues.begin(), eigenvalues.end());
  }
  throw std::logic_error("unknown spectral kind");
}

SpectralDist SpectralDist::point_mass(double mu0) {
  SpectralDist d;
  d.kind = Kind::PointMass;
  d.mu0 = mu0;
  return d;
}

SpectralDist SpectralDist::squared_uniform(double beta_t) {
  SpectralDist d;
  d.kind = Kind::ScaledSquaredUniform;
  d.beta_t = beta_t;
  return d;
}

SpectralDist SpectralDist::squared_beta(double beta_t, double shape_a, double shape_b) {
  SpectralDist d;
  d.kind = Kind::ScaledSquaredBeta;
  d.beta_t = beta_t;
  d.shape_a = shape_a;
  d.shape_b = shape_b;
  return d;
}

SpectralDist SpectralDist::empirical(std::vector<double> eigenvalues) {
  SpectralDist d;
  d.kind = Kind::Empirical;
  d.eigenvalues = std::move(eigenvalues);
  return d;
}

TransferConfig TransferConfig::none() { return {}; }

TransferConfig TransferConfig::hard(double delta) {
  TransferConfig t;
  t.mode = TransferMode::Hard;
  t.delta = delta;
  return t;
}

TransferConfig TransferConfig::soft(SpectralDist spectrum) {
  TransferConfig t;
  t.mode = TransferMode::Soft;
  t.spectrum = std::move(spectrum);
  return t;
}

std::vector<std::string> validate_errors(const TaskSpec& spec) {
  std::vector<std::string> errs;
  if (!(spec.alpha_s > 0.0)) errs.push_back("alpha_s must be positive");
  if (!(spec.alpha_t > 0.0)) errs.push_back("alpha_t must be positive");
  if (!(spec.rho >= -1.0 && spec.rho <= 1.0)) errs.push_back("rho out of range [-1, 1]");
  if (!(spec.lambda >= 0.0)) errs.push_back("lambda must be nonnegative");
  if (spec.upsilon != 0 && spec.upsilon != 1) errs.push_back("upsilon must be 0 or 1");

  if (spec.upsilon == 1) {
    if (spec.phi_hat != Activation::Sign)
      errs.push_back("classification requires a sign predictor");
    if (spec.phi != Activation::Sign)
      errs.push_back("classification supports a sign teacher only");
    if (spec.loss.form != LossForm::Classification)
      errs.push_back("classification requires a classification-form loss");
  } else if (spec.upsilon == 0) {
    if (spec.phi_hat != Activation::Identity)
      errs.push_back("regression requires an identity predictor");
    if (spec.loss.form != LossForm::Regression)
      errs.push_back("regression requires a regression-form loss");
  }
  if (spec.loss.kind != Loss::Squared && spec.loss.form != LossForm::Classification)
    errs.push_back(to_string(spec.loss.kind) + " loss is classification-form only");

  switch (spec.transfer.mode) {
    case TransferMode::None: break;
    case TransferMode::Hard:
      if (!(spec.transfer.delta >= 0.0 && spec.transfer.delta <= 1.0))
        errs.push_back("delta out of range [0, 1]");
      break;
    case TransferMode::Soft: {
      const SpectralDist& d = spec.transfer.spectrum;
      if (d.kind == SpectralDist::Kind::PointMass && d.mu0 < 0.0)
        errs.push_back("point-mass eigenvalue must be nonnegative");
      if ((d.kind == SpectralDist::Kind::ScaledSquaredUniform ||
           d.kind == SpectralDist::Kind::ScaledSquaredBeta) &&
          !(d.beta_t >= 0.0))
        errs.push_back("beta_t must be nonnegative");
      if (d.kind == SpectralDist::Kind::ScaledSquaredBeta &&
          !(d.shape_a >= 1.0 && d.shape_b >= 1.0))
        errs.push_back("beta shape parameters must be >= 1");
      if (d.kind == SpectralDist::Kind::Empirical) {
        if (d.eigenvalues.empty())
          errs.push_back("empirical spectrum needs at least one eigenvalue");
        for (double mu : d.eigenvalues)
          if (mu < 0.0) {
            errs.push_back("empirical eigenvalues must be nonnegative");
            break;
          }
      }
      break;
    }
  }
  return errs;
}

TaskSpec validate(const TaskSpec& spec) {
  const auto errs = validate_errors(spec);
  if (errs.empty()) return spec;
  std::ostringstream msg;
  msg << "invalid task spec:";
  for (const auto& e : errs) msg << " [" << e << "]";
  throw std::invalid_argument(msg.str());
}

nlohmann::json to_json(const SpectralDist& dist) {
  nlohmann::json j;
  switch (dist.kind) {
    case SpectralDist::Kind::PointMass:
      j["kind"] = "point_mass";
      j["mu0"] = dist.mu0;
      break;
    case SpectralDist::Kind::ScaledSquaredUniform:
      j["kind"] = "squared_uniform";
      j["beta_t"] = dist.beta_t;
      break;
    case SpectralDist::Kind::ScaledSquaredBeta:
      j["kind"] = "squared_beta";
      j["beta_t"] = dist.beta_t;
      j["shape_a"] = dist.shape_a;
      j["shape_b"] = dist.shape_b;
      break;
    case SpectralDist::Kind::Empirical:
      j["kind"] = "empirical";
      j["eigenvalues"] = dist.eigenvalues;
      break;
  }
  return j;
}

SpectralDist spectral_dist_from_json(const nlohmann::json& j) {
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "point_mass") return SpectralDist::point_mass(j.at("mu0").get<double>());
  if (kind == "squared_uniform")
    return SpectralDist::squared_uniform(j.at("beta_t").get<double>());
  if (kind == "squared_beta")
    return SpectralDist::squared_beta(j.at("beta_t").get<double>(),
                                      j.value("shape_a", 2.0), j.value("shape_b", 2.0));
  if (kind == "empirical")
    return SpectralDist::empirical(j.at("eigenvalues").get<std::vector<double>>());
  throw std::invalid_argument("unknown spectrum kind: " + kind);
}

nlohmann::json to_json(const TaskSpec& spec) {
  nlohmann::json j;
  j["alpha_s"] = spec.alpha_s;
  j["alpha_t"] = spec.alpha_t;
  j["rho"] = spec.rho;
  j["lambda"] = spec.lambda;
  j["loss"] = {{"kind", to_string(spec.loss.kind)}, {"form", to_string(spec.loss.form)}};
  j["phi"] = to_string(spec.phi);
  j["phi_hat"] = to_string(spec.phi_hat);
  j["upsilon"] = spec.upsilon;
  nlohmann::json t;
  switch (spec.transfer.mode) {
    case TransferMode::None: t["mode"] = "none"; break;
    case TransferMode::Hard:
      t["mode"] = "hard";
      t["delta"] = spec.transfer.delta;
      break;
    case TransferMode::Soft:
      t["mode"] = "soft";
      t["spectrum"] = to_json(spec.transfer.spectrum);
      break;
  }
  j["transfer"] = t;
  return j;
}

TaskSpec task_spec_from_json(const nlohmann::json& j) {
  TaskSpec spec;
  spec.alpha_s = j.at("alpha_s").get<double>();
  spec.alpha_t = j.at("alpha_t").get<double>();
  spec.rho = j.at("rho").get<double>();
  spec.lambda = j.at("lambda").get<double>();
  if (j.contains("loss")) {
    const auto& jl = j.at("loss");
    if (jl.is_string()) {
      spec.loss.kind = loss_from_string(jl.get<std::string>());
      spec.loss.form = spec.loss.kind == Loss::Squared ? LossForm::Regression
                                                       : LossForm::Classification;
    } else {
      spec.loss.kind = loss_from_string(jl.at("kind").get<std::string>());
      spec.loss.form = loss_form_from_string(jl.at("form").get<std::string>());
    }
  }
  spec.phi = activation_from_string(j.at("phi").get<std::string>());
  spec.phi_hat = activation_from_string(j.at("phi_hat").get<std::string>());
  spec.upsilon = j.at("upsilon").get<int>();
  if (j.contains("transfer")) {
    const auto& jt = j.at("transfer");
    const std::string mode = jt.at("mode").get<std::string>();
    if (mode == "none") {
      spec.transfer = TransferConfig::none();
    } else if (mode == "hard") {
      spec.transfer = TransferConfig::hard(jt.at("delta").get<double>());
    } else if (mode == "soft") {
      spec.transfer = TransferConfig::soft(spectral_dist_from_json(jt.at("spectrum")));
    } else {
      throw std::invalid_argument("unknown transfer mode: " + mode);
    }
  }
  return spec;
}

}  // namespace tlphase
