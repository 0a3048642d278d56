#include "jmdiag/model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace jmdiag {

namespace {

// (e^x - 1) / x, stable near zero.
double phi1(double x) {
  if (std::fabs(x) < 1e-6) return 1.0 + 0.5 * x + x * x / 6.0;
  return std::expm1(x) / x;
}

double logit(double p) { return std::log(p / (1.0 - p)); }
double inv_logit(double x) { return 1.0 / (1.0 + std::exp(-x)); }

constexpr double kDegenerateTol = 1e-10;
constexpr double kMaxExponent = 700.0;

}  // namespace

double ErrorModel::sd(double prediction) const {
  switch (kind) {
    case ErrorModelKind::kConstant:
      return additive;
    case ErrorModelKind::kProportional:
      return proportional * std::fabs(prediction);
    case ErrorModelKind::kCombined:
      return additive + proportional * std::fabs(prediction);
  }
  return 0.0;
}

double transform_parameter(double fixed_effect, double eta, Transform transform) {
  switch (transform) {
    case Transform::kNormal:
      return fixed_effect + eta;
    case Transform::kLogNormal:
      if (fixed_effect <= 0.0)
        throw std::invalid_argument("transform_parameter: log-normal fixed effect must be > 0");
      return fixed_effect * std::exp(eta);
    case Transform::kLogitNormal:
      if (fixed_effect <= 0.0 || fixed_effect >= 1.0)
        throw std::invalid_argument(
            "transform_parameter: logit-normal fixed effect must lie in (0,1)");
      return inv_logit(logit(fixed_effect) + eta);
  }
  throw std::invalid_argument("transform_parameter: unknown transform");
}

const ParameterSpec& JointModelSpec::psa_parameter(const std::string& name) const {
  for (const auto& p : psa_parameters)
    if (p.name == name) return p;
  throw std::invalid_argument("psa_parameters: missing parameter '" + name + "'");
}

const ParameterSpec& JointModelSpec::tte_parameter(const std::string& name) const {
  for (const auto& p : tte_parameters)
    if (p.name == name) return p;
  throw std::invalid_argument("tte_parameters: missing parameter '" + name + "'");
}

void JointModelSpec::validate() const {
  auto check_parameter = [](const ParameterSpec& p, const char* group) {
    const std::string where = std::string(group) + "." + p.name;
    if (!(p.omega >= 0.0)) throw std::invalid_argument(where + ".omega: must be >= 0");
    if (!std::isfinite(p.fixed_effect))
      throw std::invalid_argument(where + ".fixed_effect: must be finite");
    if (p.transform == Transform::kLogNormal && p.fixed_effect <= 0.0)
      throw std::invalid_argument(where + ".fixed_effect: log-normal requires a positive value");
    if (p.transform == Transform::kLogitNormal &&
        (p.fixed_effect <= 0.0 || p.fixed_effect >= 1.0))
      throw std::invalid_argument(where + ".fixed_effect: logit-normal requires a value in (0,1)");
  };

  const char* psa_names[] = {"r", "PSA0", "epsilon", "T_esc"};
  if (psa_parameters.size() != 4)
    throw std::invalid_argument("psa_parameters: expected exactly r, PSA0, epsilon, T_esc");
  for (const char* name : psa_names) check_parameter(psa_parameter(name), "psa_parameters");

  const char* tte_names[] = {"k", "lambda", "beta"};
  if (tte_parameters.size() != 3)
    throw std::invalid_argument("tte_parameters: expected exactly k, lambda, beta");
  for (const char* name : tte_names) {
    const ParameterSpec& p = tte_parameter(name);
    check_parameter(p, "tte_parameters");
    if (p.omega != 0.0)
      throw std::invalid_argument("tte_parameters." + p.name +
                                  ".omega: no inter-individual variability on the TTE submodel");
  }
  if (weibull_shape() <= 0.0) throw std::invalid_argument("tte_parameters.k: must be > 0");
  if (weibull_scale() <= 0.0) throw std::invalid_argument("tte_parameters.lambda: must be > 0");

  if (!(constants.k_out > 0.0)) throw std::invalid_argument("constants.k_out: must be > 0");
  if (!(constants.delta > 0.0)) throw std::invalid_argument("constants.delta: must be > 0");

  if (error_model.additive < 0.0 || error_model.proportional < 0.0)
    throw std::invalid_argument("error_model: coefficients must be >= 0");
  const bool has_additive = error_model.additive > 0.0;
  const bool has_proportional = error_model.proportional > 0.0;
  bool live = false;
  switch (error_model.kind) {
    case ErrorModelKind::kConstant:
      live = has_additive;
      break;
    case ErrorModelKind::kProportional:
      live = has_proportional;
      break;
    case ErrorModelKind::kCombined:
      live = has_additive || has_proportional;
      break;
  }
  if (!live) throw std::invalid_argument("error_model: active coefficients are all zero");

  if (covariate_coefficient != 0.0)
    throw std::invalid_argument(
        "covariate_coefficient: covariate effects are not supported, set to 0");
  if (!(study_end > 0.0)) throw std::invalid_argument("study_end: must be > 0");
}

JointModelSpec JointModelSpec::base_model() {
  JointModelSpec spec;
  spec.psa_parameters = {
      {"r", 0.05, Transform::kLogNormal, 0.1},
      {"PSA0", 80.0, Transform::kLogNormal, 0.6},
      {"epsilon", 0.3, Transform::kLogitNormal, 1.5},
      {"T_esc", 140.0, Transform::kLogNormal, 0.6},
  };
  spec.constants = PsaConstants{};
  spec.error_model = ErrorModel{ErrorModelKind::kProportional, 0.0, 0.2};
  spec.tte_parameters = {
      {"k", 1.5, Transform::kLogNormal, 0.0},
      {"lambda", 580.0, Transform::kLogNormal, 0.0},
      {"beta", 0.001, Transform::kLogNormal, 0.0},
  };
  spec.association = AssociationFunction{AssociationKind::kCurrentPsa, SlopeScale::kLogPsaPlusOne};
  spec.study_end = 365.0;
  return spec;
}

IndividualParameters typical_individual(const JointModelSpec& spec) {
  IndividualParameters psi;
  psi.growth_rate = spec.psa_parameter("r").fixed_effect;
  psi.baseline_psa = spec.psa_parameter("PSA0").fixed_effect;
  psi.efficacy = spec.psa_parameter("epsilon").fixed_effect;
  psi.escape_time = spec.psa_parameter("T_esc").fixed_effect;
  return psi;
}

PsaCurve::PsaCurve(const IndividualParameters& psi, const PsaConstants& constants)
    : pre_escape_rate_(psi.growth_rate * (1.0 - psi.efficacy) - constants.k_out),
      post_escape_rate_(psi.growth_rate - constants.k_out),
      delta_(constants.delta),
      psa0_(psi.baseline_psa),
      t_esc_(psi.escape_time) {
  const double d1 = pre_escape_rate_ + delta_;
  const double d2 = post_escape_rate_ + delta_;
  near_degenerate_ = std::fabs(d1) < kDegenerateTol || std::fabs(d2) < kDegenerateTol;
  production_at_escape_ = delta_ * psa0_ * std::exp(pre_escape_rate_ * t_esc_);
  // Evaluate the pre-escape branch at T_esc before the member is needed below.
  const double x = d1 * t_esc_;
  psa_at_escape_ =
      psa0_ * std::exp(-delta_ * t_esc_) + delta_ * psa0_ * t_esc_ * std::exp(-delta_ * t_esc_) * phi1(x);
}

double PsaCurve::value(double t) const {
  if (t < 0.0) throw std::invalid_argument("PsaCurve::value: t must be >= 0");
  if (t <= t_esc_) {
    const double d1 = pre_escape_rate_ + delta_;
    return psa0_ * std::exp(-delta_ * t) + delta_ * psa0_ * t * std::exp(-delta_ * t) * phi1(d1 * t);
  }
  const double tau = t - t_esc_;
  const double d2 = post_escape_rate_ + delta_;
  return psa_at_escape_ * std::exp(-delta_ * tau) +
         production_at_escape_ * tau * std::exp(-delta_ * tau) * phi1(d2 * tau);
}

double PsaCurve::derivative(double t) const {
  // Production-minus-elimination identity of the underlying turnover system.
  const double production = (t <= t_esc_)
                                ? delta_ * psa0_ * std::exp(pre_escape_rate_ * t)
                                : production_at_escape_ * std::exp(post_escape_rate_ * (t - t_esc_));
  const double v = value(t);
  if (!std::isfinite(v)) return production;  // exponential growth dominates
  return production - delta_ * v;
}

double PsaCurve::log_slope(double t) const {
  const double v = value(t);
  const double dv = derivative(t);
  if (!std::isfinite(v) || !std::isfinite(dv))
    return t > t_esc_ ? post_escape_rate_ : pre_escape_rate_;
  return dv / (1.0 + v);
}

double psa_value(double t, const IndividualParameters& psi, const PsaConstants& constants) {
  return PsaCurve(psi, constants).value(t);
}

double psa_slope(double t, const IndividualParameters& psi, const PsaConstants& constants) {
  return PsaCurve(psi, constants).derivative(t);
}

double psa_log_slope(double t, const IndividualParameters& psi, const PsaConstants& constants) {
  return PsaCurve(psi, constants).log_slope(t);
}

namespace {

bool association_is_time_dependent(AssociationKind kind) {
  return kind == AssociationKind::kCurrentPsa || kind == AssociationKind::kSlopeLogPsa ||
         kind == AssociationKind::kLogPsa || kind == AssociationKind::kAucLogPsa;
}

}  // namespace

double association_value(double t, const IndividualParameters& psi, const PsaConstants& constants,
                         const AssociationFunction& association) {
  if (t < 0.0) throw std::invalid_argument("association_value: t must be >= 0");
  const PsaCurve curve(psi, constants);
  switch (association.kind) {
    case AssociationKind::kCurrentPsa:
      return curve.value(t);
    case AssociationKind::kTimeToEscape:
      return psi.escape_time;
    case AssociationKind::kBaselinePsa:
      return psi.baseline_psa;
    case AssociationKind::kSlopeLogPsa:
      return association.slope_scale == SlopeScale::kLogPsaPlusOne ? curve.log_slope(t)
                                                                   : curve.derivative(t);
    case AssociationKind::kLogPsa:
      return std::log1p(curve.value(t));
    case AssociationKind::kAucLogPsa: {
      auto integrand = [&](double x) { return std::log1p(curve.value(x)); };
      if (t <= curve.escape_time()) return integrate_or_throw(integrand, 0.0, t);
      return integrate_or_throw(integrand, 0.0, curve.escape_time()) +
             integrate_or_throw(integrand, curve.escape_time(), t);
    }
  }
  throw std::invalid_argument("association_value: unknown association kind");
}

HazardContext::HazardContext(const IndividualParameters& psi, const JointModelSpec& spec)
    : curve_(psi, spec.constants),
      psi_(psi),
      association_(spec.association),
      shape_k_(spec.weibull_shape()),
      scale_lambda_(spec.weibull_scale()),
      beta_(spec.association_beta()),
      scale_pow_(std::pow(scale_lambda_, -shape_k_)) {
  hazard_prefix_.reserve(48);
  if (association_.kind == AssociationKind::kAucLogPsa) auc_prefix_.reserve(256);
}

double HazardContext::association(double t) {
  switch (association_.kind) {
    case AssociationKind::kCurrentPsa:
      return curve_.value(t);
    case AssociationKind::kTimeToEscape:
      return psi_.escape_time;
    case AssociationKind::kBaselinePsa:
      return psi_.baseline_psa;
    case AssociationKind::kSlopeLogPsa:
      return association_.slope_scale == SlopeScale::kLogPsaPlusOne ? curve_.log_slope(t)
                                                                    : curve_.derivative(t);
    case AssociationKind::kLogPsa:
      return std::log1p(curve_.value(t));
    case AssociationKind::kAucLogPsa:
      return auc_log_psa(t);
  }
  throw std::invalid_argument("HazardContext: unknown association kind");
}

double HazardContext::auc_log_psa(double t) {
  if (t <= 0.0) return 0.0;
  // Integrate each segment within one smooth piece of the curve.
  if (t > curve_.escape_time()) (void)auc_log_psa(curve_.escape_time());
  return prefix_integral(auc_prefix_, t, false);
}

double HazardContext::integrand_u(double u) {
  if (beta_ == 0.0) return scale_pow_;
  const double t = std::pow(u, 1.0 / shape_k_);
  const double exponent = std::min(kMaxExponent, beta_ * association(t));
  return scale_pow_ * std::exp(exponent);
}

double HazardContext::prefix_integral(std::vector<std::pair<double, double>>& cache, double x,
                                      bool substituted) {
  double base_x = 0.0;
  double base_value = 0.0;
  auto it = std::upper_bound(cache.begin(), cache.end(), x,
                             [](double v, const auto& entry) { return v < entry.first; });
  if (it != cache.begin()) {
    const auto& entry = *(it - 1);
    if (entry.first == x) return entry.second;
    base_x = entry.first;
    base_value = entry.second;
  }
  double segment;
  if (substituted) {
    segment = integrate_or_throw([this](double u) { return integrand_u(u); }, base_x, x, 5e-9,
                                 1e-12);
  } else {
    segment = integrate_or_throw([this](double s) { return std::log1p(curve_.value(s)); }, base_x,
                                 x, 5e-9, 1e-12);
  }
  const double total = base_value + segment;
  cache.insert(it, {x, total});
  return total;
}

double HazardContext::hazard(double t) {
  if (t < 0.0) throw std::invalid_argument("hazard: t must be >= 0");
  if (t == 0.0 && shape_k_ < 1.0)
    throw std::invalid_argument("hazard: infinite at t=0 for shape k < 1");
  const double baseline =
      (shape_k_ / scale_lambda_) * std::pow(t / scale_lambda_, shape_k_ - 1.0);
  const double exponent =
      beta_ == 0.0 ? 0.0 : std::min(kMaxExponent, beta_ * association(t));
  return baseline * std::exp(exponent);
}

double HazardContext::cumulative_hazard(double t) {
  if (t < 0.0) throw std::invalid_argument("cumulative_hazard: t must be >= 0");
  if (t == 0.0) return 0.0;
  // Substitution u = x^k removes the integrable singularity at the origin for
  // k < 1 and makes the constant-association case exact.
  if (association_is_time_dependent(association_.kind) && t > curve_.escape_time() &&
      curve_.escape_time() > 0.0) {
    (void)cumulative_hazard(curve_.escape_time());
  }
  const double u = std::pow(t, shape_k_);
  return prefix_integral(hazard_prefix_, u, true);
}

double HazardContext::survival(double t) { return std::exp(-cumulative_hazard(t)); }

double hazard(double t, const IndividualParameters& psi, const JointModelSpec& spec) {
  HazardContext ctx(psi, spec);
  return ctx.hazard(t);
}

double cumulative_hazard(double t, const IndividualParameters& psi, const JointModelSpec& spec) {
  HazardContext ctx(psi, spec);
  return ctx.cumulative_hazard(t);
}

double survival(double t, const IndividualParameters& psi, const JointModelSpec& spec) {
  HazardContext ctx(psi, spec);
  return ctx.survival(t);
}

}  // namespace jmdiag
