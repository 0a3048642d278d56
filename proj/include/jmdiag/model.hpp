#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "jmdiag/quadrature.hpp"

namespace jmdiag {

enum class Transform { kNormal, kLogNormal, kLogitNormal };

// One population parameter: typical value, distribution shape, and the
// standard deviation of its random effect on the transformed scale.
struct ParameterSpec {
  std::string name;
  double fixed_effect = 0.0;
  Transform transform = Transform::kLogNormal;
  double omega = 0.0;
};

// Turnover constants of the PSA model: prostatic cell elimination rate and
// PSA elimination rate, in day^-1.
struct PsaConstants {
  double k_out = 0.046;
  double delta = 0.23;
};

enum class AssociationKind {
  kCurrentPsa,
  kTimeToEscape,
  kBaselinePsa,
  kSlopeLogPsa,
  kLogPsa,
  kAucLogPsa,
};

// Scale on which the slope association is computed. The default follows the
// "slope of the logarithm" reading, d log(PSA+1)/dt; the raw alternative is
// dPSA/dt.
enum class SlopeScale { kLogPsaPlusOne, kRawPsa };

struct AssociationFunction {
  AssociationKind kind = AssociationKind::kCurrentPsa;
  SlopeScale slope_scale = SlopeScale::kLogPsaPlusOne;
};

enum class ErrorModelKind { kConstant, kProportional, kCombined };

struct ErrorModel {
  ErrorModelKind kind = ErrorModelKind::kProportional;
  double additive = 0.0;
  double proportional = 0.2;

  double sd(double prediction) const;
};

// Full parametric description of the joint model.
struct JointModelSpec {
  std::vector<ParameterSpec> psa_parameters;  // r, PSA0, epsilon, T_esc
  PsaConstants constants;
  ErrorModel error_model;
  std::vector<ParameterSpec> tte_parameters;  // k, lambda, beta
  AssociationFunction association;
  double covariate_coefficient = 0.0;  // accepted in the schema, must be 0
  double study_end = 365.0;

  const ParameterSpec& psa_parameter(const std::string& name) const;
  const ParameterSpec& tte_parameter(const std::string& name) const;

  double weibull_shape() const { return tte_parameter("k").fixed_effect; }
  double weibull_scale() const { return tte_parameter("lambda").fixed_effect; }
  double association_beta() const { return tte_parameter("beta").fixed_effect; }

  // Throws std::invalid_argument naming the offending field.
  void validate() const;

  // Table-1 base model: PSA bi-exponential + Weibull hazard on current PSA.
  static JointModelSpec base_model();
};

// Individual parameters on the natural scale.
struct IndividualParameters {
  double growth_rate = 0.0;    // r, day^-1
  double baseline_psa = 0.0;   // PSA0, ng/mL
  double efficacy = 0.0;       // epsilon, in (0,1)
  double escape_time = 0.0;    // T_esc, days
};

double transform_parameter(double fixed_effect, double eta, Transform transform);

// Typical individual: all random effects zero.
IndividualParameters typical_individual(const JointModelSpec& spec);

// Bi-exponential PSA trajectory for one individual: decline under treatment
// until T_esc, then escape regrowth. Evaluation is numerically stable for
// near-degenerate rate combinations (handled through expm1, flagged).
class PsaCurve {
 public:
  PsaCurve(const IndividualParameters& psi, const PsaConstants& constants);

  double value(double t) const;
  double derivative(double t) const;  // dPSA/dt
  double log_slope(double t) const;   // d log(PSA+1)/dt
  bool near_degenerate() const { return near_degenerate_; }
  double escape_time() const { return t_esc_; }

 private:
  double pre_escape_rate_;   // r(1-eps) - k_out
  double post_escape_rate_;  // r - k_out
  double delta_;
  double psa0_;
  double t_esc_;
  double psa_at_escape_;
  double production_at_escape_;  // delta * PSA0 * exp(pre_escape_rate * T_esc)
  bool near_degenerate_;
};

double psa_value(double t, const IndividualParameters& psi, const PsaConstants& constants);
double psa_slope(double t, const IndividualParameters& psi, const PsaConstants& constants);
double psa_log_slope(double t, const IndividualParameters& psi, const PsaConstants& constants);

// X(t, psi) for a given association function. The cumulative-log kind is
// evaluated by adaptive quadrature.
double association_value(double t, const IndividualParameters& psi, const PsaConstants& constants,
                         const AssociationFunction& association);

// Per-individual hazard evaluator. Caches prefix integrals so that repeated
// cumulative-hazard evaluations (event-time sampling, AUC association) stay
// cheap. Not thread-safe; create one per task.
class HazardContext {
 public:
  HazardContext(const IndividualParameters& psi, const JointModelSpec& spec);

  double association(double t);
  double hazard(double t);
  double cumulative_hazard(double t);
  double survival(double t);

  const PsaCurve& curve() const { return curve_; }

 private:
  double auc_log_psa(double t);
  double integrand_u(double u);  // lambda^-k exp(beta X(u^{1/k}))
  double prefix_integral(std::vector<std::pair<double, double>>& cache, double x,
                         bool substituted);

  PsaCurve curve_;
  IndividualParameters psi_;
  AssociationFunction association_;
  double shape_k_;
  double scale_lambda_;
  double beta_;
  double scale_pow_;  // lambda^-k
  std::vector<std::pair<double, double>> hazard_prefix_;  // (u = t^k, integral)
  std::vector<std::pair<double, double>> auc_prefix_;     // (t, integral)
};

double hazard(double t, const IndividualParameters& psi, const JointModelSpec& spec);
double cumulative_hazard(double t, const IndividualParameters& psi, const JointModelSpec& spec);
double survival(double t, const IndividualParameters& psi, const JointModelSpec& spec);

// String names used in JSON documents and CSV output.
std::string to_string(Transform t);
std::string to_string(AssociationKind k);
std::string to_string(ErrorModelKind k);
Transform transform_from_string(const std::string& s);
AssociationKind association_kind_from_string(const std::string& s);
ErrorModelKind error_model_kind_from_string(const std::string& s);

// JSON (de)serialization; see schemas/joint_model_spec.schema.json.
std::string to_json_string(const JointModelSpec& spec);
JointModelSpec spec_from_json_string(const std::string& text);
JointModelSpec load_spec(const std::string& path);
void save_spec(const JointModelSpec& spec, const std::string& path);

}  // namespace jmdiag
