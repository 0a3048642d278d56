#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "jmdiag/simulate.hpp"

namespace jmdiag {

// Per-observation residual for the longitudinal part. pd is the survival-
// conditioned rank of the observation in its Monte-Carlo predictive
// distribution; pde the same after decorrelation. Excluded observations
// (no surviving replicates) carry NaN metrics and are reported, not dropped.
struct LongitudinalResidual {
  std::string id;
  double time = 0.0;
  double pd = 0.0;
  double npd = 0.0;
  double pde = 0.0;
  double npde = 0.0;
  int survivor_count = 0;
  bool clamped = false;
  bool low_support = false;
  bool excluded = false;
};

// Per-subject residual for the TTE part. Censored events carry a pd imputed
// uniformly above the model's censoring probability.
struct TteResidual {
  std::string id;
  EventRecord event;
  double pd = 0.0;
  double npd = 0.0;
  bool imputed = false;
  double imputation_lower_bound = 0.0;  // NaN when the event was observed
  bool clamped = false;
};

struct MomentSummary {
  Eigen::VectorXd mean;
  Eigen::MatrixXd covariance;
  Eigen::MatrixXd whitener;  // W such that W * covariance * W' = I
  bool ridged = false;
};

struct DecorrelationResult {
  Eigen::VectorXd observed_star;
  Eigen::MatrixXd simulated_star;  // K x n, rows decorrelated the same way
  MomentSummary moments;
};

struct ClampResult {
  double p = 0.0;
  double normal_score = 0.0;
  bool clamped = false;
};

// Clamp a probability into [1/(2K), 1 - 1/(2K)] and map through the standard
// normal quantile.
ClampResult clamp_and_normalise(double p, int k);

TteResidual compute_pd_tte(const std::string& id, const EventRecord& observed,
                           std::span<const double> replicate_event_times,
                           RngStream& imputation_stream);

// Survival-conditioned prediction discrepancies, one per observation:
//   pd_j = #{ sims(k,j) < y_j and T_k > t_j } / #{ T_k > t_j }.
// Entries with zero survivors are NaN; survivor_counts receives the
// denominator per observation.
std::vector<double> compute_pd_longitudinal(std::span<const double> observed,
                                            const Eigen::MatrixXd& simulated,
                                            std::span<const double> replicate_event_times,
                                            std::span<const double> observation_times,
                                            std::vector<int>* survivor_counts = nullptr);

// Decorrelates the observed vector and every simulated replicate with the
// inverse Cholesky factor of the replicate covariance (ridge-regularized once
// if needed; then an error naming the subject).
DecorrelationResult decorrelate(const Eigen::VectorXd& observed, const Eigen::MatrixXd& simulated,
                                const std::string& subject_id);

// Prediction distribution errors: the same survival-weighted rank estimator
// applied to decorrelated values.
inline std::vector<double> compute_pde(const Eigen::VectorXd& observed_star,
                                       const Eigen::MatrixXd& simulated_star,
                                       std::span<const double> replicate_event_times,
                                       std::span<const double> observation_times,
                                       std::vector<int>* survivor_counts = nullptr) {
  return compute_pd_longitudinal(
      std::span<const double>(observed_star.data(), static_cast<std::size_t>(observed_star.size())),
      simulated_star, replicate_event_times, observation_times, survivor_counts);
}

struct ResidualTable {
  std::vector<LongitudinalResidual> longitudinal;
  std::vector<TteResidual> tte;

  std::vector<double> npde_longitudinal() const;  // excludes excluded rows
  std::vector<double> npd_longitudinal() const;
  std::vector<double> npd_tte() const;
  std::vector<double> pd_tte() const;
};

// Scale on which observations and replicates are decorrelated. pd are rank
// based and scale invariant; pde/npde are not, because the whitening is
// linear. The marker's random effects act multiplicatively, so the signed
// log1p scale is the variance-stabilizing default: on the raw scale the
// whitened coordinates stay dependent and the variance test over-rejects.
enum class DecorrelationScale { kSignedLog1p, kRaw };

// Full residual pipeline for a dataset against its replicate set. The
// imputation seed feeds one dedicated stream per subject.
ResidualTable compute_residuals(const std::vector<SubjectData>& observed,
                                const ReplicateSet& replicates, std::uint64_t imputation_seed,
                                int n_threads = 1,
                                DecorrelationScale scale = DecorrelationScale::kSignedLog1p);

void write_residuals_csv(const ResidualTable& table, const std::string& path);
ResidualTable read_residuals_csv(const std::string& path);

}  // namespace jmdiag
