#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "jmdiag/diagnostics.hpp"
#include "jmdiag/residuals.hpp"
#include "jmdiag/simulate.hpp"
#include "jmdiag/stat_tests.hpp"

namespace jmdiag {

struct EvaluationOptions {
  int k = 2000;
  std::uint64_t seed = 1;
  int n_threads = 1;
  int n_bins = 9;
  DecorrelationScale decorrelation_scale = DecorrelationScale::kSignedLog1p;
};

// One full model evaluation: residuals, combined tests, plot data.
struct EvaluationResult {
  int n_subjects = 0;
  int k = 0;
  ResidualTable residuals;
  CombinedDecision global_test;
  CombinedDecision ks_test;
  std::vector<WormPoint> wormplot;
  std::vector<PercentileBand> bands;
  KmVpc km_vpc_data;
};

EvaluationResult evaluate_dataset(const std::vector<SubjectData>& observed,
                                  const JointModelSpec& tested, const EvaluationOptions& options);

// EvaluationReport JSON: component p-values, combined decisions, residual
// summary and diagnostic data.
std::string report_to_json(const EvaluationResult& result);

}  // namespace jmdiag
