#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "jmdiag/math.hpp"
#include "jmdiag/model.hpp"

namespace jmdiag {

// One cell of the simulation study: data generated under `truth`, predictive
// distribution simulated under `tested`.
struct Scenario {
  std::string truth_label;
  std::string tested_label;
  JointModelSpec truth;
  JointModelSpec tested;
  int n_subjects = 100;
  int n_studies = 200;
  int k = 2000;
  std::uint64_t master_seed = 20240101;
};

struct RejectionRate {
  int rejections = 0;
  int studies = 0;
  double rate = 0.0;
  Interval ci;  // exact binomial 95% CI for the rejection probability
};

struct ScenarioResult {
  std::string truth_label;
  std::string tested_label;
  int n_subjects = 0;
  int n_studies = 0;
  int k = 0;
  RejectionRate global;
  RejectionRate ks;
  bool is_type1 = false;         // truth == tested cell
  Interval type1_interval;       // binomial prediction interval at p = 0.05
  bool pass_type1 = true;        // rate within the interval, when is_type1
};

// Runs n_studies independent simulated studies and aggregates both combined
// tests. Studies run in parallel; results do not depend on thread count.
ScenarioResult run_scenario(const Scenario& scenario, int n_threads = 1);

// Built-in scenario grids of the simulation study. family is one of
// shape_k, epsilon, omega_epsilon, association; every cell is crossed with
// N in {50,100,200} unless restrict_n is given.
std::vector<Scenario> scenario_grid(const std::string& family, int n_studies, int k,
                                    std::uint64_t master_seed,
                                    std::optional<int> restrict_n = std::nullopt);

// Binomial prediction interval for the rejection rate of a calibrated test:
// [q(0.025), q(0.975)] / n at p = 0.05.
Interval type1_error_interval(int n_studies, double alpha = 0.05);

void write_scenario_results_csv(const std::vector<ScenarioResult>& results,
                                const std::string& path);
std::string scenario_results_to_csv(const std::vector<ScenarioResult>& results);

// Scenario config JSON; model specs may be inline objects or file paths
// resolved against the config's directory.
Scenario scenario_from_json_file(const std::string& path);

}  // namespace jmdiag
