#include "jmdiag/study.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "jmdiag/parallel.hpp"
#include "jmdiag/residuals.hpp"
#include "jmdiag/rng.hpp"
#include "jmdiag/simulate.hpp"
#include "jmdiag/stat_tests.hpp"

namespace jmdiag {

Interval type1_error_interval(int n_studies, double alpha) {
  Interval interval;
  interval.lower = binomial_quantile(0.025, n_studies, alpha) / static_cast<double>(n_studies);
  interval.upper = binomial_quantile(0.975, n_studies, alpha) / static_cast<double>(n_studies);
  return interval;
}

ScenarioResult run_scenario(const Scenario& scenario, int n_threads) {
  if (scenario.n_studies < 1) throw std::invalid_argument("scenario: n_studies must be >= 1");
  scenario.truth.validate();
  scenario.tested.validate();

  const StudyDesign design = StudyDesign::balanced(scenario.n_subjects, 9, scenario.truth.study_end);

  std::vector<char> reject_global(scenario.n_studies, 0);
  std::vector<char> reject_ks(scenario.n_studies, 0);

  parallel_for(static_cast<std::size_t>(scenario.n_studies), n_threads, [&](std::size_t study) {
    const std::uint64_t data_seed =
        derive_seed(scenario.master_seed, study, StreamPurpose::kStudyData);
    const std::uint64_t replicate_seed =
        derive_seed(scenario.master_seed, study, StreamPurpose::kStudyReplicates);
    const std::uint64_t imputation_seed =
        derive_seed(scenario.master_seed, study, StreamPurpose::kStudyImputation);
    try {
      const std::vector<SubjectData> data = simulate_dataset(scenario.truth, design, data_seed);
      const ReplicateSet replicates =
          simulate_replicates(data, scenario.tested, scenario.k, replicate_seed, 1);
      const ResidualTable residuals = compute_residuals(data, replicates, imputation_seed, 1);
      const std::vector<double> npde_long = residuals.npde_longitudinal();
      const std::vector<double> npd_tte = residuals.npd_tte();
      reject_global[study] = combined_global_test(npde_long, npd_tte).reject ? 1 : 0;
      reject_ks[study] = combined_ks_test(npde_long, npd_tte).reject ? 1 : 0;
    } catch (const std::exception& e) {
      throw numerical_error("study " + std::to_string(study) + " (data seed " +
                            std::to_string(data_seed) + ") failed: " + e.what());
    }
  });

  ScenarioResult result;
  result.truth_label = scenario.truth_label;
  result.tested_label = scenario.tested_label;
  result.n_subjects = scenario.n_subjects;
  result.n_studies = scenario.n_studies;
  result.k = scenario.k;

  auto summarize = [&](const std::vector<char>& rejections) {
    RejectionRate rate;
    rate.studies = scenario.n_studies;
    for (const char r : rejections) rate.rejections += r;
    rate.rate = static_cast<double>(rate.rejections) / rate.studies;
    rate.ci = clopper_pearson(rate.rejections, rate.studies);
    return rate;
  };
  result.global = summarize(reject_global);
  result.ks = summarize(reject_ks);

  result.is_type1 = scenario.truth_label == scenario.tested_label;
  result.type1_interval = type1_error_interval(scenario.n_studies);
  if (result.is_type1) {
    const bool global_ok = result.global.rate >= result.type1_interval.lower &&
                           result.global.rate <= result.type1_interval.upper;
    const bool ks_ok = result.ks.rate >= result.type1_interval.lower &&
                       result.ks.rate <= result.type1_interval.upper;
    result.pass_type1 = global_ok && ks_ok;
  }
  return result;
}

namespace {

JointModelSpec with_shape(JointModelSpec spec, double k) {
  for (auto& p : spec.tte_parameters)
    if (p.name == "k") p.fixed_effect = k;
  return spec;
}

JointModelSpec with_epsilon(JointModelSpec spec, double epsilon) {
  for (auto& p : spec.psa_parameters)
    if (p.name == "epsilon") p.fixed_effect = epsilon;
  return spec;
}

JointModelSpec with_omega_epsilon(JointModelSpec spec, double omega) {
  for (auto& p : spec.psa_parameters)
    if (p.name == "epsilon") p.omega = omega;
  return spec;
}

JointModelSpec with_association(JointModelSpec spec, AssociationKind kind) {
  spec.association.kind = kind;
  return spec;
}

std::string format_value(double v) {
  char buffer[32];
  std::snprintf(buffer, sizeof(buffer), "%g", v);
  return buffer;
}

}  // namespace

std::vector<Scenario> scenario_grid(const std::string& family, int n_studies, int k,
                                    std::uint64_t master_seed, std::optional<int> restrict_n) {
  const JointModelSpec base = JointModelSpec::base_model();
  std::vector<int> sample_sizes = {50, 100, 200};
  if (restrict_n) sample_sizes = {*restrict_n};

  struct Labeled {
    std::string label;
    JointModelSpec spec;
  };
  std::vector<Labeled> truths;
  std::vector<Labeled> tested;

  if (family == "shape_k") {
    for (const double truth_k : {1.0, 1.5})
      truths.push_back({"k=" + format_value(truth_k), with_shape(base, truth_k)});
    for (const double tested_k : {0.8, 1.0, 1.2, 1.5, 2.0})
      tested.push_back({"k=" + format_value(tested_k), with_shape(base, tested_k)});
  } else if (family == "epsilon") {
    truths.push_back({"eps=0.3", base});
    for (const double e : {0.15, 0.3, 0.45, 0.8})
      tested.push_back({"eps=" + format_value(e), with_epsilon(base, e)});
  } else if (family == "omega_epsilon") {
    truths.push_back({"omega_eps=1.5", base});
    for (const double w : {0.6, 1.0, 1.5})
      tested.push_back({"omega_eps=" + format_value(w), with_omega_epsilon(base, w)});
  } else if (family == "association") {
    const std::pair<std::string, AssociationKind> kinds[] = {
        {"M_PSA", AssociationKind::kCurrentPsa},
        {"M_T_esc", AssociationKind::kTimeToEscape},
        {"M_PSA0", AssociationKind::kBaselinePsa},
        {"M_dlnPSA", AssociationKind::kSlopeLogPsa},
        {"M_lnPSA", AssociationKind::kLogPsa},
        {"M_AUClnPSA", AssociationKind::kAucLogPsa},
    };
    truths.push_back({"M_PSA", with_association(base, AssociationKind::kCurrentPsa)});
    truths.push_back({"M_dlnPSA", with_association(base, AssociationKind::kSlopeLogPsa)});
    for (const auto& [label, kind] : kinds) tested.push_back({label, with_association(base, kind)});
  } else {
    throw std::invalid_argument("scenario_grid: unknown family '" + family +
                                "' (expected shape_k, epsilon, omega_epsilon, association)");
  }

  std::vector<Scenario> grid;
  for (const auto& truth : truths)
    for (const auto& test : tested)
      for (const int n : sample_sizes) {
        Scenario scenario;
        scenario.truth_label = truth.label;
        scenario.tested_label = test.label;
        scenario.truth = truth.spec;
        scenario.tested = test.spec;
        scenario.n_subjects = n;
        scenario.n_studies = n_studies;
        scenario.k = k;
        scenario.master_seed = master_seed;
        grid.push_back(scenario);
      }
  return grid;
}

std::string scenario_results_to_csv(const std::vector<ScenarioResult>& results) {
  std::ostringstream out;
  out << "truth,tested,N,test,rejections,studies,rate,ci_low,ci_high\n";
  char buffer[128];
  for (const auto& r : results) {
    const std::pair<const char*, const RejectionRate*> rows[] = {{"global", &r.global},
                                                                 {"ks", &r.ks}};
    for (const auto& [name, rate] : rows) {
      std::snprintf(buffer, sizeof(buffer), "%.6g,%.6g,%.6g", rate->rate, rate->ci.lower,
                    rate->ci.upper);
      out << r.truth_label << ',' << r.tested_label << ',' << r.n_subjects << ',' << name << ','
          << rate->rejections << ',' << rate->studies << ',' << buffer << '\n';
    }
  }
  return out.str();
}

void write_scenario_results_csv(const std::vector<ScenarioResult>& results,
                                const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::invalid_argument("cannot write '" + path + "'");
  out << scenario_results_to_csv(results);
}

Scenario scenario_from_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open scenario config '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument("scenario config: invalid JSON: " + std::string(e.what()));
  }

  const std::filesystem::path base_dir = std::filesystem::path(path).parent_path();
  auto resolve_spec = [&](const nlohmann::json& node, const char* field) -> JointModelSpec {
    if (node.is_string()) {
      std::filesystem::path spec_path = node.get<std::string>();
      if (spec_path.is_relative()) spec_path = base_dir / spec_path;
      return load_spec(spec_path.string());
    }
    if (node.is_object()) return spec_from_json_string(node.dump());
    throw std::invalid_argument(std::string("scenario config: ") + field +
                                " must be a path or an inline spec object");
  };

  Scenario scenario;
  try {
    scenario.truth = resolve_spec(j.at("truth"), "truth");
    scenario.tested = resolve_spec(j.at("tested"), "tested");
    scenario.n_subjects = j.at("n_subjects").get<int>();
    scenario.n_studies = j.value("n_studies", 200);
    scenario.k = j.value("k", 2000);
    scenario.master_seed = j.value("master_seed", static_cast<std::uint64_t>(20240101));
    scenario.truth_label = j.value("truth_label", std::string("truth"));
    scenario.tested_label = j.value("tested_label", std::string("tested"));
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument("scenario config: " + std::string(e.what()));
  }
  if (scenario.n_subjects < 1)
    throw std::invalid_argument("scenario config: n_subjects must be >= 1");
  return scenario;
}

}  // namespace jmdiag
