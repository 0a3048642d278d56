#include "jmdiag/evaluate.hpp"

#include <cmath>

#include <json.hpp>

#include "jmdiag/rng.hpp"

namespace jmdiag {

EvaluationResult evaluate_dataset(const std::vector<SubjectData>& observed,
                                  const JointModelSpec& tested, const EvaluationOptions& options) {
  if (observed.empty()) throw std::invalid_argument("evaluate_dataset: empty dataset");
  if (options.k < 1) throw std::invalid_argument("evaluate_dataset: k must be >= 1");
  tested.validate();

  const std::uint64_t replicate_seed = derive_seed(options.seed, 0, StreamPurpose::kStudy);
  const std::uint64_t imputation_seed = derive_seed(options.seed, 1, StreamPurpose::kStudy);

  EvaluationResult result;
  result.n_subjects = static_cast<int>(observed.size());
  result.k = options.k;

  const ReplicateSet replicates =
      simulate_replicates(observed, tested, options.k, replicate_seed, options.n_threads);
  result.residuals = compute_residuals(observed, replicates, imputation_seed,
                                       options.n_threads, options.decorrelation_scale);

  const std::vector<double> npde_long = result.residuals.npde_longitudinal();
  const std::vector<double> npd_tte = result.residuals.npd_tte();
  result.global_test = combined_global_test(npde_long, npd_tte);
  result.ks_test = combined_ks_test(npde_long, npd_tte);

  result.wormplot = detrended_pd_wormplot(result.residuals.tte);
  result.bands = npd_percentile_bands(result.residuals.longitudinal, options.n_bins);
  result.km_vpc_data = km_vpc(observed, replicates);
  return result;
}

namespace {

using nlohmann::json;

json decision_to_json(const CombinedDecision& decision) {
  json components = json::array();
  for (const auto& c : decision.components) {
    json entry{{"part", c.part},
               {"method", to_string(c.result.method)},
               {"statistic", c.result.statistic},
               {"p_value", c.result.p_value},
               {"n", c.result.n}};
    if (!c.result.warning.empty()) entry["warning"] = c.result.warning;
    components.push_back(entry);
  }
  return json{{"threshold", decision.threshold},
              {"reject", decision.reject},
              {"driving_component", decision.driving_component},
              {"components", components}};
}

}  // namespace

std::string report_to_json(const EvaluationResult& result) {
  json j;
  j["schema_version"] = 1;
  j["n_subjects"] = result.n_subjects;
  j["k"] = result.k;
  j["tests"] = {{"global", decision_to_json(result.global_test)},
                {"ks", decision_to_json(result.ks_test)}};

  int excluded = 0, low_support = 0, clamped = 0;
  for (const auto& r : result.residuals.longitudinal) {
    excluded += r.excluded;
    low_support += r.low_support;
    clamped += r.clamped;
  }
  int imputed = 0;
  for (const auto& r : result.residuals.tte) imputed += r.imputed;
  j["residual_summary"] = {{"n_longitudinal", result.residuals.longitudinal.size()},
                           {"n_excluded", excluded},
                           {"n_low_support", low_support},
                           {"n_clamped", clamped},
                           {"n_tte", result.residuals.tte.size()},
                           {"n_imputed", imputed}};

  json wormplot = json::array();
  int inside = 0;
  for (const auto& p : result.wormplot) {
    if (p.detrended_pd >= p.lower && p.detrended_pd <= p.upper) ++inside;
    wormplot.push_back(json{{"time", p.time},
                            {"rank", p.rank},
                            {"detrended_pd", p.detrended_pd},
                            {"lower", p.lower},
                            {"upper", p.upper},
                            {"censored", p.censored}});
  }
  json bands = json::array();
  for (const auto& band : result.bands) {
    json percentiles = json::array();
    for (const auto& e : band.percentiles)
      percentiles.push_back(json{{"level", e.level},
                                 {"observed", e.observed},
                                 {"lower", e.lower},
                                 {"upper", e.upper}});
    bands.push_back(json{{"bin_center", band.bin_center},
                         {"count", band.count},
                         {"merged_bins", band.merged_bins},
                         {"percentiles", percentiles}});
  }
  json km = json::array();
  for (const auto& band : result.km_vpc_data.bands)
    km.push_back(json{{"time", band.time},
                      {"observed", band.observed},
                      {"p5", band.p5},
                      {"p50", band.p50},
                      {"p95", band.p95}});

  j["diagnostics"] = {
      {"wormplot",
       {{"n", result.wormplot.size()},
        {"fraction_in_interval",
         result.wormplot.empty() ? 1.0 : static_cast<double>(inside) / result.wormplot.size()},
        {"points", wormplot}}},
      {"npd_percentile_bands", bands},
      {"km_vpc", km}};
  return j.dump(2) + "\n";
}

}  // namespace jmdiag
