#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "jmdiag/evaluate.hpp"
#include "jmdiag/parallel.hpp"
#include "jmdiag/study.hpp"

namespace {

namespace fs = std::filesystem;

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw std::invalid_argument("cannot write '" + path.string() + "'");
  out << text;
}

int run_simulate(const std::string& spec_path, int n_subjects, int n_times, std::uint64_t seed,
                 const std::string& out_prefix) {
  const jmdiag::JointModelSpec spec = jmdiag::load_spec(spec_path);
  const jmdiag::StudyDesign design =
      jmdiag::StudyDesign::balanced(n_subjects, n_times, spec.study_end);
  const std::vector<jmdiag::SubjectData> data = jmdiag::simulate_dataset(spec, design, seed);
  const std::string long_path = out_prefix + "_longitudinal.csv";
  const std::string events_path = out_prefix + "_events.csv";
  jmdiag::write_dataset_csv(data, long_path, events_path);
  int events = 0;
  for (const auto& s : data) events += !s.event.censored();
  std::cout << "simulated " << data.size() << " subjects (" << events << " events, "
            << data.size() - events << " censored) -> " << long_path << ", " << events_path
            << "\n";
  return 0;
}

int run_evaluate(const std::string& long_path, const std::string& events_path,
                 const std::string& spec_path, int k, std::uint64_t seed, int threads,
                 const std::string& out_dir, const std::string& replicates_out,
                 const std::string& decorrelation_scale) {
  const std::vector<jmdiag::SubjectData> data = jmdiag::read_dataset_csv(long_path, events_path);
  const jmdiag::JointModelSpec tested = jmdiag::load_spec(spec_path);
  jmdiag::EvaluationOptions options;
  options.k = k;
  options.seed = seed;
  options.n_threads = threads;
  if (decorrelation_scale == "raw") {
    options.decorrelation_scale = jmdiag::DecorrelationScale::kRaw;
  } else if (decorrelation_scale != "log") {
    throw std::invalid_argument("--decorrelation-scale: expected 'log' or 'raw'");
  }
  const jmdiag::EvaluationResult result = jmdiag::evaluate_dataset(data, tested, options);

  fs::create_directories(out_dir);
  const fs::path dir(out_dir);
  jmdiag::write_residuals_csv(result.residuals, (dir / "residuals.csv").string());
  write_text(dir / "report.json", jmdiag::report_to_json(result));
  jmdiag::write_wormplot_csv(result.wormplot, (dir / "wormplot.csv").string());
  write_text(dir / "wormplot.svg", jmdiag::render_wormplot_svg(result.wormplot));
  jmdiag::write_percentile_bands_csv(result.bands, (dir / "npd_bands.csv").string());
  write_text(dir / "npd_bands.svg", jmdiag::render_percentile_bands_svg(result.bands));
  jmdiag::write_km_vpc_csv(result.km_vpc_data, (dir / "km_vpc.csv").string());
  write_text(dir / "km_vpc.svg", jmdiag::render_km_vpc_svg(result.km_vpc_data));

  if (!replicates_out.empty()) {
    // Deterministic: the same seed regenerates the replicate set bit-for-bit.
    const std::uint64_t replicate_seed =
        jmdiag::derive_seed(options.seed, 0, jmdiag::StreamPurpose::kStudy);
    const jmdiag::ReplicateSet replicates =
        jmdiag::simulate_replicates(data, tested, options.k, replicate_seed, threads);
    jmdiag::write_replicates_csv(replicates, data, replicates_out);
  }

  auto print_decision = [](const char* name, const jmdiag::CombinedDecision& d) {
    std::cout << name << ": " << (d.reject ? "REJECT" : "no rejection")
              << " (threshold " << d.threshold << ", driving " << d.driving_component << ")\n";
    for (const auto& c : d.components)
      std::cout << "  " << c.part << ' ' << jmdiag::to_string(c.result.method) << ": p = "
                << c.result.p_value << '\n';
  };
  print_decision("global test", result.global_test);
  print_decision("adjusted KS test", result.ks_test);
  std::cout << "outputs written to " << out_dir << "\n";
  // Rejection is a result, not an error.
  return 0;
}

int run_study(const std::string& config_path, const std::string& family, int restrict_n,
              int studies, int k_sim, std::uint64_t seed, int threads, const std::string& out) {
  std::vector<jmdiag::Scenario> scenarios;
  if (!config_path.empty()) {
    scenarios.push_back(jmdiag::scenario_from_json_file(config_path));
    if (studies > 0) scenarios.back().n_studies = studies;
    if (k_sim > 0) scenarios.back().k = k_sim;
  } else if (!family.empty()) {
    scenarios = jmdiag::scenario_grid(family, studies > 0 ? studies : 200,
                                      k_sim > 0 ? k_sim : 2000, seed,
                                      restrict_n > 0 ? std::optional<int>(restrict_n)
                                                     : std::nullopt);
  } else {
    throw std::invalid_argument("study: provide --config or --family");
  }

  std::vector<jmdiag::ScenarioResult> results;
  results.reserve(scenarios.size());
  for (std::size_t i = 0; i < scenarios.size(); ++i) {
    const auto& s = scenarios[i];
    std::cerr << "[" << i + 1 << "/" << scenarios.size() << "] " << s.truth_label << " vs "
              << s.tested_label << " N=" << s.n_subjects << " studies=" << s.n_studies
              << " K=" << s.k << "\n";
    results.push_back(jmdiag::run_scenario(s, threads));
  }
  const std::string csv = jmdiag::scenario_results_to_csv(results);
  if (out.empty()) {
    std::cout << csv;
  } else {
    write_text(out, csv);
    std::cout << "results written to " << out << "\n";
  }
  return 0;
}

int run_plot(const std::string& residuals_path, const std::string& out_dir) {
  const jmdiag::ResidualTable table = jmdiag::read_residuals_csv(residuals_path);
  fs::create_directories(out_dir);
  const fs::path dir(out_dir);
  write_text(dir / "wormplot.svg",
             jmdiag::render_wormplot_svg(jmdiag::detrended_pd_wormplot(table.tte)));
  write_text(dir / "npd_bands.svg",
             jmdiag::render_percentile_bands_svg(jmdiag::npd_percentile_bands(table.longitudinal)));
  std::cout << "plots written to " << out_dir << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Joint-model diagnostics: normalised prediction discrepancies and distribution "
               "errors for longitudinal + time-to-event models"};
  app.require_subcommand(1);
  int threads = jmdiag::default_thread_count();

  auto* simulate = app.add_subcommand("simulate", "Simulate a joint dataset from a model spec");
  std::string sim_spec, sim_prefix = "dataset";
  int sim_n = 100, sim_times = 9;
  std::uint64_t sim_seed = 1;
  simulate->add_option("--spec", sim_spec, "Model spec JSON")->required();
  simulate->add_option("--n", sim_n, "Number of subjects")->capture_default_str();
  simulate->add_option("--n-times", sim_times, "Planned PSA samples")->capture_default_str();
  simulate->add_option("--seed", sim_seed, "Master seed")->capture_default_str();
  simulate->add_option("--out-prefix", sim_prefix, "Output CSV prefix")->capture_default_str();

  auto* evaluate = app.add_subcommand("evaluate", "Evaluate a tested model against a dataset");
  std::string eval_long, eval_events, eval_spec, eval_out = "evaluation", eval_reps;
  std::string eval_scale = "log";
  int eval_k = 2000;
  std::uint64_t eval_seed = 1;
  evaluate->add_option("--longitudinal", eval_long, "Longitudinal CSV (id,time,value)")
      ->required();
  evaluate->add_option("--events", eval_events, "Event CSV (id,time,event)")->required();
  evaluate->add_option("--spec", eval_spec, "Tested model spec JSON")->required();
  evaluate->add_option("--k", eval_k, "Monte-Carlo replicates")->capture_default_str();
  evaluate->add_option("--seed", eval_seed, "Master seed")->capture_default_str();
  evaluate->add_option("--out-dir", eval_out, "Output directory")->capture_default_str();
  evaluate->add_option("--export-replicates", eval_reps,
                       "Also write the simulated replicate set to this CSV");
  evaluate->add_option("--threads", threads, "Worker threads (results are thread-count invariant)")
      ->capture_default_str();
  evaluate->add_option("--decorrelation-scale", eval_scale,
                       "Whitening scale for pde/npde: 'log' (signed log1p) or 'raw'")
      ->capture_default_str();

  auto* study = app.add_subcommand("study", "Run a simulation-study scenario grid");
  std::string study_config, study_family, study_out;
  int study_n = 0, study_studies = 0, study_k = 0;
  std::uint64_t study_seed = 20240101;
  study->add_option("--config", study_config, "Scenario config JSON");
  study->add_option("--family", study_family,
                    "Scenario family: shape_k, epsilon, omega_epsilon, association");
  study->add_option("--n", study_n, "Restrict the grid to one sample size");
  study->add_option("--studies", study_studies, "Replicate studies per scenario (default 200)");
  study->add_option("--k-sim", study_k, "Monte-Carlo replicates per study (default 2000)");
  study->add_option("--seed", study_seed, "Master seed")->capture_default_str();
  study->add_option("--out", study_out, "Results CSV path (default: stdout)");
  study->add_option("--threads", threads, "Worker threads (results are thread-count invariant)")
      ->capture_default_str();

  auto* plot = app.add_subcommand("plot", "Render diagnostic SVGs from a residual table");
  std::string plot_residuals, plot_out = "plots";
  plot->add_option("--residuals", plot_residuals, "Residual table CSV")->required();
  plot->add_option("--out-dir", plot_out, "Output directory")->capture_default_str();

  try {
    app.parse(argc, argv);
    if (simulate->parsed())
      return run_simulate(sim_spec, sim_n, sim_times, sim_seed, sim_prefix);
    if (evaluate->parsed())
      return run_evaluate(eval_long, eval_events, eval_spec, eval_k, eval_seed, threads, eval_out,
                          eval_reps, eval_scale);
    if (study->parsed())
      return run_study(study_config, study_family, study_n, study_studies, study_k, study_seed,
                       threads, study_out);
    if (plot->parsed()) return run_plot(plot_residuals, plot_out);
    return 1;
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  } catch (const jmdiag::numerical_error& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
