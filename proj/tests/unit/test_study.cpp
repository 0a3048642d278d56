#include <doctest.h>

#include <cstdio>
#include <fstream>

#include "jmdiag/study.hpp"

using namespace jmdiag;

TEST_CASE("scenario grid sizes match the study design") {
  CHECK(scenario_grid("shape_k", 10, 100, 1).size() == 30);
  CHECK(scenario_grid("epsilon", 10, 100, 1).size() == 12);
  CHECK(scenario_grid("omega_epsilon", 10, 100, 1).size() == 9);
  CHECK(scenario_grid("association", 10, 100, 1).size() == 36);
  CHECK(scenario_grid("shape_k", 10, 100, 1, 50).size() == 10);
  CHECK_THROWS_AS(scenario_grid("nope", 10, 100, 1), std::invalid_argument);
}

TEST_CASE("scenario grid uses common random numbers across tested models") {
  const auto grid = scenario_grid("epsilon", 5, 50, 99, 100);
  for (const auto& s : grid) {
    CHECK(s.master_seed == 99);
    CHECK(s.truth_label == "eps=0.3");
  }
  CHECK(grid[0].tested_label == "eps=0.15");
  CHECK(grid[3].tested_label == "eps=0.8");
}

TEST_CASE("type1 interval convention: exact binomial quantiles") {
  const Interval i100 = type1_error_interval(100);
  CHECK(i100.lower == doctest::Approx(0.01));
  CHECK(i100.upper == doctest::Approx(0.10));
  const Interval i200 = type1_error_interval(200);
  CHECK(i200.lower >= 0.0);
  CHECK(i200.upper <= 0.12);
  CHECK(i200.lower < 0.05);
  CHECK(i200.upper > 0.05);
}

TEST_CASE("run_scenario with one study yields the binary decision") {
  Scenario scenario;
  scenario.truth_label = "base";
  scenario.tested_label = "base";
  scenario.truth = JointModelSpec::base_model();
  scenario.tested = JointModelSpec::base_model();
  scenario.n_subjects = 25;
  scenario.n_studies = 1;
  scenario.k = 60;
  scenario.master_seed = 4;
  const ScenarioResult result = run_scenario(scenario, 1);
  CHECK(result.is_type1);
  CHECK((result.global.rejections == 0 || result.global.rejections == 1));
  CHECK(result.global.rate == doctest::Approx(result.global.rejections));
  CHECK(result.global.ci.lower <= result.global.rate);
  CHECK(result.global.ci.upper >= result.global.rate);
}

TEST_CASE("run_scenario is thread-count invariant") {
  Scenario scenario;
  scenario.truth_label = "base";
  scenario.tested_label = "eps=0.8";
  scenario.truth = JointModelSpec::base_model();
  scenario.tested = JointModelSpec::base_model();
  for (auto& p : scenario.tested.psa_parameters)
    if (p.name == "epsilon") p.fixed_effect = 0.8;
  scenario.n_subjects = 20;
  scenario.n_studies = 6;
  scenario.k = 50;
  scenario.master_seed = 12;
  const ScenarioResult serial = run_scenario(scenario, 1);
  const ScenarioResult parallel = run_scenario(scenario, 4);
  CHECK(serial.global.rejections == parallel.global.rejections);
  CHECK(serial.ks.rejections == parallel.ks.rejections);
}

TEST_CASE("scenario results CSV schema") {
  ScenarioResult r;
  r.truth_label = "k=1";
  r.tested_label = "k=2";
  r.n_subjects = 50;
  r.n_studies = 10;
  r.global = {3, 10, 0.3, {0.07, 0.65}};
  r.ks = {1, 10, 0.1, {0.0, 0.45}};
  const std::string csv = scenario_results_to_csv({r});
  CHECK(csv.find("truth,tested,N,test,rejections,studies,rate,ci_low,ci_high\n") == 0);
  CHECK(csv.find("k=1,k=2,50,global,3,10,0.3,") != std::string::npos);
  CHECK(csv.find("k=1,k=2,50,ks,1,10,0.1,") != std::string::npos);
}

TEST_CASE("scenario config JSON with relative spec paths") {
  save_spec(JointModelSpec::base_model(), "cfg_truth.json");
  JointModelSpec tested = JointModelSpec::base_model();
  for (auto& p : tested.psa_parameters)
    if (p.name == "epsilon") p.fixed_effect = 0.45;
  save_spec(tested, "cfg_tested.json");
  {
    std::ofstream config("cfg_scenario.json");
    config << R"({
      "schema_version": 1,
      "truth": "cfg_truth.json",
      "tested": "cfg_tested.json",
      "truth_label": "base",
      "tested_label": "eps=0.45",
      "n_subjects": 40,
      "n_studies": 7,
      "k": 111,
      "master_seed": 777
    })";
  }
  const Scenario scenario = scenario_from_json_file("cfg_scenario.json");
  CHECK(scenario.n_subjects == 40);
  CHECK(scenario.n_studies == 7);
  CHECK(scenario.k == 111);
  CHECK(scenario.master_seed == 777);
  CHECK(scenario.truth.psa_parameter("epsilon").fixed_effect == 0.3);
  CHECK(scenario.tested.psa_parameter("epsilon").fixed_effect == 0.45);

  {
    std::ofstream config("cfg_bad.json");
    config << R"({"truth": "cfg_truth.json", "tested": 42, "n_subjects": 10})";
  }
  CHECK_THROWS_AS(scenario_from_json_file("cfg_bad.json"), std::invalid_argument);
}
