#include <doctest.h>

#include <cmath>
#include <random>

#include "jmdiag/model.hpp"
#include "jmdiag/quadrature.hpp"
#include "oracles.hpp"

using namespace jmdiag;

namespace {

IndividualParameters table1_typical() { return {0.05, 80.0, 0.3, 140.0}; }

// Production rate of the underlying turnover system: treatment suppresses
// regrowth until T_esc, full regrowth afterwards.
double production(double t, const IndividualParameters& psi, const PsaConstants& c) {
  const double a1 = psi.growth_rate * (1.0 - psi.efficacy) - c.k_out;
  const double a2 = psi.growth_rate - c.k_out;
  const double exponent =
      (t <= psi.escape_time) ? a1 * t : a1 * psi.escape_time + a2 * (t - psi.escape_time);
  return c.delta * psi.baseline_psa * std::exp(exponent);
}

double psa_ode_oracle(double t, const IndividualParameters& psi, const PsaConstants& c,
                      int steps = 200000) {
  return oracles::rk4_integrate(
      [&](double s, double y) { return production(s, psi, c) - c.delta * y; }, psi.baseline_psa,
      0.0, t, steps);
}

// Random valid individual parameters, independent of the library's RNG.
IndividualParameters random_psi(std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  IndividualParameters psi;
  psi.growth_rate = 0.05 * std::exp(0.1 * normal(rng));
  psi.baseline_psa = 80.0 * std::exp(0.6 * normal(rng));
  const double logit = std::log(0.3 / 0.7) + 1.5 * normal(rng);
  psi.efficacy = 1.0 / (1.0 + std::exp(-logit));
  psi.escape_time = 140.0 * std::exp(0.6 * normal(rng));
  return psi;
}

}  // namespace

TEST_CASE("transform_parameter: identity, exponential arithmetic, logit oracle") {
  CHECK(transform_parameter(0.3, 0.0, Transform::kLogitNormal) == doctest::Approx(0.3));
  CHECK(transform_parameter(0.05, std::log(2.0), Transform::kLogNormal) ==
        doctest::Approx(0.10).epsilon(1e-14));
  const double expected = 1.0 / (1.0 + std::exp(-(std::log(0.3 / 0.7) + 1.5)));
  CHECK(transform_parameter(0.3, 1.5, Transform::kLogitNormal) ==
        doctest::Approx(expected).epsilon(1e-14));
  CHECK(transform_parameter(1.0, 0.5, Transform::kNormal) == doctest::Approx(1.5));
  CHECK_THROWS_AS(transform_parameter(-1.0, 0.0, Transform::kLogNormal), std::invalid_argument);
  CHECK_THROWS_AS(transform_parameter(1.2, 0.0, Transform::kLogitNormal), std::invalid_argument);
}

TEST_CASE("psa_value equals PSA0 at t = 0") {
  std::mt19937_64 rng(7);
  for (int i = 0; i < 100; ++i) {
    const IndividualParameters psi = random_psi(rng);
    CHECK(psa_value(0.0, psi, PsaConstants{}) == doctest::Approx(psi.baseline_psa).epsilon(1e-12));
  }
}

TEST_CASE("psa_value is continuous at the escape time") {
  std::mt19937_64 rng(11);
  const PsaConstants constants;
  for (int i = 0; i < 1000; ++i) {
    const IndividualParameters psi = random_psi(rng);
    const PsaCurve curve(psi, constants);
    const double scale = curve.value(psi.escape_time);
    for (const double h : {1e-4, 1e-6, 1e-8}) {
      const double gap = std::fabs(curve.value(psi.escape_time - h) - curve.value(psi.escape_time + h));
      CHECK(gap <= 1e3 * h * (1.0 + scale));
    }
  }
}

TEST_CASE("psa_value matches the turnover ODE oracle (canonical second branch)") {
  const IndividualParameters psi = table1_typical();
  const PsaConstants constants;
  for (const double t : {20.0, 140.0, 200.0, 365.0}) {
    const double oracle = psa_ode_oracle(t, psi, constants);
    CHECK(psa_value(t, psi, constants) == doctest::Approx(oracle).epsilon(1e-8));
  }
  // A couple of random individuals, past the escape knot.
  std::mt19937_64 rng(13);
  for (int i = 0; i < 5; ++i) {
    const IndividualParameters random = random_psi(rng);
    const double t = random.escape_time * 1.7;
    CHECK(psa_value(t, random, constants) ==
          doctest::Approx(psa_ode_oracle(t, random, constants)).epsilon(1e-7));
  }
}

TEST_CASE("psa_value handles a degenerate pre-escape denominator") {
  // r(1-eps) - k_out + delta = 0 exactly: the stable evaluation must agree
  // with the ODE oracle and with the analytic limit PSA0 e^{-dt} (1 + dt).
  PsaConstants constants;
  constants.k_out = 0.3;
  constants.delta = 0.1;
  IndividualParameters psi;
  psi.growth_rate = 0.4;
  psi.efficacy = 0.5;
  psi.baseline_psa = 50.0;
  psi.escape_time = 200.0;
  const PsaCurve curve(psi, constants);
  CHECK(curve.near_degenerate());
  for (const double t : {1.0, 30.0, 100.0, 199.0}) {
    const double limit = psi.baseline_psa * std::exp(-constants.delta * t) * (1.0 + constants.delta * t);
    CHECK(curve.value(t) == doctest::Approx(limit).epsilon(1e-12));
    CHECK(curve.value(t) == doctest::Approx(psa_ode_oracle(t, psi, constants)).epsilon(1e-8));
  }
  // A nearly-degenerate neighbour evaluates smoothly to the same values.
  IndividualParameters near = psi;
  near.growth_rate = 0.4 + 1e-9;
  const PsaCurve near_curve(near, constants);
  CHECK(near_curve.value(100.0) == doctest::Approx(curve.value(100.0)).epsilon(1e-7));
}

TEST_CASE("psa_log_slope matches central finite differences") {
  const PsaConstants constants;
  const IndividualParameters psi = table1_typical();
  auto log_psa = [&](double t) { return std::log(psa_value(t, psi, constants) + 1.0); };
  const double fd = oracles::central_difference(log_psa, 30.0, 1e-4);
  CHECK(psa_log_slope(30.0, psi, constants) == doctest::Approx(fd).epsilon(1e-6));

  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> time_draw(0.5, 364.0);
  for (int i = 0; i < 100; ++i) {
    const IndividualParameters random = random_psi(rng);
    double t = time_draw(rng);
    // keep clear of the escape knot where the second derivative jumps
    if (std::fabs(t - random.escape_time) < 0.1) t += 0.5;
    auto f = [&](double s) { return std::log(psa_value(s, random, constants) + 1.0); };
    const double expected = oracles::central_difference(f, t, 1e-4);
    CHECK(psa_log_slope(t, random, constants) ==
          doctest::Approx(expected).epsilon(1e-5));
  }
}

TEST_CASE("psa slope vanishes at the nadir and stays positive without treatment effect") {
  const PsaConstants constants;
  const IndividualParameters psi = table1_typical();
  const PsaCurve curve(psi, constants);
  // The decline persists past the escape knot; the nadir sits where regrowth
  // overtakes elimination. Locate it by bisection on the derivative.
  REQUIRE(curve.derivative(psi.escape_time) < 0.0);
  double lo = psi.escape_time, hi = 2000.0;
  REQUIRE(curve.derivative(hi) > 0.0);
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (curve.derivative(mid) < 0.0 ? lo : hi) = mid;
  }
  CHECK(std::fabs(curve.log_slope(0.5 * (lo + hi))) < 1e-8);

  IndividualParameters untreated = psi;
  untreated.efficacy = 0.0;  // r > k_out: monotone growth
  const PsaCurve growth(untreated, constants);
  for (double t = 0.5; t <= 365.0; t += 0.5) {
    CHECK(growth.derivative(t) > 0.0);
  }
}

TEST_CASE("association_value: constant kinds and the log identity") {
  const PsaConstants constants;
  const IndividualParameters psi = table1_typical();
  for (const double t : {0.0, 50.0, 300.0}) {
    CHECK(association_value(t, psi, constants, {AssociationKind::kBaselinePsa}) ==
          psi.baseline_psa);
    CHECK(association_value(t, psi, constants, {AssociationKind::kTimeToEscape}) ==
          psi.escape_time);
    CHECK(association_value(t, psi, constants, {AssociationKind::kLogPsa}) ==
          std::log1p(psa_value(t, psi, constants)));
  }
}

TEST_CASE("association_value: cumulative log PSA against a trapezoid oracle") {
  const PsaConstants constants;
  const IndividualParameters psi = table1_typical();
  auto f = [&](double x) { return std::log1p(psa_value(x, psi, constants)); };
  const double oracle100 = oracles::trapezoid(f, 0.0, 100.0, 100000);
  CHECK(association_value(100.0, psi, constants, {AssociationKind::kAucLogPsa}) ==
        doctest::Approx(oracle100).epsilon(1e-5));
  // across the escape knot
  const double oracle300 =
      oracles::trapezoid(f, 0.0, 140.0, 100000) + oracles::trapezoid(f, 140.0, 300.0, 100000);
  CHECK(association_value(300.0, psi, constants, {AssociationKind::kAucLogPsa}) ==
        doctest::Approx(oracle300).epsilon(1e-5));
}

TEST_CASE("association_value: slope kind follows the configured scale") {
  const PsaConstants constants;
  const IndividualParameters psi = table1_typical();
  AssociationFunction log_scale{AssociationKind::kSlopeLogPsa, SlopeScale::kLogPsaPlusOne};
  AssociationFunction raw_scale{AssociationKind::kSlopeLogPsa, SlopeScale::kRawPsa};
  CHECK(association_value(30.0, psi, constants, log_scale) ==
        doctest::Approx(psa_log_slope(30.0, psi, constants)));
  CHECK(association_value(30.0, psi, constants, raw_scale) ==
        doctest::Approx(psa_slope(30.0, psi, constants)));
}

namespace {

JointModelSpec spec_with_tte(double k, double lambda, double beta) {
  JointModelSpec spec = JointModelSpec::base_model();
  spec.tte_parameters = {
      {"k", k, Transform::kLogNormal, 0.0},
      {"lambda", lambda, Transform::kLogNormal, 0.0},
      {"beta", beta, beta > 0.0 ? Transform::kLogNormal : Transform::kNormal, 0.0},
  };
  return spec;
}

}  // namespace

TEST_CASE("hazard: constant baseline and Weibull anchors") {
  const IndividualParameters psi = table1_typical();
  const JointModelSpec exponential = spec_with_tte(1.0, 580.0, 0.0);
  for (const double t : {1.0, 100.0, 580.0, 2000.0}) {
    CHECK(hazard(t, psi, exponential) == doctest::Approx(1.0 / 580.0).epsilon(1e-12));
  }
  const JointModelSpec weibull = spec_with_tte(1.5, 580.0, 0.0);
  CHECK(hazard(580.0, psi, weibull) == doctest::Approx(1.5 / 580.0).epsilon(1e-12));
}

TEST_CASE("hazard: current-PSA link composes Weibull and PSA terms") {
  const IndividualParameters psi = table1_typical();
  const JointModelSpec spec = JointModelSpec::base_model();
  const double t = 200.0;
  const double weibull_term = (1.5 / 580.0) * std::pow(t / 580.0, 0.5);
  const double expected = weibull_term * std::exp(0.001 * psa_value(t, psi, spec.constants));
  CHECK(hazard(t, psi, spec) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("hazard at t = 0: rejected for k < 1, fine for k >= 1") {
  const IndividualParameters psi = table1_typical();
  CHECK_THROWS_AS(hazard(0.0, psi, spec_with_tte(0.8, 580.0, 0.0)), std::invalid_argument);
  CHECK(hazard(0.0, psi, spec_with_tte(1.0, 580.0, 0.0)) == doctest::Approx(1.0 / 580.0));
  CHECK(hazard(0.0, psi, spec_with_tte(1.5, 580.0, 0.0)) == 0.0);
}

TEST_CASE("cumulative_hazard: closed-form Weibull for beta = 0, all shapes") {
  const IndividualParameters psi = table1_typical();
  for (const double k : {0.8, 1.0, 1.2, 1.5, 2.0}) {
    const JointModelSpec spec = spec_with_tte(k, 580.0, 0.0);
    CHECK(cumulative_hazard(0.0, psi, spec) == 0.0);
    for (const double t : {5.0, 100.0, 365.0, 1500.0}) {
      const double exact = std::pow(t / 580.0, k);
      CHECK(cumulative_hazard(t, psi, spec) == doctest::Approx(exact).epsilon(1e-8));
      CHECK(survival(t, psi, spec) == doctest::Approx(std::exp(-exact)).epsilon(1e-8));
    }
  }
}

TEST_CASE("cumulative_hazard: Simpson oracle for the current-PSA link") {
  const IndividualParameters psi = table1_typical();
  const JointModelSpec spec = JointModelSpec::base_model();
  auto h = [&](double t) { return hazard(std::max(t, 1e-12), psi, spec); };
  const double oracle =
      oracles::simpson(h, 0.0, 140.0, 40000) + oracles::simpson(h, 140.0, 365.0, 40000);
  CHECK(cumulative_hazard(365.0, psi, spec) == doctest::Approx(oracle).epsilon(1e-6));
}

TEST_CASE("cumulative_hazard is nondecreasing and superadditive-consistent") {
  const IndividualParameters psi = table1_typical();
  const JointModelSpec spec = JointModelSpec::base_model();
  double previous = 0.0;
  for (double t = 20.0; t <= 500.0; t += 20.0) {
    const double value = cumulative_hazard(t, psi, spec);
    CHECK(value >= previous);
    previous = value;
  }
  const double a = 120.0, b = 400.0;
  const double tail =
      integrate_or_throw([&](double t) { return hazard(t, psi, spec); }, a, b, 1e-8, 1e-12);
  CHECK(cumulative_hazard(a, psi, spec) + tail ==
        doctest::Approx(cumulative_hazard(b, psi, spec)).epsilon(1e-7));
}

TEST_CASE("survival: event-free probability anchor at lambda") {
  const IndividualParameters psi = table1_typical();
  const JointModelSpec spec = spec_with_tte(1.5, 580.0, 0.0);
  CHECK(survival(0.0, psi, spec) == 1.0);
  CHECK(survival(580.0, psi, spec) == doctest::Approx(std::exp(-1.0)).epsilon(1e-6));
  double previous = 1.0;
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> jump(1.0, 80.0);
  double t = 0.0;
  for (int i = 0; i < 20; ++i) {
    t += jump(rng);
    const double s = survival(t, psi, spec);
    CHECK(s <= previous);
    CHECK(s > 0.0);
    previous = s;
  }
}

TEST_CASE("spec validation names the offending field") {
  JointModelSpec spec = JointModelSpec::base_model();
  spec.covariate_coefficient = 0.1;
  CHECK_THROWS_WITH_AS(spec.validate(),
                       doctest::Contains("covariate_coefficient"), std::invalid_argument);

  spec = JointModelSpec::base_model();
  spec.psa_parameters[2].fixed_effect = 1.4;  // epsilon outside (0,1)
  CHECK_THROWS_WITH_AS(spec.validate(), doctest::Contains("epsilon"), std::invalid_argument);

  spec = JointModelSpec::base_model();
  spec.tte_parameters[0].omega = 0.3;
  CHECK_THROWS_WITH_AS(spec.validate(), doctest::Contains("omega"), std::invalid_argument);

  spec = JointModelSpec::base_model();
  spec.error_model = {ErrorModelKind::kProportional, 0.0, 0.0};
  CHECK_THROWS_WITH_AS(spec.validate(), doctest::Contains("error_model"), std::invalid_argument);
}

TEST_CASE("model spec JSON round trip") {
  const JointModelSpec spec = JointModelSpec::base_model();
  const JointModelSpec parsed = spec_from_json_string(to_json_string(spec));
  CHECK(parsed.psa_parameter("epsilon").fixed_effect == 0.3);
  CHECK(parsed.psa_parameter("epsilon").omega == 1.5);
  CHECK(parsed.weibull_shape() == 1.5);
  CHECK(parsed.weibull_scale() == 580.0);
  CHECK(parsed.association_beta() == 0.001);
  CHECK(parsed.association.kind == AssociationKind::kCurrentPsa);
  CHECK(parsed.study_end == 365.0);
  CHECK(to_json_string(parsed) == to_json_string(spec));
}
