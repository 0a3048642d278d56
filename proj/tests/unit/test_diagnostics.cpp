#include <doctest.h>

#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include "jmdiag/diagnostics.hpp"
#include "jmdiag/math.hpp"
#include "oracles.hpp"

using namespace jmdiag;

namespace {

TteResidual make_tte(const std::string& id, double time, double pd, bool censored = false) {
  TteResidual r;
  r.id = id;
  r.event = {time, censored ? EventIndicator::kRightCensored : EventIndicator::kObserved};
  r.pd = pd;
  r.npd = norm_quantile(pd);
  r.imputed = censored;
  return r;
}

LongitudinalResidual make_long(const std::string& id, double time, double npd) {
  LongitudinalResidual r;
  r.id = id;
  r.time = time;
  r.npd = npd;
  r.pd = norm_cdf(npd);
  r.pde = r.pd;
  r.npde = npd;
  r.survivor_count = 100;
  return r;
}

}  // namespace

TEST_CASE("wormplot: single point uses the uniform order statistic") {
  const std::vector<TteResidual> residuals = {make_tte("a", 120.0, 0.42)};
  const auto points = detrended_pd_wormplot(residuals);
  REQUIRE(points.size() == 1);
  // Beta(1,1) = U(0,1): median 0.5, interval (0.05 - 0.5, 0.95 - 0.5)
  CHECK(points[0].detrended_pd == doctest::Approx(0.42 - 0.5));
  CHECK(points[0].lower == doctest::Approx(-0.45));
  CHECK(points[0].upper == doctest::Approx(0.45));
  CHECK(points[0].time == 120.0);
}

TEST_CASE("wormplot: Beta(2,2) quantiles match an order-statistic sampling oracle") {
  const std::vector<TteResidual> residuals = {
      make_tte("a", 10.0, 0.2), make_tte("b", 20.0, 0.5), make_tte("c", 30.0, 0.9)};
  const auto points = detrended_pd_wormplot(residuals);
  REQUIRE(points.size() == 3);

  // simulate the middle order statistic of three uniforms
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const int reps = 1000000;
  std::vector<double> mid(reps);
  for (int i = 0; i < reps; ++i) {
    double a = unif(rng), b = unif(rng), c = unif(rng);
    mid[i] = a + b + c - std::max({a, b, c}) - std::min({a, b, c});
  }
  std::sort(mid.begin(), mid.end());
  const double q05 = mid[static_cast<std::size_t>(0.05 * reps)];
  const double q50 = mid[static_cast<std::size_t>(0.50 * reps)];
  const double q95 = mid[static_cast<std::size_t>(0.95 * reps)];

  const WormPoint& middle = points[1];
  const double median = middle.detrended_pd * -1.0 + 0.5;  // pd 0.5 - median
  CHECK(median == doctest::Approx(q50).epsilon(0.01));
  CHECK(middle.lower == doctest::Approx(q05 - q50).epsilon(0.02));
  CHECK(middle.upper == doctest::Approx(q95 - q50).epsilon(0.02));
}

TEST_CASE("wormplot: censored points carry their flag and censoring time") {
  const std::vector<TteResidual> residuals = {make_tte("a", 100.0, 0.3),
                                              make_tte("b", 365.0, 0.8, true)};
  const auto points = detrended_pd_wormplot(residuals);
  REQUIRE(points.size() == 2);
  CHECK(!points[0].censored);
  CHECK(points[1].censored);
  CHECK(points[1].time == 365.0);
}

TEST_CASE("wormplot: 90% de-trended intervals have exact order-statistic coverage") {
  // under H0 the pd are uniform; pooled coverage over many replicate studies
  // must sit at 90% within simulation noise
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  long inside = 0, total = 0;
  for (int study = 0; study < 500; ++study) {
    std::vector<TteResidual> residuals;
    for (int i = 0; i < 100; ++i)
      residuals.push_back(make_tte("s" + std::to_string(i), i + 1.0, unif(rng)));
    for (const auto& p : detrended_pd_wormplot(residuals)) {
      inside += (p.detrended_pd >= p.lower && p.detrended_pd <= p.upper);
      ++total;
    }
  }
  const double coverage = static_cast<double>(inside) / total;
  CHECK(coverage > 0.88);
  CHECK(coverage < 0.92);
}

TEST_CASE("percentile bands: identical residuals collapse the observed percentiles") {
  std::vector<LongitudinalResidual> residuals;
  for (int s = 0; s < 10; ++s)
    for (const double t : {0.0, 100.0, 200.0})
      residuals.push_back(make_long("s" + std::to_string(s), t, 0.7));
  const auto bands = npd_percentile_bands(residuals, 3);
  REQUIRE(bands.size() == 3);
  for (const auto& band : bands) {
    CHECK(band.count == 10);
    for (const auto& entry : band.percentiles) CHECK(entry.observed == doctest::Approx(0.7));
  }
}

TEST_CASE("percentile bands: median interval matches a normal order-statistic oracle") {
  const int m = 50;
  std::vector<LongitudinalResidual> residuals;
  std::mt19937_64 rng(13);
  std::normal_distribution<double> g(0.0, 1.0);
  for (int i = 0; i < m; ++i) residuals.push_back(make_long("s" + std::to_string(i), 10.0, g(rng)));
  const auto bands = npd_percentile_bands(residuals, 1);
  REQUIRE(bands.size() == 1);
  const PercentileEntry median = bands[0].percentiles[1];
  CHECK(median.level == 0.5);

  // oracle: simulate the rank-25 order statistic of 50 standard normals
  const int reps = 100000;
  std::vector<double> stat(reps);
  std::vector<double> sample(m);
  for (int r = 0; r < reps; ++r) {
    for (auto& v : sample) v = g(rng);
    std::nth_element(sample.begin(), sample.begin() + 24, sample.end());
    stat[r] = sample[24];
  }
  std::sort(stat.begin(), stat.end());
  CHECK(median.lower ==
        doctest::Approx(stat[static_cast<std::size_t>(0.05 * reps)]).epsilon(0.05));
  CHECK(median.upper ==
        doctest::Approx(stat[static_cast<std::size_t>(0.95 * reps)]).epsilon(0.05));
}

TEST_CASE("percentile bands: 95th interval narrows with bin size") {
  auto width_at = [](int m) {
    std::vector<LongitudinalResidual> residuals;
    std::mt19937_64 rng(17);
    std::normal_distribution<double> g(0.0, 1.0);
    for (int i = 0; i < m; ++i)
      residuals.push_back(make_long("s" + std::to_string(i), 5.0, g(rng)));
    const auto bands = npd_percentile_bands(residuals, 1);
    const PercentileEntry& p95 = bands[0].percentiles[2];
    return p95.upper - p95.lower;
  };
  CHECK(width_at(20) > width_at(200));
}

TEST_CASE("percentile bands: undersized bins merge into a neighbour") {
  std::vector<LongitudinalResidual> residuals;
  std::mt19937_64 rng(19);
  std::normal_distribution<double> g(0.0, 1.0);
  // 3 observations at the last time, 20 at each of the first two
  for (int i = 0; i < 20; ++i) residuals.push_back(make_long("a" + std::to_string(i), 0.0, g(rng)));
  for (int i = 0; i < 20; ++i) residuals.push_back(make_long("b" + std::to_string(i), 50.0, g(rng)));
  for (int i = 0; i < 3; ++i) residuals.push_back(make_long("c" + std::to_string(i), 100.0, g(rng)));
  const auto bands = npd_percentile_bands(residuals, 3);
  REQUIRE(bands.size() == 2);
  CHECK(bands[1].count == 23);
  CHECK(bands[1].merged_bins == 2);
}

TEST_CASE("percentile bands are invariant to input ordering") {
  std::vector<LongitudinalResidual> residuals;
  std::mt19937_64 rng(23);
  std::normal_distribution<double> g(0.0, 1.0);
  for (int i = 0; i < 60; ++i)
    residuals.push_back(make_long("s" + std::to_string(i), (i % 4) * 50.0, g(rng)));
  const auto sorted_bands = npd_percentile_bands(residuals, 4);
  std::shuffle(residuals.begin(), residuals.end(), rng);
  const auto shuffled_bands = npd_percentile_bands(residuals, 4);
  REQUIRE(sorted_bands.size() == shuffled_bands.size());
  for (std::size_t b = 0; b < sorted_bands.size(); ++b) {
    CHECK(sorted_bands[b].bin_center == shuffled_bands[b].bin_center);
    for (int level = 0; level < 3; ++level)
      CHECK(sorted_bands[b].percentiles[level].observed ==
            shuffled_bands[b].percentiles[level].observed);
  }
}

TEST_CASE("km estimator: uncensored drops, censoring handling, all censored") {
  {
    const std::vector<EventRecord> records = {{1.0, EventIndicator::kObserved},
                                              {2.0, EventIndicator::kObserved},
                                              {3.0, EventIndicator::kObserved}};
    const KmCurve km = km_estimator(records);
    REQUIRE(km.times.size() == 3);
    CHECK(km.survival[0] == doctest::Approx(2.0 / 3.0));
    CHECK(km.survival[1] == doctest::Approx(1.0 / 3.0));
    CHECK(km.survival[2] == doctest::Approx(0.0));
  }
  {
    // events at 1 and 3, censoring at 2: S(1) = 2/3, S(3) = 0
    const std::vector<EventRecord> records = {{1.0, EventIndicator::kObserved},
                                              {2.0, EventIndicator::kRightCensored},
                                              {3.0, EventIndicator::kObserved}};
    const KmCurve km = km_estimator(records);
    REQUIRE(km.times.size() == 2);
    CHECK(km.survival[0] == doctest::Approx(2.0 / 3.0));
    CHECK(km.at_risk[1] == 1);
    CHECK(km.survival[1] == doctest::Approx(0.0));
  }
  {
    const std::vector<EventRecord> records = {{5.0, EventIndicator::kRightCensored},
                                              {7.0, EventIndicator::kRightCensored}};
    const KmCurve km = km_estimator(records);
    CHECK(km.times.empty());
    CHECK(km.survival_at(10.0) == 1.0);
  }
}

TEST_CASE("km estimator equals one minus the empirical cdf without censoring") {
  std::mt19937_64 rng(29);
  std::uniform_real_distribution<double> unif(1.0, 300.0);
  std::vector<EventRecord> records;
  std::vector<double> times;
  for (int i = 0; i < 57; ++i) {
    const double t = unif(rng);
    records.push_back({t, EventIndicator::kObserved});
    times.push_back(t);
  }
  const KmCurve km = km_estimator(records);
  std::sort(times.begin(), times.end());
  for (const double probe : {20.0, 100.0, 250.0}) {
    const double ecdf =
        (std::upper_bound(times.begin(), times.end(), probe) - times.begin()) /
        static_cast<double>(times.size());
    CHECK(km.survival_at(probe) == doctest::Approx(1.0 - ecdf).epsilon(1e-12));
  }
}

TEST_CASE("km-vpc: replicates identical to the data collapse the bands") {
  std::vector<SubjectData> observed(6);
  const double times[6] = {40.0, 90.0, 150.0, 200.0, 300.0, 365.0};
  for (int s = 0; s < 6; ++s) {
    observed[s].id = "s" + std::to_string(s);
    observed[s].event = {times[s],
                         s == 5 ? EventIndicator::kRightCensored : EventIndicator::kObserved};
  }
  ReplicateSet reps;
  reps.k = 120;
  reps.by_subject.resize(6);
  for (int s = 0; s < 6; ++s)
    for (int k = 0; k < reps.k; ++k) {
      Replicate r;
      r.uncensored_time = times[s];
      r.record = observed[s].event;
      reps.by_subject[s].push_back(r);
    }
  const KmVpc vpc = km_vpc(observed, reps);
  for (const auto& band : vpc.bands) {
    CHECK(band.p5 == doctest::Approx(band.observed));
    CHECK(band.p50 == doctest::Approx(band.observed));
    CHECK(band.p95 == doctest::Approx(band.observed));
  }
}

TEST_CASE("svg rendering is deterministic and handles empty inputs") {
  const std::vector<TteResidual> residuals = {make_tte("a", 120.0, 0.42),
                                              make_tte("b", 240.0, 0.77)};
  const auto points = detrended_pd_wormplot(residuals);
  const std::string svg1 = render_wormplot_svg(points);
  const std::string svg2 = render_wormplot_svg(points);
  CHECK(svg1 == svg2);
  CHECK(svg1.find("<svg") != std::string::npos);
  CHECK(svg1.find("</svg>") != std::string::npos);

  const std::string empty_worm = render_wormplot_svg({});
  CHECK(empty_worm.find("<svg") != std::string::npos);
  const std::string empty_bands = render_percentile_bands_svg({});
  CHECK(empty_bands.find("</svg>") != std::string::npos);
  const std::string empty_km = render_km_vpc_svg(KmVpc{});
  CHECK(empty_km.find("</svg>") != std::string::npos);
}

TEST_CASE("diagnostic CSV round trips") {
  const std::vector<TteResidual> residuals = {make_tte("a", 120.0, 0.42),
                                              make_tte("b", 240.0, 0.77, true)};
  const auto points = detrended_pd_wormplot(residuals);
  write_wormplot_csv(points, "test_wormplot.csv");
  const auto back = wormplot_from_csv("test_wormplot.csv");
  REQUIRE(back.size() == points.size());
  CHECK(back[0].detrended_pd == doctest::Approx(points[0].detrended_pd).epsilon(1e-15));
  CHECK(back[1].censored == points[1].censored);

  std::vector<LongitudinalResidual> lr;
  std::mt19937_64 rng(31);
  std::normal_distribution<double> g(0.0, 1.0);
  for (int i = 0; i < 40; ++i) lr.push_back(make_long("s" + std::to_string(i), (i % 2) * 100.0, g(rng)));
  const auto bands = npd_percentile_bands(lr, 2);
  write_percentile_bands_csv(bands, "test_bands.csv");
  const auto bands_back = percentile_bands_from_csv("test_bands.csv");
  REQUIRE(bands_back.size() == bands.size());
  CHECK(bands_back[0].percentiles[1].observed ==
        doctest::Approx(bands[0].percentiles[1].observed).epsilon(1e-15));
}

#ifndef JMDIAG_TEST_DATA_DIR
#define JMDIAG_TEST_DATA_DIR "."
#endif

TEST_CASE("wormplot SVG matches the reviewed golden fixture") {
  std::vector<TteResidual> residuals;
  const double times[5] = {60.0, 120.0, 200.0, 300.0, 365.0};
  const double pds[5] = {0.18, 0.34, 0.52, 0.71, 0.93};
  for (int i = 0; i < 5; ++i) {
    TteResidual r;
    r.id = "s" + std::to_string(i);
    r.event = {times[i], i == 4 ? EventIndicator::kRightCensored : EventIndicator::kObserved};
    r.pd = pds[i];
    r.npd = norm_quantile(pds[i]);
    r.imputed = i == 4;
    residuals.push_back(r);
  }
  const std::string rendered = render_wormplot_svg(detrended_pd_wormplot(residuals));
  std::ifstream golden(std::string(JMDIAG_TEST_DATA_DIR) + "/wormplot_golden.svg",
                       std::ios::binary);
  REQUIRE(golden.good());
  std::ostringstream buffer;
  buffer << golden.rdbuf();
  CHECK(rendered == buffer.str());
}

TEST_CASE("km-vpc: observed curves stay inside the 90% band about 90% of the time under H0") {
  const JointModelSpec spec = JointModelSpec::base_model();
  const StudyDesign design = StudyDesign::balanced(40);
  long inside = 0, total = 0;
  for (int study = 0; study < 100; ++study) {
    const auto data = simulate_dataset(spec, design, 7000 + study);
    const auto reps = simulate_replicates(data, spec, 150, 8000 + study, 2);
    const KmVpc vpc = km_vpc(data, reps);
    for (const auto& band : vpc.bands) {
      inside += (band.observed >= band.p5 && band.observed <= band.p95);
      ++total;
    }
  }
  const double coverage = static_cast<double>(inside) / total;
  // 90% nominal with finite-K band noise; the spec allows +-3% at study scale
  CHECK(coverage >= 0.87);
}
