#pragma once

#include <array>
#include <span>
#include <string>
#include <vector>

#include "jmdiag/residuals.hpp"
#include "jmdiag/simulate.hpp"

namespace jmdiag {

// One theoretical percentile of a binned npd cloud: the observed order
// statistic and the 90% prediction interval of its null distribution.
struct PercentileEntry {
  double level = 0.0;  // 0.05, 0.50, 0.95
  double observed = 0.0;
  double lower = 0.0;
  double upper = 0.0;
};

struct PercentileBand {
  double bin_center = 0.0;
  int count = 0;
  int merged_bins = 1;  // > 1 when undersized bins were folded in
  std::array<PercentileEntry, 3> percentiles;
};

// De-trended TTE prediction discrepancy: sorted pd minus its exact
// order-statistic median, with the de-trended Clopper-Pearson 90% interval.
struct WormPoint {
  double time = 0.0;
  double detrended_pd = 0.0;
  double lower = 0.0;
  double upper = 0.0;
  int rank = 0;
  int n = 0;
  bool censored = false;
};

struct KmCurve {
  std::vector<double> times;  // distinct event times
  std::vector<double> survival;
  std::vector<int> at_risk;
  std::vector<int> events;

  double survival_at(double t) const;
};

struct KmVpcBand {
  double time = 0.0;
  double observed = 0.0;
  double p5 = 0.0;
  double p50 = 0.0;
  double p95 = 0.0;
};

struct KmVpc {
  std::vector<KmVpcBand> bands;
};

std::vector<WormPoint> detrended_pd_wormplot(const std::vector<TteResidual>& residuals);

std::vector<PercentileBand> npd_percentile_bands(const std::vector<LongitudinalResidual>& residuals,
                                                 int n_bins = 9);

KmCurve km_estimator(std::span<const EventRecord> records);

KmVpc km_vpc(const std::vector<SubjectData>& observed, const ReplicateSet& replicates,
             int max_bins = 50);

// Deterministic, byte-stable SVG rendering.
std::string render_wormplot_svg(const std::vector<WormPoint>& points);
std::string render_percentile_bands_svg(const std::vector<PercentileBand>& bands);
std::string render_km_vpc_svg(const KmVpc& vpc);

void write_wormplot_csv(const std::vector<WormPoint>& points, const std::string& path);
void write_percentile_bands_csv(const std::vector<PercentileBand>& bands, const std::string& path);
void write_km_vpc_csv(const KmVpc& vpc, const std::string& path);

std::vector<WormPoint> wormplot_from_csv(const std::string& path);
std::vector<PercentileBand> percentile_bands_from_csv(const std::string& path);

}  // namespace jmdiag
