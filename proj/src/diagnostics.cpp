#include "jmdiag/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "jmdiag/math.hpp"

namespace jmdiag {

namespace {

// Order-statistic rank for the p-th percentile of a sample of size m.
int percentile_rank(double level, int m) {
  const int r = static_cast<int>(std::ceil(level * m));
  return std::clamp(r, 1, m);
}

constexpr double kLevels[3] = {0.05, 0.50, 0.95};

}  // namespace

std::vector<WormPoint> detrended_pd_wormplot(const std::vector<TteResidual>& residuals) {
  const int n = static_cast<int>(residuals.size());
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (residuals[a].pd != residuals[b].pd) return residuals[a].pd < residuals[b].pd;
    return residuals[a].id < residuals[b].id;
  });

  std::vector<WormPoint> points;
  points.reserve(n);
  for (int i = 1; i <= n; ++i) {
    const TteResidual& r = residuals[order[i - 1]];
    const double a = i;
    const double b = n - i + 1;
    const double median = beta_quantile(0.5, a, b);
    WormPoint point;
    point.time = r.event.time;
    point.rank = i;
    point.n = n;
    point.censored = r.event.censored();
    point.detrended_pd = r.pd - median;
    point.lower = beta_quantile(0.05, a, b) - median;
    point.upper = beta_quantile(0.95, a, b) - median;
    points.push_back(point);
  }
  return points;
}

std::vector<PercentileBand> npd_percentile_bands(const std::vector<LongitudinalResidual>& residuals,
                                                 int n_bins) {
  if (n_bins < 1) throw std::invalid_argument("npd_percentile_bands: n_bins must be >= 1");
  struct Item {
    double time;
    double npd;
  };
  std::vector<Item> items;
  items.reserve(residuals.size());
  for (const auto& r : residuals)
    if (!r.excluded) items.push_back({r.time, r.npd});
  if (items.empty()) return {};
  std::sort(items.begin(), items.end(), [](const Item& a, const Item& b) {
    if (a.time != b.time) return a.time < b.time;
    return a.npd < b.npd;
  });

  // Bin boundaries: one bin per distinct time when there are few distinct
  // times (balanced designs), otherwise equal-count groups that never split
  // tied times.
  std::vector<std::pair<std::size_t, std::size_t>> bins;  // [begin, end)
  std::vector<double> distinct_times;
  for (const auto& item : items)
    if (distinct_times.empty() || item.time != distinct_times.back())
      distinct_times.push_back(item.time);

  if (static_cast<int>(distinct_times.size()) <= n_bins) {
    std::size_t begin = 0;
    for (std::size_t i = 1; i <= items.size(); ++i) {
      if (i == items.size() || items[i].time != items[begin].time) {
        bins.emplace_back(begin, i);
        begin = i;
      }
    }
  } else {
    const double per_bin = static_cast<double>(items.size()) / n_bins;
    std::size_t begin = 0;
    for (int b = 0; b < n_bins && begin < items.size(); ++b) {
      std::size_t end = (b == n_bins - 1)
                            ? items.size()
                            : std::min(items.size(),
                                       static_cast<std::size_t>(std::llround(per_bin * (b + 1))));
      if (end <= begin) end = begin + 1;
      // Keep tied times in one bin.
      while (end < items.size() && items[end].time == items[end - 1].time) ++end;
      bins.emplace_back(begin, end);
      begin = end;
    }
  }

  // Merge undersized bins (< 5 points) into a neighbour, recorded.
  struct RawBin {
    std::size_t begin, end;
    int merged;
  };
  std::vector<RawBin> merged;
  for (const auto& [begin, end] : bins) merged.push_back({begin, end, 1});
  for (std::size_t i = 0; i < merged.size();) {
    if (merged[i].end - merged[i].begin < 5 && merged.size() > 1) {
      if (i + 1 < merged.size()) {
        merged[i + 1].begin = merged[i].begin;
        merged[i + 1].merged += merged[i].merged;
        merged.erase(merged.begin() + static_cast<std::ptrdiff_t>(i));
      } else {
        merged[i - 1].end = merged[i].end;
        merged[i - 1].merged += merged[i].merged;
        merged.erase(merged.begin() + static_cast<std::ptrdiff_t>(i));
      }
    } else {
      ++i;
    }
  }

  std::vector<PercentileBand> result;
  result.reserve(merged.size());
  for (const auto& bin : merged) {
    const int m = static_cast<int>(bin.end - bin.begin);
    std::vector<double> npd;
    npd.reserve(m);
    double time_sum = 0.0;
    for (std::size_t i = bin.begin; i < bin.end; ++i) {
      npd.push_back(items[i].npd);
      time_sum += items[i].time;
    }
    std::sort(npd.begin(), npd.end());

    PercentileBand band;
    band.bin_center = time_sum / m;
    band.count = m;
    band.merged_bins = bin.merged;
    for (int level = 0; level < 3; ++level) {
      const int r = percentile_rank(kLevels[level], m);
      PercentileEntry entry;
      entry.level = kLevels[level];
      entry.observed = npd[r - 1];
      entry.lower = norm_quantile(beta_quantile(0.05, r, m - r + 1));
      entry.upper = norm_quantile(beta_quantile(0.95, r, m - r + 1));
      band.percentiles[level] = entry;
    }
    result.push_back(band);
  }
  return result;
}

double KmCurve::survival_at(double t) const {
  double value = 1.0;
  for (std::size_t i = 0; i < times.size(); ++i) {
    if (times[i] <= t) {
      value = survival[i];
    } else {
      break;
    }
  }
  return value;
}

KmCurve km_estimator(std::span<const EventRecord> records) {
  if (records.empty()) throw std::invalid_argument("km_estimator: no event records");
  std::vector<const EventRecord*> sorted;
  sorted.reserve(records.size());
  for (const auto& r : records) sorted.push_back(&r);
  std::sort(sorted.begin(), sorted.end(),
            [](const EventRecord* a, const EventRecord* b) { return a->time < b->time; });

  KmCurve curve;
  double survival = 1.0;
  int at_risk = static_cast<int>(records.size());
  std::size_t i = 0;
  while (i < sorted.size()) {
    const double t = sorted[i]->time;
    int events = 0;
    int leaving = 0;
    while (i < sorted.size() && sorted[i]->time == t) {
      if (!sorted[i]->censored()) ++events;
      ++leaving;
      ++i;
    }
    if (events > 0) {
      survival *= 1.0 - static_cast<double>(events) / at_risk;
      curve.times.push_back(t);
      curve.survival.push_back(survival);
      curve.at_risk.push_back(at_risk);
      curve.events.push_back(events);
    }
    at_risk -= leaving;
  }
  return curve;
}

KmVpc km_vpc(const std::vector<SubjectData>& observed, const ReplicateSet& replicates,
             int max_bins) {
  if (observed.empty()) throw std::invalid_argument("km_vpc: empty dataset");
  if (replicates.by_subject.size() != observed.size())
    throw std::invalid_argument("km_vpc: replicate set does not match the dataset");
  const int k = replicates.k;
  if (k < 1) throw std::invalid_argument("km_vpc: empty replicate set");

  std::vector<EventRecord> observed_records;
  observed_records.reserve(observed.size());
  for (const auto& s : observed) observed_records.push_back(s.event);
  const KmCurve observed_km = km_estimator(observed_records);

  // Bin times: distinct observed event times, downsampled evenly.
  std::vector<double> bin_times;
  for (const auto& s : observed)
    if (!s.event.censored()) bin_times.push_back(s.event.time);
  std::sort(bin_times.begin(), bin_times.end());
  bin_times.erase(std::unique(bin_times.begin(), bin_times.end()), bin_times.end());
  if (bin_times.empty()) bin_times.push_back(observed.front().event.time);
  if (static_cast<int>(bin_times.size()) > max_bins) {
    std::vector<double> sampled;
    sampled.reserve(max_bins);
    const double step = static_cast<double>(bin_times.size() - 1) / (max_bins - 1);
    for (int i = 0; i < max_bins; ++i)
      sampled.push_back(bin_times[static_cast<std::size_t>(std::llround(i * step))]);
    sampled.erase(std::unique(sampled.begin(), sampled.end()), sampled.end());
    bin_times = std::move(sampled);
  }

  // Kaplan-Meier of every replicated study, evaluated on the bin grid.
  std::vector<std::vector<double>> replicate_values(bin_times.size(),
                                                    std::vector<double>(k, 1.0));
  std::vector<EventRecord> records(observed.size());
  for (int rep = 0; rep < k; ++rep) {
    for (std::size_t s = 0; s < observed.size(); ++s)
      records[s] = replicates.by_subject[s][rep].record;
    const KmCurve km = km_estimator(records);
    for (std::size_t b = 0; b < bin_times.size(); ++b)
      replicate_values[b][rep] = km.survival_at(bin_times[b]);
  }

  KmVpc vpc;
  vpc.bands.reserve(bin_times.size());
  for (std::size_t b = 0; b < bin_times.size(); ++b) {
    std::vector<double>& values = replicate_values[b];
    std::sort(values.begin(), values.end());
    KmVpcBand band;
    band.time = bin_times[b];
    band.observed = observed_km.survival_at(bin_times[b]);
    band.p5 = values[percentile_rank(0.05, k) - 1];
    band.p50 = values[percentile_rank(0.50, k) - 1];
    band.p95 = values[percentile_rank(0.95, k) - 1];
    vpc.bands.push_back(band);
  }
  return vpc;
}

namespace {

std::string format_csv(double v) {
  if (std::isnan(v)) return "";
  char buffer[40];
  std::snprintf(buffer, sizeof(buffer), "%.17g", v);
  return buffer;
}

}  // namespace

void write_wormplot_csv(const std::vector<WormPoint>& points, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::invalid_argument("cannot write '" + path + "'");
  out << "time,rank,n,detrended_pd,lower,upper,censored\n";
  for (const auto& p : points)
    out << format_csv(p.time) << ',' << p.rank << ',' << p.n << ',' << format_csv(p.detrended_pd)
        << ',' << format_csv(p.lower) << ',' << format_csv(p.upper) << ',' << (p.censored ? 1 : 0)
        << '\n';
}

void write_percentile_bands_csv(const std::vector<PercentileBand>& bands,
                                const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::invalid_argument("cannot write '" + path + "'");
  out << "bin_center,count,merged_bins,level,observed,lower,upper\n";
  for (const auto& band : bands)
    for (const auto& entry : band.percentiles)
      out << format_csv(band.bin_center) << ',' << band.count << ',' << band.merged_bins << ','
          << format_csv(entry.level) << ',' << format_csv(entry.observed) << ','
          << format_csv(entry.lower) << ',' << format_csv(entry.upper) << '\n';
}

void write_km_vpc_csv(const KmVpc& vpc, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::invalid_argument("cannot write '" + path + "'");
  out << "time,observed,p5,p50,p95\n";
  for (const auto& band : vpc.bands)
    out << format_csv(band.time) << ',' << format_csv(band.observed) << ',' << format_csv(band.p5)
        << ',' << format_csv(band.p50) << ',' << format_csv(band.p95) << '\n';
}

namespace {

std::vector<std::vector<std::string>> read_csv_rows(const std::string& path,
                                                    const std::string& header) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line) || line != header)
    throw std::invalid_argument(path + ": unexpected header, wanted '" + header + "'");
  std::vector<std::vector<std::string>> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::string field;
    std::istringstream stream(line);
    while (std::getline(stream, field, ',')) fields.push_back(field);
    rows.push_back(std::move(fields));
  }
  return rows;
}

}  // namespace

std::vector<WormPoint> wormplot_from_csv(const std::string& path) {
  std::vector<WormPoint> points;
  for (const auto& f : read_csv_rows(path, "time,rank,n,detrended_pd,lower,upper,censored")) {
    if (f.size() != 7) throw std::invalid_argument(path + ": expected 7 fields");
    WormPoint p;
    p.time = std::stod(f[0]);
    p.rank = std::stoi(f[1]);
    p.n = std::stoi(f[2]);
    p.detrended_pd = std::stod(f[3]);
    p.lower = std::stod(f[4]);
    p.upper = std::stod(f[5]);
    p.censored = f[6] == "1";
    points.push_back(p);
  }
  return points;
}

std::vector<PercentileBand> percentile_bands_from_csv(const std::string& path) {
  std::vector<PercentileBand> bands;
  for (const auto& f :
       read_csv_rows(path, "bin_center,count,merged_bins,level,observed,lower,upper")) {
    if (f.size() != 7) throw std::invalid_argument(path + ": expected 7 fields");
    const double center = std::stod(f[0]);
    if (bands.empty() || bands.back().bin_center != center) {
      PercentileBand band;
      band.bin_center = center;
      band.count = std::stoi(f[1]);
      band.merged_bins = std::stoi(f[2]);
      bands.push_back(band);
    }
    PercentileEntry entry;
    entry.level = std::stod(f[3]);
    entry.observed = std::stod(f[4]);
    entry.lower = std::stod(f[5]);
    entry.upper = std::stod(f[6]);
    for (auto& slot : bands.back().percentiles) {
      if (slot.level == 0.0 && entry.level != 0.0) {
        slot = entry;
        break;
      }
      if (slot.level == entry.level) {
        slot = entry;
        break;
      }
    }
  }
  return bands;
}

}  // namespace jmdiag
