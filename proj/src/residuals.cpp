#include "jmdiag/residuals.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "jmdiag/math.hpp"
#include "jmdiag/parallel.hpp"
#include "jmdiag/quadrature.hpp"

namespace jmdiag {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

}  // namespace

ClampResult clamp_and_normalise(double p, int k) {
  if (k < 1) throw std::invalid_argument("clamp_and_normalise: k must be >= 1");
  if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("clamp_and_normalise: p must be in [0,1]");
  const double lo = 0.5 / k;
  const double hi = 1.0 - 0.5 / k;
  ClampResult result;
  result.p = std::clamp(p, lo, hi);
  result.clamped = result.p != p;
  result.normal_score = norm_quantile(result.p);
  return result;
}

TteResidual compute_pd_tte(const std::string& id, const EventRecord& observed,
                           std::span<const double> replicate_event_times,
                           RngStream& imputation_stream) {
  const int k = static_cast<int>(replicate_event_times.size());
  if (k == 0) throw std::invalid_argument("compute_pd_tte: no replicate event times");

  TteResidual residual;
  residual.id = id;
  residual.event = observed;
  residual.imputation_lower_bound = kNaN;

  int below = 0;
  for (const double t : replicate_event_times)
    if (t < observed.time) ++below;
  const double empirical_cdf = static_cast<double>(below) / k;

  double pd_raw;
  if (observed.censored()) {
    residual.imputed = true;
    residual.imputation_lower_bound = empirical_cdf;
    pd_raw = imputation_stream.uniform(empirical_cdf, 1.0);
  } else {
    pd_raw = empirical_cdf;
  }
  const ClampResult clamped = clamp_and_normalise(pd_raw, k);
  residual.pd = clamped.p;
  residual.npd = clamped.normal_score;
  residual.clamped = clamped.clamped;
  return residual;
}

std::vector<double> compute_pd_longitudinal(std::span<const double> observed,
                                            const Eigen::MatrixXd& simulated,
                                            std::span<const double> replicate_event_times,
                                            std::span<const double> observation_times,
                                            std::vector<int>* survivor_counts) {
  const auto n = observed.size();
  const auto k = static_cast<std::size_t>(simulated.rows());
  if (static_cast<std::size_t>(simulated.cols()) != n)
    throw std::invalid_argument("compute_pd_longitudinal: simulated grid width mismatch");
  if (replicate_event_times.size() != k)
    throw std::invalid_argument("compute_pd_longitudinal: event time count mismatch");
  if (observation_times.size() != n)
    throw std::invalid_argument("compute_pd_longitudinal: time vector mismatch");

  std::vector<double> pd(n, kNaN);
  if (survivor_counts) survivor_counts->assign(n, 0);
  for (std::size_t j = 0; j < n; ++j) {
    int survivors = 0;
    int below = 0;
    for (std::size_t rep = 0; rep < k; ++rep) {
      if (replicate_event_times[rep] > observation_times[j]) {
        ++survivors;
        if (simulated(static_cast<Eigen::Index>(rep), static_cast<Eigen::Index>(j)) < observed[j])
          ++below;
      }
    }
    if (survivor_counts) (*survivor_counts)[j] = survivors;
    if (survivors > 0) pd[j] = static_cast<double>(below) / survivors;
  }
  return pd;
}

DecorrelationResult decorrelate(const Eigen::VectorXd& observed, const Eigen::MatrixXd& simulated,
                                const std::string& subject_id) {
  const Eigen::Index n = observed.size();
  const Eigen::Index k = simulated.rows();
  if (simulated.cols() != n) throw std::invalid_argument("decorrelate: dimension mismatch");
  if (n < 1) throw std::invalid_argument("decorrelate: need at least one observation");
  if (k < 2) throw std::invalid_argument("decorrelate: need at least two replicates");

  DecorrelationResult result;
  result.moments.mean = simulated.colwise().mean();
  const Eigen::MatrixXd centered = simulated.rowwise() - result.moments.mean.transpose();
  result.moments.covariance = (centered.adjoint() * centered) / static_cast<double>(k - 1);

  Eigen::MatrixXd cov = result.moments.covariance;
  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  if (llt.info() != Eigen::Success) {
    // One ridge attempt before giving up.
    const double ridge = 1e-8 * cov.trace() / static_cast<double>(n);
    cov.diagonal().array() += ridge;
    llt.compute(cov);
    result.moments.ridged = true;
    if (llt.info() != Eigen::Success)
      throw numerical_error("decorrelate: covariance not positive definite for subject '" +
                            subject_id + "'");
  }
  const Eigen::MatrixXd lower = llt.matrixL();
  result.moments.whitener =
      lower.triangularView<Eigen::Lower>().solve(Eigen::MatrixXd::Identity(n, n));

  result.observed_star = result.moments.whitener * (observed - result.moments.mean);
  result.simulated_star = centered * result.moments.whitener.transpose();
  return result;
}

std::vector<double> ResidualTable::npde_longitudinal() const {
  std::vector<double> values;
  values.reserve(longitudinal.size());
  for (const auto& r : longitudinal)
    if (!r.excluded) values.push_back(r.npde);
  return values;
}

std::vector<double> ResidualTable::npd_longitudinal() const {
  std::vector<double> values;
  values.reserve(longitudinal.size());
  for (const auto& r : longitudinal)
    if (!r.excluded) values.push_back(r.npd);
  return values;
}

std::vector<double> ResidualTable::npd_tte() const {
  std::vector<double> values;
  values.reserve(tte.size());
  for (const auto& r : tte) values.push_back(r.npd);
  return values;
}

std::vector<double> ResidualTable::pd_tte() const {
  std::vector<double> values;
  values.reserve(tte.size());
  for (const auto& r : tte) values.push_back(r.pd);
  return values;
}

namespace {

// Strictly increasing on all of R; equals log1p on the positive half-axis
// (markers are positive, but additive-error replicates may dip below zero).
double signed_log1p(double v) { return v >= 0.0 ? std::log1p(v) : -std::log1p(-v); }

}  // namespace

ResidualTable compute_residuals(const std::vector<SubjectData>& observed,
                                const ReplicateSet& replicates, std::uint64_t imputation_seed,
                                int n_threads, DecorrelationScale scale) {
  if (replicates.by_subject.size() != observed.size())
    throw std::invalid_argument("compute_residuals: replicate set does not match the dataset");
  const int k = replicates.k;
  if (k < 1) throw std::invalid_argument("compute_residuals: empty replicate set");
  const int low_support_threshold = static_cast<int>(std::ceil(0.05 * k));

  std::vector<std::vector<LongitudinalResidual>> longitudinal(observed.size());
  std::vector<TteResidual> tte(observed.size());

  parallel_for(observed.size(), n_threads, [&](std::size_t s) {
    const SubjectData& subject = observed[s];
    const auto& subject_replicates = replicates.by_subject[s];
    const std::size_t n = subject.observations.size();

    std::vector<double> event_times(subject_replicates.size());
    for (std::size_t rep = 0; rep < subject_replicates.size(); ++rep)
      event_times[rep] = subject_replicates[rep].uncensored_time;

    RngStream imputation_stream(imputation_seed, s, 0, StreamPurpose::kImputation);
    tte[s] = compute_pd_tte(subject.id, subject.event, event_times, imputation_stream);

    if (n == 0) return;
    Eigen::VectorXd y(n);
    std::vector<double> times(n);
    for (std::size_t j = 0; j < n; ++j) {
      y[static_cast<Eigen::Index>(j)] = subject.observations[j].value;
      times[j] = subject.observations[j].time;
    }
    Eigen::MatrixXd sims(subject_replicates.size(), n);
    for (std::size_t rep = 0; rep < subject_replicates.size(); ++rep)
      for (std::size_t j = 0; j < n; ++j)
        sims(static_cast<Eigen::Index>(rep), static_cast<Eigen::Index>(j)) =
            subject_replicates[rep].values[j];

    std::vector<int> survivors;
    const std::vector<double> pd =
        compute_pd_longitudinal(std::span<const double>(y.data(), n), sims, event_times, times,
                                &survivors);

    Eigen::VectorXd y_scaled = y;
    Eigen::MatrixXd sims_scaled = sims;
    if (scale == DecorrelationScale::kSignedLog1p) {
      y_scaled = y.unaryExpr([](double v) { return signed_log1p(v); });
      sims_scaled = sims.unaryExpr([](double v) { return signed_log1p(v); });
    }
    const DecorrelationResult dec = decorrelate(y_scaled, sims_scaled, subject.id);
    const std::vector<double> pde =
        compute_pde(dec.observed_star, dec.simulated_star, event_times, times, nullptr);

    auto& rows = longitudinal[s];
    rows.resize(n);
    for (std::size_t j = 0; j < n; ++j) {
      LongitudinalResidual& row = rows[j];
      row.id = subject.id;
      row.time = times[j];
      row.survivor_count = survivors[j];
      if (survivors[j] == 0) {
        row.excluded = true;
        row.pd = row.npd = row.pde = row.npde = kNaN;
        continue;
      }
      row.low_support = survivors[j] < low_support_threshold;
      const ClampResult cpd = clamp_and_normalise(pd[j], k);
      const ClampResult cpde = clamp_and_normalise(pde[j], k);
      row.pd = cpd.p;
      row.npd = cpd.normal_score;
      row.pde = cpde.p;
      row.npde = cpde.normal_score;
      row.clamped = cpd.clamped || cpde.clamped;
    }
  });

  ResidualTable table;
  table.tte = std::move(tte);
  for (auto& rows : longitudinal)
    table.longitudinal.insert(table.longitudinal.end(), rows.begin(), rows.end());
  return table;
}

namespace {

std::string format_field(double v) {
  if (std::isnan(v)) return "";
  char buffer[40];
  std::snprintf(buffer, sizeof(buffer), "%.17g", v);
  return buffer;
}

std::string flags_field(const LongitudinalResidual& r) {
  std::string flags;
  auto add = [&flags](const char* token) {
    if (!flags.empty()) flags += ';';
    flags += token;
  };
  if (r.clamped) add("clamped");
  if (r.low_support) add("low_support");
  if (r.excluded) add("excluded");
  return flags;
}

std::string flags_field(const TteResidual& r) {
  std::string flags;
  auto add = [&flags](const char* token) {
    if (!flags.empty()) flags += ';';
    flags += token;
  };
  if (r.imputed) add("imputed");
  if (r.clamped) add("clamped");
  return flags;
}

}  // namespace

void write_residuals_csv(const ResidualTable& table, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::invalid_argument("cannot write '" + path + "'");
  out << "id,time,type,pd,npd,pde,npde,survivor_count,flags\n";
  for (const auto& r : table.longitudinal) {
    out << r.id << ',' << format_field(r.time) << ",long," << format_field(r.pd) << ','
        << format_field(r.npd) << ',' << format_field(r.pde) << ',' << format_field(r.npde) << ','
        << r.survivor_count << ',' << flags_field(r) << '\n';
  }
  for (const auto& r : table.tte) {
    out << r.id << ',' << format_field(r.event.time) << ",tte," << format_field(r.pd) << ','
        << format_field(r.npd) << ",,,," << flags_field(r) << '\n';
  }
}

ResidualTable read_residuals_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line) || line != "id,time,type,pd,npd,pde,npde,survivor_count,flags")
    throw std::invalid_argument(path + ": unexpected residual table header");

  ResidualTable table;
  int line_number = 1;
  while (std::getline(in, line)) {
    ++line_number;
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::string field;
    std::istringstream stream(line);
    while (std::getline(stream, field, ',')) fields.push_back(field);
    while (fields.size() < 9) fields.push_back("");
    auto parse = [&](const std::string& text) {
      return text.empty() ? kNaN : std::stod(text);
    };
    const auto has_flag = [&fields](const char* token) {
      return fields[8].find(token) != std::string::npos;
    };
    try {
      if (fields[2] == "long") {
        LongitudinalResidual r;
        r.id = fields[0];
        r.time = parse(fields[1]);
        r.pd = parse(fields[3]);
        r.npd = parse(fields[4]);
        r.pde = parse(fields[5]);
        r.npde = parse(fields[6]);
        r.survivor_count = fields[7].empty() ? 0 : std::stoi(fields[7]);
        r.clamped = has_flag("clamped");
        r.low_support = has_flag("low_support");
        r.excluded = has_flag("excluded");
        table.longitudinal.push_back(std::move(r));
      } else if (fields[2] == "tte") {
        TteResidual r;
        r.id = fields[0];
        r.event.time = parse(fields[1]);
        r.pd = parse(fields[3]);
        r.npd = parse(fields[4]);
        r.imputed = has_flag("imputed");
        r.event.indicator =
            r.imputed ? EventIndicator::kRightCensored : EventIndicator::kObserved;
        r.clamped = has_flag("clamped");
        r.imputation_lower_bound = kNaN;
        table.tte.push_back(std::move(r));
      } else {
        throw std::invalid_argument("type must be 'long' or 'tte'");
      }
    } catch (const std::exception& e) {
      throw std::invalid_argument(path + ":" + std::to_string(line_number) + ": " + e.what());
    }
  }
  return table;
}

}  // namespace jmdiag
