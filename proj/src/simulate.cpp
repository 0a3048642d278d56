#include "jmdiag/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <stdexcept>

#include "jmdiag/parallel.hpp"
#include "jmdiag/roots.hpp"

namespace jmdiag {

void StudyDesign::validate() const {
  if (n_subjects < 1) throw std::invalid_argument("design.n_subjects: must be >= 1");
  if (planned_times.empty()) throw std::invalid_argument("design.planned_times: must be nonempty");
  if (!(study_end > 0.0)) throw std::invalid_argument("design.study_end: must be > 0");
  for (std::size_t i = 0; i < planned_times.size(); ++i) {
    if (planned_times[i] < 0.0 || planned_times[i] > study_end)
      throw std::invalid_argument("design.planned_times: times must lie in [0, study_end]");
    if (i > 0 && planned_times[i] <= planned_times[i - 1])
      throw std::invalid_argument("design.planned_times: times must be strictly increasing");
  }
}

StudyDesign StudyDesign::balanced(int n_subjects, int n_times, double study_end) {
  StudyDesign design;
  design.n_subjects = n_subjects;
  design.study_end = study_end;
  design.planned_times.reserve(n_times);
  for (int i = 0; i < n_times; ++i)
    design.planned_times.push_back(study_end * i / (n_times - 1.0));
  return design;
}

IndividualParameters draw_individual_parameters(const JointModelSpec& spec, RngStream& stream) {
  // Fixed draw order: r, PSA0, epsilon, T_esc, one normal each.
  double values[4];
  const char* names[4] = {"r", "PSA0", "epsilon", "T_esc"};
  for (int i = 0; i < 4; ++i) {
    const ParameterSpec& p = spec.psa_parameter(names[i]);
    const double eta = p.omega * stream.normal();
    values[i] = transform_parameter(p.fixed_effect, eta, p.transform);
  }
  return IndividualParameters{values[0], values[1], values[2], values[3]};
}

EventSample simulate_event_time(const IndividualParameters& psi, const JointModelSpec& spec,
                                RngStream& stream) {
  const double u = stream.uniform01();
  const double target = -std::log(u);
  HazardContext ctx(psi, spec);

  double hi = spec.study_end;
  double hi_value = ctx.cumulative_hazard(hi) - target;
  double lo = 0.0;
  double lo_value = -target;
  int doublings = 0;
  while (hi_value < 0.0 && doublings < 64) {
    lo = hi;
    lo_value = hi_value;
    hi *= 2.0;
    hi_value = ctx.cumulative_hazard(hi) - target;
    ++doublings;
  }
  EventSample sample;
  if (hi_value < 0.0) {
    // Cumulative hazard plateaus below the target: the event lies beyond any
    // practical horizon. Report it as censored with an infinite raw time.
    sample.uncensored_time = std::numeric_limits<double>::infinity();
    sample.record = {spec.study_end, EventIndicator::kRightCensored};
    return sample;
  }
  const RootResult root =
      find_root_brent([&](double t) { return ctx.cumulative_hazard(t) - target; }, lo, hi,
                      lo_value, hi_value, 1e-9 * hi, 200);
  sample.uncensored_time = root.root;
  if (root.root > spec.study_end) {
    sample.record = {spec.study_end, EventIndicator::kRightCensored};
  } else {
    sample.record = {root.root, EventIndicator::kObserved};
  }
  return sample;
}

std::vector<double> simulate_longitudinal(const IndividualParameters& psi,
                                          const JointModelSpec& spec,
                                          std::span<const double> times, RngStream& stream) {
  const PsaCurve curve(psi, spec.constants);
  std::vector<double> values;
  values.reserve(times.size());
  for (const double t : times) {
    const double prediction = curve.value(t);
    values.push_back(prediction + spec.error_model.sd(prediction) * stream.normal());
  }
  return values;
}

namespace {

std::string subject_id(std::size_t index) {
  char buffer[16];
  std::snprintf(buffer, sizeof(buffer), "S%04zu", index + 1);
  return buffer;
}

}  // namespace

std::vector<SubjectData> simulate_dataset(const JointModelSpec& spec, const StudyDesign& design,
                                          std::uint64_t master_seed) {
  spec.validate();
  design.validate();
  std::vector<SubjectData> subjects(design.n_subjects);
  for (std::size_t s = 0; s < subjects.size(); ++s) {
    RngStream parameter_stream(master_seed, s, 0, StreamPurpose::kParameters);
    const IndividualParameters psi = draw_individual_parameters(spec, parameter_stream);
    RngStream event_stream(master_seed, s, 0, StreamPurpose::kEventTime);
    const EventSample event = simulate_event_time(psi, spec, event_stream);
    RngStream error_stream(master_seed, s, 0, StreamPurpose::kResidualError);
    const std::vector<double> values =
        simulate_longitudinal(psi, spec, design.planned_times, error_stream);

    SubjectData& subject = subjects[s];
    subject.id = subject_id(s);
    subject.event = event.record;
    for (std::size_t j = 0; j < design.planned_times.size(); ++j) {
      if (design.planned_times[j] <= event.record.time)
        subject.observations.push_back({design.planned_times[j], values[j]});
    }
  }
  return subjects;
}

ReplicateSet simulate_replicates(const std::vector<SubjectData>& observed,
                                 const JointModelSpec& tested, int k, std::uint64_t master_seed,
                                 int n_threads) {
  if (k < 1) throw std::invalid_argument("simulate_replicates: k must be >= 1");
  tested.validate();
  ReplicateSet set;
  set.k = k;
  set.by_subject.resize(observed.size());
  parallel_for(observed.size(), n_threads, [&](std::size_t s) {
    const SubjectData& subject = observed[s];
    std::vector<double> times;
    times.reserve(subject.observations.size());
    for (const auto& obs : subject.observations) times.push_back(obs.time);

    auto& replicates = set.by_subject[s];
    replicates.resize(k);
    for (int rep = 0; rep < k; ++rep) {
      RngStream parameter_stream(master_seed, s, rep, StreamPurpose::kParameters);
      const IndividualParameters psi = draw_individual_parameters(tested, parameter_stream);
      RngStream event_stream(master_seed, s, rep, StreamPurpose::kEventTime);
      const EventSample event = simulate_event_time(psi, tested, event_stream);
      RngStream error_stream(master_seed, s, rep, StreamPurpose::kResidualError);
      Replicate& replicate = replicates[rep];
      replicate.values = simulate_longitudinal(psi, tested, times, error_stream);
      replicate.uncensored_time = event.uncensored_time;
      replicate.record = event.record;
    }
  });
  return set;
}

namespace {

std::string format_number(double v) {
  char buffer[40];
  std::snprintf(buffer, sizeof(buffer), "%.17g", v);
  return buffer;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream stream(line);
  while (std::getline(stream, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.push_back("");
  return fields;
}

}  // namespace

void write_dataset_csv(const std::vector<SubjectData>& subjects, const std::string& long_path,
                       const std::string& events_path) {
  std::ofstream longitudinal(long_path);
  if (!longitudinal) throw std::invalid_argument("cannot write '" + long_path + "'");
  longitudinal << "id,time,value\n";
  for (const auto& subject : subjects)
    for (const auto& obs : subject.observations)
      longitudinal << subject.id << ',' << format_number(obs.time) << ','
                   << format_number(obs.value) << '\n';

  std::ofstream events(events_path);
  if (!events) throw std::invalid_argument("cannot write '" + events_path + "'");
  events << "id,time,event\n";
  for (const auto& subject : subjects)
    events << subject.id << ',' << format_number(subject.event.time) << ','
           << (subject.event.censored() ? 0 : 1) << '\n';
}

std::vector<SubjectData> read_dataset_csv(const std::string& long_path,
                                          const std::string& events_path) {
  std::ifstream longitudinal(long_path);
  if (!longitudinal) throw std::invalid_argument("cannot open '" + long_path + "'");
  std::string line;
  if (!std::getline(longitudinal, line) || split_csv_line(line) != std::vector<std::string>{
                                               "id", "time", "value"})
    throw std::invalid_argument(long_path + ": expected header 'id,time,value'");

  std::vector<SubjectData> subjects;
  std::map<std::string, std::size_t> index_of;
  int line_number = 1;
  while (std::getline(longitudinal, line)) {
    ++line_number;
    if (line.empty()) continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != 3)
      throw std::invalid_argument(long_path + ":" + std::to_string(line_number) +
                                  ": expected 3 fields");
    const std::string& id = fields[0];
    auto [it, inserted] = index_of.try_emplace(id, subjects.size());
    if (inserted) {
      subjects.push_back(SubjectData{id, {}, {}});
    }
    try {
      subjects[it->second].observations.push_back({std::stod(fields[1]), std::stod(fields[2])});
    } catch (const std::exception&) {
      throw std::invalid_argument(long_path + ":" + std::to_string(line_number) +
                                  ": non-numeric time or value");
    }
  }

  std::ifstream events(events_path);
  if (!events) throw std::invalid_argument("cannot open '" + events_path + "'");
  if (!std::getline(events, line) ||
      split_csv_line(line) != std::vector<std::string>{"id", "time", "event"})
    throw std::invalid_argument(events_path + ": expected header 'id,time,event'");
  std::map<std::string, bool> seen_event;
  line_number = 1;
  while (std::getline(events, line)) {
    ++line_number;
    if (line.empty()) continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != 3)
      throw std::invalid_argument(events_path + ":" + std::to_string(line_number) +
                                  ": expected 3 fields");
    const std::string& id = fields[0];
    const auto it = index_of.find(id);
    if (it == index_of.end())
      throw std::invalid_argument(events_path + ": unknown subject id '" + id +
                                  "' not present in the longitudinal table");
    if (seen_event[id])
      throw std::invalid_argument(events_path + ": duplicate event record for id '" + id + "'");
    seen_event[id] = true;
    SubjectData& subject = subjects[it->second];
    try {
      subject.event.time = std::stod(fields[1]);
    } catch (const std::exception&) {
      throw std::invalid_argument(events_path + ":" + std::to_string(line_number) +
                                  ": non-numeric time");
    }
    if (fields[2] == "1") {
      subject.event.indicator = EventIndicator::kObserved;
    } else if (fields[2] == "0") {
      subject.event.indicator = EventIndicator::kRightCensored;
    } else {
      throw std::invalid_argument(events_path + ": event must be 0 or 1 for id '" + id + "'");
    }
  }
  for (auto& subject : subjects) {
    if (!seen_event[subject.id])
      throw std::invalid_argument(events_path + ": missing event record for id '" + subject.id +
                                  "'");
    std::sort(subject.observations.begin(), subject.observations.end(),
              [](const Observation& a, const Observation& b) { return a.time < b.time; });
    for (std::size_t j = 0; j < subject.observations.size(); ++j) {
      if (j > 0 && subject.observations[j].time == subject.observations[j - 1].time)
        throw std::invalid_argument("subject '" + subject.id + "': duplicate observation time");
      if (subject.observations[j].time > subject.event.time)
        throw std::invalid_argument("subject '" + subject.id +
                                    "': observation after the event record time");
    }
  }
  return subjects;
}

void write_replicates_csv(const ReplicateSet& replicates,
                          const std::vector<SubjectData>& subjects, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::invalid_argument("cannot write '" + path + "'");
  out << "replicate,id,row_type,time,value,event\n";
  for (std::size_t s = 0; s < replicates.by_subject.size(); ++s) {
    const std::string& id = subjects[s].id;
    for (std::size_t rep = 0; rep < replicates.by_subject[s].size(); ++rep) {
      const Replicate& replicate = replicates.by_subject[s][rep];
      for (std::size_t j = 0; j < replicate.values.size(); ++j)
        out << rep << ',' << id << ",long," << format_number(subjects[s].observations[j].time)
            << ',' << format_number(replicate.values[j]) << ",\n";
      out << rep << ',' << id << ",tte," << format_number(replicate.record.time) << ','
          << format_number(replicate.uncensored_time) << ','
          << (replicate.record.censored() ? 0 : 1) << '\n';
    }
  }
}

}  // namespace jmdiag
