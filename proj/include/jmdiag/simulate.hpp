#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "jmdiag/model.hpp"
#include "jmdiag/rng.hpp"

namespace jmdiag {

// Sampling design shared by all subjects of a simulated study.
struct StudyDesign {
  int n_subjects = 0;
  std::vector<double> planned_times;
  double study_end = 365.0;

  void validate() const;
  // n equally spaced PSA samples from treatment initiation to study end.
  static StudyDesign balanced(int n_subjects, int n_times = 9, double study_end = 365.0);
};

enum class EventIndicator { kObserved, kRightCensored };

struct EventRecord {
  double time = 0.0;
  EventIndicator indicator = EventIndicator::kObserved;

  bool censored() const { return indicator == EventIndicator::kRightCensored; }
};

struct Observation {
  double time = 0.0;
  double value = 0.0;
};

// One subject: longitudinal records truncated at the event record.
struct SubjectData {
  std::string id;
  std::vector<Observation> observations;
  EventRecord event;
};

// One simulated replicate of a subject: longitudinal values on the subject's
// full observation grid (no truncation) plus the simulated event, both as the
// raw uncensored draw and as the administratively censored record.
struct Replicate {
  std::vector<double> values;
  double uncensored_time = 0.0;  // +inf when the event lies beyond any horizon
  EventRecord record;
};

struct ReplicateSet {
  int k = 0;
  std::vector<std::vector<Replicate>> by_subject;  // aligned with the dataset order
};

struct EventSample {
  double uncensored_time = 0.0;
  EventRecord record;
};

IndividualParameters draw_individual_parameters(const JointModelSpec& spec, RngStream& stream);

// Inverse-CDF event sampling: draws u ~ U(0,1) and solves H(T) = -log(u) by
// geometric bracket growth from study_end followed by Brent iteration.
EventSample simulate_event_time(const IndividualParameters& psi, const JointModelSpec& spec,
                                RngStream& stream);

std::vector<double> simulate_longitudinal(const IndividualParameters& psi,
                                          const JointModelSpec& spec,
                                          std::span<const double> times, RngStream& stream);

std::vector<SubjectData> simulate_dataset(const JointModelSpec& spec, const StudyDesign& design,
                                          std::uint64_t master_seed);

ReplicateSet simulate_replicates(const std::vector<SubjectData>& observed,
                                 const JointModelSpec& tested, int k, std::uint64_t master_seed,
                                 int n_threads = 1);

// Dataset CSV interface: longitudinal table (id,time,value) and event table
// (id,time,event) with event 1 = observed, 0 = right-censored.
void write_dataset_csv(const std::vector<SubjectData>& subjects, const std::string& long_path,
                       const std::string& events_path);
std::vector<SubjectData> read_dataset_csv(const std::string& long_path,
                                          const std::string& events_path);
void write_replicates_csv(const ReplicateSet& replicates,
                          const std::vector<SubjectData>& subjects, const std::string& path);

}  // namespace jmdiag
