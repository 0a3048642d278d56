#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "jmdiag/evaluate.hpp"
#include "jmdiag/parallel.hpp"
#include "jmdiag/study.hpp"

namespace py = pybind11;
using namespace jmdiag;

namespace {

SubjectData subject_from_dict(const py::dict& d) {
  SubjectData subject;
  subject.id = py::cast<std::string>(d["id"]);
  const auto times = py::cast<std::vector<double>>(d["times"]);
  const auto values = py::cast<std::vector<double>>(d["values"]);
  if (times.size() != values.size())
    throw std::invalid_argument("subject '" + subject.id + "': times and values differ in length");
  for (std::size_t j = 0; j < times.size(); ++j)
    subject.observations.push_back({times[j], values[j]});
  subject.event.time = py::cast<double>(d["event_time"]);
  subject.event.indicator = py::cast<bool>(d["event"]) ? EventIndicator::kObserved
                                                       : EventIndicator::kRightCensored;
  return subject;
}

py::dict subject_to_dict(const SubjectData& subject) {
  py::dict d;
  d["id"] = subject.id;
  std::vector<double> times, values;
  for (const auto& obs : subject.observations) {
    times.push_back(obs.time);
    values.push_back(obs.value);
  }
  d["times"] = times;
  d["values"] = values;
  d["event_time"] = subject.event.time;
  d["event"] = !subject.event.censored();
  return d;
}

py::dict test_result_to_dict(const TestResult& r) {
  py::dict d;
  d["method"] = to_string(r.method);
  d["statistic"] = r.statistic;
  d["p_value"] = r.p_value;
  d["n"] = r.n;
  return d;
}

py::dict decision_to_dict(const CombinedDecision& decision) {
  py::dict d;
  d["threshold"] = decision.threshold;
  d["reject"] = decision.reject;
  d["driving_component"] = decision.driving_component;
  py::list components;
  for (const auto& c : decision.components) {
    py::dict entry = test_result_to_dict(c.result);
    entry["part"] = c.part;
    components.append(entry);
  }
  d["components"] = components;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Joint-model diagnostics: normalised prediction discrepancies and distribution "
            "errors for longitudinal + time-to-event models";

  py::class_<IndividualParameters>(m, "IndividualParameters")
      .def(py::init([](double r, double psa0, double epsilon, double t_esc) {
             return IndividualParameters{r, psa0, epsilon, t_esc};
           }),
           py::arg("r"), py::arg("psa0"), py::arg("epsilon"), py::arg("t_esc"))
      .def_readwrite("r", &IndividualParameters::growth_rate)
      .def_readwrite("psa0", &IndividualParameters::baseline_psa)
      .def_readwrite("epsilon", &IndividualParameters::efficacy)
      .def_readwrite("t_esc", &IndividualParameters::escape_time);

  py::class_<JointModelSpec>(m, "JointModelSpec")
      .def_static("from_json", &spec_from_json_string, py::arg("text"))
      .def_static("from_file", &load_spec, py::arg("path"))
      .def_static("base_model", &JointModelSpec::base_model)
      .def("to_json", &to_json_string)
      .def("validate", &JointModelSpec::validate)
      .def_property_readonly("study_end", [](const JointModelSpec& s) { return s.study_end; });

  m.def("typical_individual", &typical_individual, py::arg("spec"));
  m.def("transform_parameter",
        [](double fixed_effect, double eta, const std::string& transform) {
          return transform_parameter(fixed_effect, eta, transform_from_string(transform));
        },
        py::arg("fixed_effect"), py::arg("eta"), py::arg("transform"));
  m.def("psa_value",
        [](double t, const IndividualParameters& psi, const JointModelSpec& spec) {
          return psa_value(t, psi, spec.constants);
        },
        py::arg("t"), py::arg("psi"), py::arg("spec"));
  m.def("psa_log_slope",
        [](double t, const IndividualParameters& psi, const JointModelSpec& spec) {
          return psa_log_slope(t, psi, spec.constants);
        },
        py::arg("t"), py::arg("psi"), py::arg("spec"));
  m.def("association_value",
        [](double t, const IndividualParameters& psi, const JointModelSpec& spec,
           const std::string& kind) {
          AssociationFunction assoc = spec.association;
          assoc.kind = association_kind_from_string(kind);
          return association_value(t, psi, spec.constants, assoc);
        },
        py::arg("t"), py::arg("psi"), py::arg("spec"), py::arg("kind"));
  m.def("hazard",
        [](double t, const IndividualParameters& psi, const JointModelSpec& spec) {
          return hazard(t, psi, spec);
        },
        py::arg("t"), py::arg("psi"), py::arg("spec"));
  m.def("cumulative_hazard",
        [](double t, const IndividualParameters& psi, const JointModelSpec& spec) {
          return cumulative_hazard(t, psi, spec);
        },
        py::arg("t"), py::arg("psi"), py::arg("spec"));
  m.def("survival",
        [](double t, const IndividualParameters& psi, const JointModelSpec& spec) {
          return survival(t, psi, spec);
        },
        py::arg("t"), py::arg("psi"), py::arg("spec"));

  m.def("simulate_dataset",
        [](const JointModelSpec& spec, int n_subjects, std::uint64_t seed, int n_times) {
          const StudyDesign design = StudyDesign::balanced(n_subjects, n_times, spec.study_end);
          const auto data = simulate_dataset(spec, design, seed);
          py::list out;
          for (const auto& subject : data) out.append(subject_to_dict(subject));
          return out;
        },
        py::arg("spec"), py::arg("n_subjects"), py::arg("seed"), py::arg("n_times") = 9);

  m.def("evaluate",
        [](const py::list& dataset, const JointModelSpec& tested, int k, std::uint64_t seed,
           int threads) {
          std::vector<SubjectData> data;
          for (const auto& item : dataset) data.push_back(subject_from_dict(py::cast<py::dict>(item)));
          EvaluationOptions options;
          options.k = k;
          options.seed = seed;
          options.n_threads = threads > 0 ? threads : default_thread_count();
          const EvaluationResult result = evaluate_dataset(data, tested, options);
          py::dict out;
          out["global_test"] = decision_to_dict(result.global_test);
          out["ks_test"] = decision_to_dict(result.ks_test);
          out["npde_longitudinal"] = result.residuals.npde_longitudinal();
          out["npd_tte"] = result.residuals.npd_tte();
          out["pd_tte"] = result.residuals.pd_tte();
          out["report_json"] = report_to_json(result);
          return out;
        },
        py::arg("dataset"), py::arg("tested"), py::arg("k") = 2000, py::arg("seed") = 1,
        py::arg("threads") = 0);

  m.def("wilcoxon_signed_rank",
        [](const std::vector<double>& x) { return test_result_to_dict(wilcoxon_signed_rank(x)); });
  m.def("fisher_variance_test", [](const std::vector<double>& x) {
    return test_result_to_dict(fisher_variance_test(x));
  });
  m.def("shapiro_wilk",
        [](const std::vector<double>& x) { return test_result_to_dict(shapiro_wilk(x)); });
  m.def("ks_test_normal",
        [](const std::vector<double>& x) { return test_result_to_dict(ks_test_normal(x)); });

  m.def("clamp_and_normalise",
        [](double p, int k) {
          const ClampResult r = clamp_and_normalise(p, k);
          return py::make_tuple(r.p, r.normal_score, r.clamped);
        },
        py::arg("p"), py::arg("k"));

  m.def("km_estimator",
        [](const std::vector<double>& times, const std::vector<bool>& events) {
          if (times.size() != events.size())
            throw std::invalid_argument("times and events differ in length");
          std::vector<EventRecord> records;
          for (std::size_t i = 0; i < times.size(); ++i)
            records.push_back({times[i], events[i] ? EventIndicator::kObserved
                                                   : EventIndicator::kRightCensored});
          const KmCurve km = km_estimator(records);
          return py::make_tuple(km.times, km.survival);
        },
        py::arg("times"), py::arg("events"));

  m.attr("__version__") = "0.1.0";
}
