#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "jmdiag/model.hpp"

namespace jmdiag {

namespace {

using nlohmann::json;

constexpr int kSpecSchemaVersion = 1;

json parameter_to_json(const ParameterSpec& p) {
  return json{{"name", p.name},
              {"fixed_effect", p.fixed_effect},
              {"transform", to_string(p.transform)},
              {"omega", p.omega}};
}

ParameterSpec parameter_from_json(const json& j, const char* where) {
  ParameterSpec p;
  try {
    p.name = j.at("name").get<std::string>();
    p.fixed_effect = j.at("fixed_effect").get<double>();
    p.transform = transform_from_string(j.at("transform").get<std::string>());
    p.omega = j.value("omega", 0.0);
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string(where) + ": " + e.what());
  }
  return p;
}

}  // namespace

std::string to_string(Transform t) {
  switch (t) {
    case Transform::kNormal:
      return "normal";
    case Transform::kLogNormal:
      return "log-normal";
    case Transform::kLogitNormal:
      return "logit-normal";
  }
  return "?";
}

std::string to_string(AssociationKind k) {
  switch (k) {
    case AssociationKind::kCurrentPsa:
      return "current_psa";
    case AssociationKind::kTimeToEscape:
      return "t_esc";
    case AssociationKind::kBaselinePsa:
      return "psa0";
    case AssociationKind::kSlopeLogPsa:
      return "slope_log_psa";
    case AssociationKind::kLogPsa:
      return "log_psa";
    case AssociationKind::kAucLogPsa:
      return "auc_log_psa";
  }
  return "?";
}

std::string to_string(ErrorModelKind k) {
  switch (k) {
    case ErrorModelKind::kConstant:
      return "constant";
    case ErrorModelKind::kProportional:
      return "proportional";
    case ErrorModelKind::kCombined:
      return "combined";
  }
  return "?";
}

Transform transform_from_string(const std::string& s) {
  if (s == "normal") return Transform::kNormal;
  if (s == "log-normal") return Transform::kLogNormal;
  if (s == "logit-normal") return Transform::kLogitNormal;
  throw std::invalid_argument("unknown transform '" + s + "'");
}

AssociationKind association_kind_from_string(const std::string& s) {
  if (s == "current_psa") return AssociationKind::kCurrentPsa;
  if (s == "t_esc") return AssociationKind::kTimeToEscape;
  if (s == "psa0") return AssociationKind::kBaselinePsa;
  if (s == "slope_log_psa") return AssociationKind::kSlopeLogPsa;
  if (s == "log_psa") return AssociationKind::kLogPsa;
  if (s == "auc_log_psa") return AssociationKind::kAucLogPsa;
  throw std::invalid_argument("unknown association kind '" + s + "'");
}

ErrorModelKind error_model_kind_from_string(const std::string& s) {
  if (s == "constant") return ErrorModelKind::kConstant;
  if (s == "proportional") return ErrorModelKind::kProportional;
  if (s == "combined") return ErrorModelKind::kCombined;
  throw std::invalid_argument("unknown error model kind '" + s + "'");
}

std::string to_json_string(const JointModelSpec& spec) {
  json j;
  j["schema_version"] = kSpecSchemaVersion;
  j["psa_parameters"] = json::array();
  for (const auto& p : spec.psa_parameters) j["psa_parameters"].push_back(parameter_to_json(p));
  j["constants"] = {{"k_out", spec.constants.k_out}, {"delta", spec.constants.delta}};
  j["error_model"] = {{"kind", to_string(spec.error_model.kind)},
                      {"additive", spec.error_model.additive},
                      {"proportional", spec.error_model.proportional}};
  j["tte_parameters"] = json::array();
  for (const auto& p : spec.tte_parameters) j["tte_parameters"].push_back(parameter_to_json(p));
  j["association"] = {{"kind", to_string(spec.association.kind)},
                      {"slope_scale",
                       spec.association.slope_scale == SlopeScale::kLogPsaPlusOne ? "log" : "raw"}};
  j["covariate_coefficient"] = spec.covariate_coefficient;
  j["study_end"] = spec.study_end;
  return j.dump(2) + "\n";
}

JointModelSpec spec_from_json_string(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("model spec: invalid JSON: ") + e.what());
  }
  JointModelSpec spec;
  try {
    const int version = j.value("schema_version", kSpecSchemaVersion);
    if (version != kSpecSchemaVersion)
      throw std::invalid_argument("model spec: unsupported schema_version " +
                                  std::to_string(version));
    spec.psa_parameters.clear();
    for (const auto& p : j.at("psa_parameters"))
      spec.psa_parameters.push_back(parameter_from_json(p, "psa_parameters"));
    if (j.contains("constants")) {
      spec.constants.k_out = j["constants"].value("k_out", spec.constants.k_out);
      spec.constants.delta = j["constants"].value("delta", spec.constants.delta);
    }
    if (j.contains("error_model")) {
      const auto& e = j["error_model"];
      spec.error_model.kind = error_model_kind_from_string(e.at("kind").get<std::string>());
      spec.error_model.additive = e.value("additive", 0.0);
      spec.error_model.proportional = e.value("proportional", 0.0);
    }
    spec.tte_parameters.clear();
    for (const auto& p : j.at("tte_parameters"))
      spec.tte_parameters.push_back(parameter_from_json(p, "tte_parameters"));
    if (j.contains("association")) {
      const auto& a = j["association"];
      spec.association.kind = association_kind_from_string(a.at("kind").get<std::string>());
      const std::string scale = a.value("slope_scale", "log");
      if (scale == "log") {
        spec.association.slope_scale = SlopeScale::kLogPsaPlusOne;
      } else if (scale == "raw") {
        spec.association.slope_scale = SlopeScale::kRawPsa;
      } else {
        throw std::invalid_argument("association.slope_scale: expected 'log' or 'raw'");
      }
    }
    spec.covariate_coefficient = j.value("covariate_coefficient", 0.0);
    spec.study_end = j.value("study_end", 365.0);
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("model spec: ") + e.what());
  }
  spec.validate();
  return spec;
}

JointModelSpec load_spec(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open model spec file '" + path + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return spec_from_json_string(buffer.str());
}

void save_spec(const JointModelSpec& spec, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::invalid_argument("cannot write model spec file '" + path + "'");
  out << to_json_string(spec);
}

}  // namespace jmdiag
