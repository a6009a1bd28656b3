#pragma once

#include "ctmed/dgp.hpp"
#include "ctmed/effects.hpp"
#include "ctmed/estimator.hpp"
#include "ctmed/harness.hpp"

#include <string>
#include <vector>

namespace ctmed {

// Everything a run can be configured with. Fields the file does not
// mention keep their defaults; unknown keys are rejected.
struct FileConfig {
  DgpSpec dgp;
  EstimatorConfig estimator;
  std::vector<TreatmentPair> pairs;
  ExperimentSpec experiment;
  bool has_dgp = false;
  bool has_experiment = false;
  int workers = 1;
};

// Throws config_error naming the file and the offending key.
FileConfig load_config(const std::string& path);
FileConfig parse_config(const std::string& text, const std::string& origin);

// JSON writers. Field order is fixed and doubles use shortest round-trip
// formatting, so equal inputs serialize to identical bytes.
std::string to_json(const EstimateResult& result);
std::string to_json(const EffectDecomposition& decomposition);
std::string estimates_to_json(const std::vector<EffectDecomposition>& rows);
std::string estimates_to_csv(const std::vector<EffectDecomposition>& rows);
std::string report_to_json(const ExperimentReport& report, bool zero_wall_ms = false);
std::string oracle_to_json(const DgpSpec& dgp, const std::vector<TreatmentPair>& pairs);
std::string oracle_to_csv(const DgpSpec& dgp, const std::vector<TreatmentPair>& pairs);

}  // namespace ctmed
