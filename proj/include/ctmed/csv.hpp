#pragma once

#include "ctmed/dataset.hpp"
#include "ctmed/harness.hpp"

#include <iosfwd>
#include <string>

namespace ctmed {

// Reads a dataset from CSV with header A1..Ad,M,X1..Xp,Y. Dimensions are
// inferred from the header. Throws config_error with the row and column
// of the first problem (missing field, unparsable or non-finite value).
Dataset load_dataset(const std::string& path);
Dataset parse_dataset_csv(std::istream& in, const std::string& origin);

// Writes the same layout. Numbers use shortest round-trip formatting, so
// a load after a write reproduces every value exactly.
void write_dataset(const Dataset& data, const std::string& path);
void write_dataset_csv(const Dataset& data, std::ostream& out);

// One row per cell:
// estimator,n,a,a_prime,pattern,bias,sd,rmse,mean_se,coverage,skew,
// kurtosis,reps_completed,wall_ms
// zero_wall_ms writes 0 in the timing column; every other column is
// deterministic for a given spec, so that variant is byte-comparable
// across runs and worker counts.
std::string report_to_csv(const ExperimentReport& report, bool zero_wall_ms = false);
void write_report_csv(const ExperimentReport& report, const std::string& path,
                      bool zero_wall_ms = false);

// Shortest round-trip decimal form of x (nan/inf spelled out).
std::string format_double(double x);

}  // namespace ctmed
