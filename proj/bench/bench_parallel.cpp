// Times the serial reference path against the OpenMP path on the same
// replication workload and verifies that both produce the same report.

#include "ctmed/csv.hpp"
#include "ctmed/harness.hpp"

#include <chrono>
#include <cstdlib>
#include <iostream>
#include <string>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace {

double time_run(const ctmed::ExperimentSpec& spec, int workers, std::string& csv) {
  const auto t0 = std::chrono::steady_clock::now();
  const ctmed::ExperimentReport report = ctmed::run_experiment(spec, workers);
  const auto t1 = std::chrono::steady_clock::now();
  csv = ctmed::report_to_csv(report, /*zero_wall_ms=*/true);
  return std::chrono::duration<double>(t1 - t0).count();
}

}  // namespace

int main(int argc, char** argv) {
  ctmed::ExperimentSpec spec;
  spec.n_grid = {1000};
  spec.pairs = {ctmed::TreatmentPair::scalar(1.0, 0.0)};
  spec.reps = argc > 1 ? std::atoi(argv[1]) : 48;
  spec.estimators = {ctmed::EstimatorKind::TripleRobust};
  spec.patterns = {ctmed::MisspecPattern::None};
  spec.base_seed = 7;

  int max_workers = 4;
#ifdef _OPENMP
  max_workers = omp_get_max_threads();
#endif

  std::string serial_csv;
  const double serial_s = time_run(spec, 1, serial_csv);
  std::cout << "serial reference:  " << serial_s << " s (" << spec.reps << " replications)\n";

  for (int w : {2, max_workers}) {
    if (w < 2) continue;
    std::string csv;
    const double t = time_run(spec, w, csv);
    std::cout << "openmp x" << w << ":         " << t << " s, speedup " << serial_s / t << "\n";
    if (csv != serial_csv) {
      std::cerr << "mismatch: report with " << w << " workers differs from the serial one\n";
      return 1;
    }
    if (w == max_workers) break;
  }
  std::cout << "reports identical across worker counts\n";
  return 0;
}
