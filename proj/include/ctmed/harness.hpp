#pragma once

#include "ctmed/dataset.hpp"
#include "ctmed/dgp.hpp"
#include "ctmed/estimator.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace ctmed {

enum class EstimatorKind { TripleRobust, Plugin };

// Monte Carlo study over the cross product
// estimators x n_grid x pairs x patterns. Each combination is a cell.
struct ExperimentSpec {
  DgpSpec dgp;
  std::vector<std::size_t> n_grid;
  std::vector<TreatmentPair> pairs;
  int reps = 1;
  std::vector<EstimatorKind> estimators;
  std::vector<MisspecPattern> patterns;
  KernelSpec kernel;
  NuisanceConfig nuisance;
  int folds = 5;
  std::uint64_t base_seed = 42;

  void validate() const;  // throws std::invalid_argument
};

struct RepFailure {
  int rep = 0;
  std::uint64_t seed = 0;
  std::string message;
};

struct CellReport {
  EstimatorKind estimator = EstimatorKind::TripleRobust;
  std::size_t n = 0;
  TreatmentPair pair;
  MisspecPattern pattern = MisspecPattern::None;

  double psi0 = 0.0;
  double bias = 0.0;      // mean(psi_hat) - psi0 over completed reps
  double sd = 0.0;        // population sd, so rmse^2 == bias^2 + sd^2
  double rmse = 0.0;
  double mean_se = 0.0;   // NaN for the plug-in estimator
  double coverage = 0.0;  // share of completed reps whose CI covers psi0
  double skew = 0.0;
  double kurtosis = 0.0;  // excess
  int reps_requested = 0;
  int reps_completed = 0;
  double wall_ms = 0.0;
  std::vector<RepFailure> failures;

  // Per-replication estimates in replication order (completed reps only),
  // kept in memory for normality diagnostics. Not serialized.
  std::vector<double> estimates;
};

struct ExperimentReport {
  std::vector<CellReport> cells;
};

// Replication seed stream identifier for a cell. Depends only on the
// cell's own identity, so a cell re-run in isolation reproduces exactly.
std::uint64_t cell_hash(EstimatorKind estimator, std::size_t n, const TreatmentPair& pair,
                        MisspecPattern pattern);

// Runs every replication of every cell. Replications are distributed
// over `workers` threads; results land in preassigned slots and are
// aggregated in replication order, so the report does not depend on the
// worker count. Failed replications are recorded, not silently dropped.
ExperimentReport run_experiment(const ExperimentSpec& spec, int workers = 1);

struct NormalityCheck {
  double skew = 0.0;
  double excess_kurtosis = 0.0;
  bool pass = false;
};

// Standardizes the estimates and checks |skew| < 0.35 and
// |excess kurtosis| < 0.8. Requires at least 100 values with positive
// spread.
NormalityCheck normality_check(const std::vector<double>& estimates);

std::string estimator_name(EstimatorKind kind);
std::string pattern_name(MisspecPattern pattern);

}  // namespace ctmed
