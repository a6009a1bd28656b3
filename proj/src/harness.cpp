#include "ctmed/harness.hpp"

#include "ctmed/parallel.hpp"
#include "ctmed/rng.hpp"
#include "ctmed/stats.hpp"

#include <bit>
#include <chrono>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace ctmed {

namespace {
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
}

void ExperimentSpec::validate() const {
  dgp.validate();
  kernel.validate();
  nuisance.validate();
  if (n_grid.empty()) throw std::invalid_argument("experiment needs at least one sample size");
  if (pairs.empty()) throw std::invalid_argument("experiment needs at least one treatment pair");
  if (estimators.empty()) throw std::invalid_argument("experiment needs at least one estimator");
  if (patterns.empty()) {
    throw std::invalid_argument("experiment needs at least one misspecification pattern");
  }
  if (reps < 1) throw std::invalid_argument("replication count must be positive");
  if (folds < 1) throw std::invalid_argument("fold count must be at least 1");
  for (std::size_t n : n_grid) {
    if (n < 2 * static_cast<std::size_t>(folds)) {
      throw std::invalid_argument("sample size " + std::to_string(n) +
                                  " is too small for " + std::to_string(folds) + " folds");
    }
  }
}

std::uint64_t cell_hash(EstimatorKind estimator, std::size_t n, const TreatmentPair& pair,
                        MisspecPattern pattern) {
  std::uint64_t h = 0x63656c6c68617368ULL;
  const auto mix = [&h](std::uint64_t v) { h = splitmix64(h ^ v); };
  mix(static_cast<std::uint64_t>(estimator));
  mix(static_cast<std::uint64_t>(n));
  mix(static_cast<std::uint64_t>(pair.a.size()));
  for (Eigen::Index j = 0; j < pair.a.size(); ++j) {
    mix(std::bit_cast<std::uint64_t>(pair.a(j)));
  }
  for (Eigen::Index j = 0; j < pair.a_prime.size(); ++j) {
    mix(std::bit_cast<std::uint64_t>(pair.a_prime(j)));
  }
  mix(static_cast<std::uint64_t>(pattern));
  return h;
}

namespace {

struct CellId {
  EstimatorKind estimator;
  std::size_t n;
  TreatmentPair pair;
  MisspecPattern pattern;
  std::uint64_t hash;
  double psi0;
};

struct Slot {
  bool ok = false;
  double psi = 0.0;
  double se = 0.0;
  bool has_se = false;
  bool covered = false;
  double wall_ms = 0.0;
  std::uint64_t seed = 0;
  std::string error;
};

Slot run_replication(const ExperimentSpec& spec, const CellId& cell, int rep) {
  Slot s;
  s.seed = derive_seed(spec.base_seed, cell.hash, static_cast<std::uint64_t>(rep));
  const auto t0 = std::chrono::steady_clock::now();
  try {
    const Dataset data = generate(spec.dgp, cell.n, s.seed);
    EstimatorConfig cfg;
    cfg.kernel = spec.kernel;
    cfg.nuisance = spec.nuisance;
    cfg.folds = spec.folds;
    cfg.pattern = cell.pattern;
    cfg.seed = splitmix64(s.seed ^ 0x464f4c44ULL);  // fold shuffle stream
    cfg.warn_outside_support = false;
    if (cell.estimator == EstimatorKind::TripleRobust) {
      const EstimateResult r = estimate_psi(data, cell.pair, cfg);
      s.psi = r.psi_hat;
      s.se = r.se;
      s.has_se = true;
      s.covered = r.ci_lower <= cell.psi0 && cell.psi0 <= r.ci_upper;
    } else {
      s.psi = estimate_psi_plugin(data, cell.pair, cfg);
    }
    s.ok = true;
  } catch (const std::exception& e) {
    s.ok = false;
    s.error = e.what();
  }
  const auto t1 = std::chrono::steady_clock::now();
  s.wall_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
  return s;
}

}  // namespace

ExperimentReport run_experiment(const ExperimentSpec& spec, int workers) {
  spec.validate();

  std::vector<CellId> cells;
  for (EstimatorKind est : spec.estimators) {
    for (std::size_t n : spec.n_grid) {
      for (const TreatmentPair& pair : spec.pairs) {
        for (MisspecPattern pattern : spec.patterns) {
          CellId c{est, n, pair, pattern, cell_hash(est, n, pair, pattern),
                   oracle_psi(spec.dgp, pair)};
          cells.push_back(std::move(c));
        }
      }
    }
  }

  const std::size_t reps = static_cast<std::size_t>(spec.reps);
  std::vector<Slot> slots(cells.size() * reps);
  parallel_for(slots.size(), workers, [&](std::size_t i) {
    const std::size_t cell_idx = i / reps;
    const int rep = static_cast<int>(i % reps);
    slots[i] = run_replication(spec, cells[cell_idx], rep);
  });

  // Aggregate in cell-then-replication order; nothing downstream depends
  // on how the work was scheduled.
  ExperimentReport report;
  report.cells.reserve(cells.size());
  for (std::size_t c = 0; c < cells.size(); ++c) {
    const CellId& cell = cells[c];
    CellReport cr;
    cr.estimator = cell.estimator;
    cr.n = cell.n;
    cr.pair = cell.pair;
    cr.pattern = cell.pattern;
    cr.psi0 = cell.psi0;
    cr.reps_requested = spec.reps;

    std::vector<double> ses;
    std::size_t covered = 0;
    std::size_t with_se = 0;
    for (std::size_t r = 0; r < reps; ++r) {
      const Slot& s = slots[c * reps + r];
      cr.wall_ms += s.wall_ms;
      if (!s.ok) {
        cr.failures.push_back({static_cast<int>(r), s.seed, s.error});
        continue;
      }
      cr.estimates.push_back(s.psi);
      if (s.has_se) {
        ses.push_back(s.se);
        ++with_se;
        if (s.covered) ++covered;
      }
    }
    cr.reps_completed = static_cast<int>(cr.estimates.size());

    if (cr.estimates.empty()) {
      cr.bias = kNaN;
      cr.sd = kNaN;
      cr.rmse = kNaN;
    } else {
      cr.bias = stats::mean(cr.estimates) - cr.psi0;
      cr.sd = stats::population_sd(cr.estimates);
      double mse = 0.0;
      for (double e : cr.estimates) mse += (e - cr.psi0) * (e - cr.psi0);
      cr.rmse = std::sqrt(mse / static_cast<double>(cr.estimates.size()));
    }
    cr.mean_se = ses.empty() ? kNaN : stats::mean(ses);
    cr.coverage = with_se == 0 ? kNaN : static_cast<double>(covered) / static_cast<double>(with_se);
    if (cr.estimates.size() >= 2 && cr.sd > 0.0) {
      cr.skew = stats::skewness(cr.estimates);
      cr.kurtosis = stats::excess_kurtosis(cr.estimates);
    } else {
      cr.skew = kNaN;
      cr.kurtosis = kNaN;
    }
    report.cells.push_back(std::move(cr));
  }
  return report;
}

NormalityCheck normality_check(const std::vector<double>& estimates) {
  if (estimates.size() < 100) {
    throw std::invalid_argument("normality check needs at least 100 values");
  }
  if (!(stats::population_sd(estimates) > 0.0)) {
    throw std::invalid_argument("normality check needs non-degenerate values");
  }
  NormalityCheck c;
  c.skew = stats::skewness(estimates);
  c.excess_kurtosis = stats::excess_kurtosis(estimates);
  c.pass = std::abs(c.skew) < 0.35 && std::abs(c.excess_kurtosis) < 0.8;
  return c;
}

std::string estimator_name(EstimatorKind kind) {
  switch (kind) {
    case EstimatorKind::TripleRobust:
      return "triple_robust";
    case EstimatorKind::Plugin:
      return "plugin";
  }
  throw std::invalid_argument("unknown estimator kind");
}

std::string pattern_name(MisspecPattern pattern) {
  switch (pattern) {
    case MisspecPattern::None:
      return "none";
    case MisspecPattern::Gamma:
      return "gamma";
    case MisspecPattern::Alpha:
      return "alpha";
    case MisspecPattern::Lambda:
      return "lambda";
    case MisspecPattern::GammaAlpha:
      return "gamma_alpha";
    case MisspecPattern::GammaLambda:
      return "gamma_lambda";
    case MisspecPattern::AlphaLambda:
      return "alpha_lambda";
  }
  throw std::invalid_argument("unknown misspecification pattern");
}

}  // namespace ctmed
