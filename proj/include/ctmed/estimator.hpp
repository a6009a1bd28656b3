#pragma once

#include "ctmed/dataset.hpp"
#include "ctmed/dgp.hpp"
#include "ctmed/kernel.hpp"
#include "ctmed/nuisance.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace ctmed {

// Cross-fitting fold assignment: indices are shuffled with a seeded
// engine, then cut into L contiguous blocks whose sizes differ by at
// most one.
struct FoldPlan {
  int folds = 5;
  std::vector<int> assignment;  // row index -> fold id
  std::uint64_t seed = 0;

  static FoldPlan make(std::size_t n, int folds, std::uint64_t seed);

  std::vector<Eigen::Index> fold_rows(int fold) const;
  std::vector<Eigen::Index> complement_rows(int fold) const;
};

// Which nuisance components are replaced by intercept-only working models.
enum class MisspecPattern { None, Gamma, Alpha, Lambda, GammaAlpha, GammaLambda, AlphaLambda };

// Applies the pattern to a fitted bundle via misspecify().
NuisanceFit apply_pattern(const NuisanceFit& fit, MisspecPattern pattern);

struct EstimatorConfig {
  KernelSpec kernel;
  NuisanceConfig nuisance;
  int folds = 5;
  std::uint64_t seed = 0;  // fold shuffle seed
  MisspecPattern pattern = MisspecPattern::None;
  // When set, overrides the data-driven bandwidth.
  std::optional<double> fixed_bandwidth;
  // Warn on stderr when an evaluation point lies outside the observed
  // treatment range.
  bool warn_outside_support = true;
};

struct EstimateResult {
  double psi_hat = 0.0;
  std::vector<double> per_fold;
  double se = 0.0;
  double ci_lower = 0.0;
  double ci_upper = 0.0;
  double h_used = 0.0;
  std::int64_t n = 0;
  TreatmentPair pair;
};

// Estimating-equation value m(O; psi) for one observation. Affine in psi
// with slope -1. Throws numeric_error if a non-finite term appears.
double moment_function(const Observation& obs, const NuisanceFit& fit,
                       const TreatmentPair& pair, double psi, const KernelSpec& kspec,
                       double h);

// Root of the fold-average moment equation, i.e. the fold mean of the
// psi-free part of m.
double solve_fold_psi(const Dataset& fold, const NuisanceFit& fit, const TreatmentPair& pair,
                      const KernelSpec& kspec, double h);

// Data-driven bandwidth used by estimate_psi: the n^(-1/(d+4)) rule scaled
// by the mean per-dimension sd of the treatment columns.
double data_bandwidth(const Dataset& data, const KernelSpec& kernel);

// One nuisance fit per fold, trained on the fold's complement (or on the
// full data when the plan has a single fold) with config.pattern applied.
std::vector<NuisanceFit> fit_fold_nuisances(const Dataset& data, const FoldPlan& plan,
                                            const EstimatorConfig& config);

// psi-free moment values phi(O_i) in row order, each evaluated under its
// own fold's fit; m(O_i; psi) = phi_i - psi.
std::vector<double> cross_fitted_moments(const Dataset& data,
                                         const std::vector<NuisanceFit>& fold_fits,
                                         const FoldPlan& plan, const TreatmentPair& pair,
                                         const KernelSpec& kspec, double h);

// Cross-fitted estimate with plug-in asymptotic standard error and 95%
// interval. folds == 1 skips sample splitting (debug mode). Requires
// n >= 2 * folds.
EstimateResult estimate_psi(const Dataset& data, const TreatmentPair& pair,
                            const EstimatorConfig& config);

// Same, with a caller-supplied fold plan.
EstimateResult estimate_psi(const Dataset& data, const TreatmentPair& pair,
                            const EstimatorConfig& config, const FoldPlan& plan);

// Pure plug-in estimate: sample average of the integrated outcome
// regression eta(a, a', X_i), no weighting terms. Not triply robust; no
// interval is attached.
double estimate_psi_plugin(const Dataset& data, const TreatmentPair& pair,
                           const EstimatorConfig& config);

struct VarianceEstimate {
  double se = 0.0;
  double ci_lower = 0.0;
  double ci_upper = 0.0;
};

// Standard error from the pooled cross-fitted moment values at psi_hat:
// se = sample sd / sqrt(n).
VarianceEstimate estimate_variance(const Dataset& data,
                                   const std::vector<NuisanceFit>& fold_fits,
                                   const FoldPlan& plan, const TreatmentPair& pair,
                                   const KernelSpec& kspec, double h, double psi_hat);

struct BiasVariance {
  double bias = 0.0;              // leading smoothing bias at bandwidth h
  double variance_leading = 0.0;  // leading constant of the limiting variance
};

// Evaluates the asymptotic bias and variance constants for a known
// data-generating process by Monte Carlo over its closed-form densities.
BiasVariance theoretical_bias_variance(const DgpSpec& dgp, const TreatmentPair& pair,
                                       const KernelSpec& kspec, double h,
                                       std::size_t draws = 1000000,
                                       std::uint64_t seed = 20240901,
                                       int workers = 1);

}  // namespace ctmed
