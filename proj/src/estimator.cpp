#include "ctmed/estimator.hpp"

#include "ctmed/errors.hpp"
#include "ctmed/parallel.hpp"
#include "ctmed/rng.hpp"
#include "ctmed/stats.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <numeric>
#include <random>
#include <stdexcept>

namespace ctmed {

namespace {

double product_kernel_row(const KernelSpec& ks, const Eigen::VectorXd& a_row,
                          const Eigen::VectorXd& target, double h) {
  double v = 1.0 / h;
  for (Eigen::Index j = 0; j < a_row.size(); ++j) {
    v *= kernel_value(ks, (a_row(j) - target(j)) / h);
    if (v == 0.0) return 0.0;
  }
  return v;
}

void check_pair(const TreatmentPair& pair, Eigen::Index d_a) {
  if (pair.a.size() != d_a || pair.a_prime.size() != d_a) {
    throw std::invalid_argument("treatment pair dimension does not match the data");
  }
}

double mean_treatment_sd(const Dataset& data) {
  const double n = static_cast<double>(data.n());
  double acc = 0.0;
  for (Eigen::Index j = 0; j < data.treatment_dim(); ++j) {
    const double mu = data.a.col(j).mean();
    acc += std::sqrt((data.a.col(j).array() - mu).square().sum() / std::max(1.0, n - 1.0));
  }
  return acc / static_cast<double>(data.treatment_dim());
}

void warn_outside_support(const Dataset& data, const TreatmentPair& pair) {
  for (Eigen::Index j = 0; j < data.treatment_dim(); ++j) {
    const double lo = data.a.col(j).minCoeff();
    const double hi = data.a.col(j).maxCoeff();
    for (double v : {pair.a(j), pair.a_prime(j)}) {
      if (v < lo || v > hi) {
        std::cerr << "warning: evaluation point " << v
                  << " lies outside the observed treatment range [" << lo << ", " << hi
                  << "] in dimension " << (j + 1) << "\n";
        return;
      }
    }
  }
}

// psi-free part of the moment function; m(O; psi) = phi(O) - psi.
double psi_free_moment(const Observation& obs, const NuisanceFit& fit, const TreatmentPair& pair,
                       const KernelSpec& ks, double h) {
  const double k_a = product_kernel_row(ks, obs.a, pair.a, h);
  const double k_ap = product_kernel_row(ks, obs.a, pair.a_prime, h);
  const double eta = fit.eta(pair.a, pair.a_prime, obs.x);
  if (!std::isfinite(eta)) {
    throw numeric_error("moment function: integrated outcome regression is not finite");
  }
  double value = eta;
  if (k_a != 0.0) {
    const double lam = fit.lambda(pair.a, obs.x);
    const double dens_num = fit.alpha(pair.a_prime, obs.m, obs.x);
    const double dens_den = fit.alpha(pair.a, obs.m, obs.x);
    const double g = fit.gamma(pair.a, obs.m, obs.x);
    const double t = k_a * lam * (dens_num / dens_den) * (obs.y - g);
    if (!std::isfinite(t)) {
      throw numeric_error("moment function: outcome residual term is not finite");
    }
    value += t;
  }
  if (k_ap != 0.0) {
    const double lam = fit.lambda(pair.a_prime, obs.x);
    const double g = fit.gamma(pair.a, obs.m, obs.x);
    const double t = k_ap * lam * (g - eta);
    if (!std::isfinite(t)) {
      throw numeric_error("moment function: regression centering term is not finite");
    }
    value += t;
  }
  return value;
}

// Fold means of precomputed row values, in fold order.
std::vector<double> fold_means(const std::vector<double>& phi, const FoldPlan& plan) {
  std::vector<double> acc(static_cast<std::size_t>(plan.folds), 0.0);
  std::vector<std::size_t> count(static_cast<std::size_t>(plan.folds), 0);
  for (std::size_t i = 0; i < phi.size(); ++i) {
    const auto f = static_cast<std::size_t>(plan.assignment[i]);
    acc[f] += phi[i];
    ++count[f];
  }
  for (std::size_t f = 0; f < acc.size(); ++f) {
    if (count[f] == 0) throw std::invalid_argument("fold " + std::to_string(f) + " is empty");
    acc[f] /= static_cast<double>(count[f]);
  }
  return acc;
}

}  // namespace

FoldPlan FoldPlan::make(std::size_t n, int folds, std::uint64_t seed) {
  if (folds < 1) throw std::invalid_argument("fold count must be at least 1");
  if (static_cast<std::size_t>(folds) > n) {
    throw std::invalid_argument("more folds than rows");
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  auto eng = make_engine(seed);
  std::shuffle(order.begin(), order.end(), eng);

  FoldPlan plan;
  plan.folds = folds;
  plan.seed = seed;
  plan.assignment.assign(n, 0);
  // Contiguous blocks of the shuffled order; sizes differ by at most one.
  const std::size_t base = n / static_cast<std::size_t>(folds);
  const std::size_t extra = n % static_cast<std::size_t>(folds);
  std::size_t pos = 0;
  for (int f = 0; f < folds; ++f) {
    const std::size_t size = base + (static_cast<std::size_t>(f) < extra ? 1 : 0);
    for (std::size_t k = 0; k < size; ++k) {
      plan.assignment[order[pos++]] = f;
    }
  }
  return plan;
}

std::vector<Eigen::Index> FoldPlan::fold_rows(int fold) const {
  std::vector<Eigen::Index> rows;
  for (std::size_t i = 0; i < assignment.size(); ++i) {
    if (assignment[i] == fold) rows.push_back(static_cast<Eigen::Index>(i));
  }
  return rows;
}

std::vector<Eigen::Index> FoldPlan::complement_rows(int fold) const {
  std::vector<Eigen::Index> rows;
  for (std::size_t i = 0; i < assignment.size(); ++i) {
    if (assignment[i] != fold) rows.push_back(static_cast<Eigen::Index>(i));
  }
  return rows;
}

NuisanceFit apply_pattern(const NuisanceFit& fit, MisspecPattern pattern) {
  switch (pattern) {
    case MisspecPattern::None:
      return fit;
    case MisspecPattern::Gamma:
      return misspecify(fit, NuisanceKind::Gamma);
    case MisspecPattern::Alpha:
      return misspecify(fit, NuisanceKind::Alpha);
    case MisspecPattern::Lambda:
      return misspecify(fit, NuisanceKind::Lambda);
    case MisspecPattern::GammaAlpha:
      return misspecify(misspecify(fit, NuisanceKind::Gamma), NuisanceKind::Alpha);
    case MisspecPattern::GammaLambda:
      return misspecify(misspecify(fit, NuisanceKind::Gamma), NuisanceKind::Lambda);
    case MisspecPattern::AlphaLambda:
      return misspecify(misspecify(fit, NuisanceKind::Alpha), NuisanceKind::Lambda);
  }
  throw std::invalid_argument("unknown misspecification pattern");
}

double moment_function(const Observation& obs, const NuisanceFit& fit, const TreatmentPair& pair,
                       double psi, const KernelSpec& kspec, double h) {
  return psi_free_moment(obs, fit, pair, kspec, h) - psi;
}

double solve_fold_psi(const Dataset& fold, const NuisanceFit& fit, const TreatmentPair& pair,
                      const KernelSpec& kspec, double h) {
  if (fold.n() < 1) throw std::invalid_argument("empty fold");
  check_pair(pair, fold.treatment_dim());
  double acc = 0.0;
  for (Eigen::Index i = 0; i < fold.n(); ++i) {
    acc += psi_free_moment(fold.row(i), fit, pair, kspec, h);
  }
  return acc / static_cast<double>(fold.n());
}

double data_bandwidth(const Dataset& data, const KernelSpec& kernel) {
  KernelSpec ks = kernel;
  ks.treatment_dim = static_cast<int>(data.treatment_dim());
  return bandwidth(ks, static_cast<std::size_t>(data.n())) * mean_treatment_sd(data);
}

std::vector<NuisanceFit> fit_fold_nuisances(const Dataset& data, const FoldPlan& plan,
                                            const EstimatorConfig& config) {
  std::vector<NuisanceFit> fits;
  fits.reserve(static_cast<std::size_t>(plan.folds));
  for (int f = 0; f < plan.folds; ++f) {
    const Dataset train = plan.folds == 1 ? data : data.select(plan.complement_rows(f));
    fits.push_back(apply_pattern(fit_nuisances(train, config.nuisance), config.pattern));
  }
  return fits;
}

std::vector<double> cross_fitted_moments(const Dataset& data,
                                         const std::vector<NuisanceFit>& fold_fits,
                                         const FoldPlan& plan, const TreatmentPair& pair,
                                         const KernelSpec& kspec, double h) {
  if (fold_fits.size() != static_cast<std::size_t>(plan.folds)) {
    throw std::invalid_argument("one nuisance fit per fold is required");
  }
  if (static_cast<Eigen::Index>(plan.assignment.size()) != data.n()) {
    throw std::invalid_argument("fold plan does not match the data");
  }
  check_pair(pair, data.treatment_dim());
  std::vector<double> phi(static_cast<std::size_t>(data.n()), 0.0);
  for (Eigen::Index i = 0; i < data.n(); ++i) {
    const auto f = static_cast<std::size_t>(plan.assignment[static_cast<std::size_t>(i)]);
    phi[static_cast<std::size_t>(i)] = psi_free_moment(data.row(i), fold_fits[f], pair, kspec, h);
  }
  return phi;
}

EstimateResult estimate_psi(const Dataset& data, const TreatmentPair& pair,
                            const EstimatorConfig& config) {
  if (config.folds < 1) throw std::invalid_argument("fold count must be at least 1");
  if (data.n() < 2 * static_cast<Eigen::Index>(config.folds)) {
    throw std::invalid_argument("need at least two rows per fold");
  }
  const FoldPlan plan =
      FoldPlan::make(static_cast<std::size_t>(data.n()), config.folds, config.seed);
  return estimate_psi(data, pair, config, plan);
}

EstimateResult estimate_psi(const Dataset& data, const TreatmentPair& pair,
                            const EstimatorConfig& config, const FoldPlan& plan) {
  data.validate();
  config.nuisance.validate();
  check_pair(pair, data.treatment_dim());
  if (static_cast<Eigen::Index>(plan.assignment.size()) != data.n()) {
    throw std::invalid_argument("fold plan does not match the data");
  }
  if (data.n() < 2 * static_cast<Eigen::Index>(plan.folds)) {
    throw std::invalid_argument("need at least two rows per fold");
  }
  KernelSpec ks = config.kernel;
  ks.treatment_dim = static_cast<int>(data.treatment_dim());
  ks.validate();
  if (config.warn_outside_support) warn_outside_support(data, pair);

  const double h = config.fixed_bandwidth ? *config.fixed_bandwidth : data_bandwidth(data, ks);
  if (!(h > 0.0)) throw std::invalid_argument("bandwidth must be positive");

  const std::vector<NuisanceFit> fits = fit_fold_nuisances(data, plan, config);
  const std::vector<double> phi = cross_fitted_moments(data, fits, plan, pair, ks, h);

  EstimateResult result;
  result.per_fold = fold_means(phi, plan);
  result.psi_hat = stats::mean(result.per_fold);
  result.h_used = h;
  result.n = data.n();
  result.pair = pair;
  const double sd = data.n() > 1 ? stats::sample_sd(phi) : 0.0;
  result.se = sd / std::sqrt(static_cast<double>(data.n()));
  result.ci_lower = result.psi_hat - stats::z_975 * result.se;
  result.ci_upper = result.psi_hat + stats::z_975 * result.se;
  return result;
}

double estimate_psi_plugin(const Dataset& data, const TreatmentPair& pair,
                           const EstimatorConfig& config) {
  data.validate();
  config.nuisance.validate();
  check_pair(pair, data.treatment_dim());
  const NuisanceFit fit = apply_pattern(fit_nuisances(data, config.nuisance), config.pattern);
  double acc = 0.0;
  for (Eigen::Index i = 0; i < data.n(); ++i) {
    acc += fit.eta(pair.a, pair.a_prime, data.x.row(i).transpose());
  }
  return acc / static_cast<double>(data.n());
}

VarianceEstimate estimate_variance(const Dataset& data,
                                   const std::vector<NuisanceFit>& fold_fits,
                                   const FoldPlan& plan, const TreatmentPair& pair,
                                   const KernelSpec& kspec, double h, double psi_hat) {
  const std::vector<double> phi = cross_fitted_moments(data, fold_fits, plan, pair, kspec, h);
  // m(O; psi_hat) = phi - psi_hat; centering cancels in the sd.
  const double sd = phi.size() > 1 ? stats::sample_sd(phi) : 0.0;
  VarianceEstimate v;
  v.se = sd / std::sqrt(static_cast<double>(data.n()));
  v.ci_lower = psi_hat - stats::z_975 * v.se;
  v.ci_upper = psi_hat + stats::z_975 * v.se;
  return v;
}

BiasVariance theoretical_bias_variance(const DgpSpec& dgp, const TreatmentPair& pair,
                                       const KernelSpec& kspec, double h, std::size_t draws,
                                       std::uint64_t seed, int workers) {
  dgp.validate();
  kspec.validate();
  if (pair.a.size() != 1 || pair.a_prime.size() != 1) {
    throw std::invalid_argument("this data-generating process has a scalar treatment");
  }
  if (!(h > 0.0)) throw std::invalid_argument("bandwidth must be positive");
  if (draws == 0) throw std::invalid_argument("draw count must be positive");
  const double a = pair.a(0);
  const double ap = pair.a_prime(0);
  const KernelMoments km = kernel_moments(kspec);
  const double sd_a = std::sqrt(dgp.var_a);
  const double sd_m = std::sqrt(dgp.var_m);
  // Conditional variance of the outcome regression under the mediator law.
  const double m_slope = dgp.y_m + dgp.y_am * a;
  const double var_reg = m_slope * m_slope * dgp.var_m;

  const std::size_t chunk = 1 << 14;
  const std::size_t n_chunks = (draws + chunk - 1) / chunk;
  std::vector<double> bias_part(n_chunks, 0.0);
  std::vector<double> var_part(n_chunks, 0.0);
  parallel_for(n_chunks, workers, [&](std::size_t c) {
    auto eng = make_engine(derive_seed(seed, 0x626961735f766172ULL, c));
    std::normal_distribution<double> gauss(0.0, 1.0);
    const std::size_t lo = c * chunk;
    const std::size_t hi = std::min(draws, lo + chunk);
    double b_acc = 0.0;
    double v_acc = 0.0;
    for (std::size_t i = lo; i < hi; ++i) {
      // One observational draw of (X, A, M).
      const double x = gauss(eng);
      const double a_obs = dgp.a_x * x + sd_a * gauss(eng);
      const double m = dgp.mediator_mean(a_obs, x) + sd_m * gauss(eng);

      const double ratio = dgp.mediator_density(m, ap, x) / dgp.mediator_density(m, a, x);
      const double f_a_x = dgp.treatment_density(a, x);
      const double f_ap_x = dgp.treatment_density(ap, x);
      const double d2gamma = 0.0;  // outcome equation is affine in a
      const double t1 =
          ratio * (dgp.dgamma_da(m) * dgp.d_treatment_density_xm(a, x, m) / f_a_x +
                   0.5 * dgp.treatment_density_xm(a, x, m) / f_a_x * d2gamma);
      const double t2 = (dgp.gamma(a, m, x) - dgp.eta(a, ap, x)) * 0.5 *
                        dgp.d2_treatment_density_xm(ap, x, m) / f_ap_x;
      b_acc += t1 + t2;

      const double f_a_xm = dgp.treatment_density_xm(a, x, m);
      const double v1 = ratio * ratio * f_a_xm / (f_a_x * f_a_x) * dgp.var_y;
      const double v2 = var_reg / f_ap_x;
      v_acc += v1 + v2;
    }
    bias_part[c] = b_acc;
    var_part[c] = v_acc;
  });

  double b_total = 0.0;
  double v_total = 0.0;
  for (std::size_t c = 0; c < n_chunks; ++c) {
    b_total += bias_part[c];
    v_total += var_part[c];
  }
  BiasVariance out;
  out.bias = h * h * km.second_moment * b_total / static_cast<double>(draws);
  out.variance_leading = km.l2_norm * v_total / static_cast<double>(draws);
  return out;
}

}  // namespace ctmed
