#include <doctest.h>

#include "ctmed/errors.hpp"
#include "ctmed/estimator.hpp"
#include "ctmed/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>
#include <stdexcept>
#include <vector>

using namespace ctmed;

namespace {

Eigen::VectorXd vec1(double v) { return Eigen::VectorXd::Constant(1, v); }

EstimatorConfig quiet_config() {
  EstimatorConfig config;
  config.warn_outside_support = false;
  return config;
}

// Covariate-free sample: A ~ N(0,1), M = 0.5 + A + noise, Y = 1 + A + M + noise.
Dataset no_covariate_data(int n, std::uint64_t seed) {
  std::mt19937_64 eng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Dataset d;
  d.a.resize(n, 1);
  d.m.resize(n);
  d.x.resize(n, 0);
  d.y.resize(n);
  for (int i = 0; i < n; ++i) {
    d.a(i, 0) = gauss(eng);
    d.m(i) = 0.5 + d.a(i, 0) + gauss(eng);
    d.y(i) = 1.0 + d.a(i, 0) + d.m(i) + gauss(eng);
  }
  return d;
}

}  // namespace

TEST_SUITE_BEGIN("estimator");

TEST_CASE("fold plan partitions the rows into near-equal blocks") {
  const FoldPlan plan = FoldPlan::make(103, 5, 7);
  REQUIRE(plan.assignment.size() == 103);
  std::vector<int> counts(5, 0);
  for (int f : plan.assignment) {
    REQUIRE(f >= 0);
    REQUIRE(f < 5);
    ++counts[static_cast<std::size_t>(f)];
  }
  // 103 = 5 * 20 + 3: three folds of 21, two of 20.
  std::sort(counts.begin(), counts.end());
  CHECK(counts == std::vector<int>{20, 20, 21, 21, 21});

  std::set<Eigen::Index> seen;
  for (int f = 0; f < 5; ++f) {
    const auto rows = plan.fold_rows(f);
    const auto comp = plan.complement_rows(f);
    CHECK(rows.size() + comp.size() == 103);
    seen.insert(rows.begin(), rows.end());
  }
  CHECK(seen.size() == 103);
}

TEST_CASE("fold plan is seed-deterministic") {
  const FoldPlan p1 = FoldPlan::make(200, 5, 11);
  const FoldPlan p2 = FoldPlan::make(200, 5, 11);
  CHECK(p1.assignment == p2.assignment);
  const FoldPlan p3 = FoldPlan::make(200, 5, 12);
  CHECK(p1.assignment != p3.assignment);
}

TEST_CASE("single-fold plan keeps everything together") {
  const FoldPlan plan = FoldPlan::make(10, 1, 3);
  CHECK(std::all_of(plan.assignment.begin(), plan.assignment.end(),
                    [](int f) { return f == 0; }));
  CHECK(plan.fold_rows(0).size() == 10);
  CHECK(plan.complement_rows(0).empty());
}

TEST_CASE("fold plan rejects impossible shapes") {
  CHECK_THROWS_AS(FoldPlan::make(10, 0, 1), std::invalid_argument);
  CHECK_THROWS_AS(FoldPlan::make(3, 5, 1), std::invalid_argument);
}

TEST_CASE("data-driven bandwidth is the rate rule scaled by the treatment sd") {
  DgpSpec spec;
  spec.seed = 50;
  const Dataset data = generate(spec, 600);
  KernelSpec ks;
  ks.treatment_dim = 1;
  const double mu = data.a.col(0).mean();
  const double sd = std::sqrt((data.a.col(0).array() - mu).square().sum() / (600.0 - 1.0));
  CHECK(data_bandwidth(data, ks) ==
        doctest::Approx(bandwidth(ks, 600) * sd).epsilon(1e-14));
}

TEST_CASE("moment function is affine in psi with slope minus one") {
  DgpSpec spec;
  spec.seed = 51;
  const Dataset data = generate(spec, 400);
  const NuisanceFit fit = fit_nuisances(data, NuisanceConfig{});
  const TreatmentPair pair = TreatmentPair::scalar(1.0, 0.0);
  KernelSpec ks;
  const double h = 0.4;
  for (Eigen::Index i : {0, 5, 17}) {
    const Observation obs = data.row(i);
    const double at_zero = moment_function(obs, fit, pair, 0.0, ks, h);
    for (double psi : {-3.0, 0.25, 10.0}) {
      CHECK(moment_function(obs, fit, pair, psi, ks, h) == at_zero - psi);
    }
  }
}

TEST_CASE("compact support kills both weighting terms") {
  DgpSpec spec;
  spec.seed = 52;
  const Dataset data = generate(spec, 300);
  const NuisanceFit fit = fit_nuisances(data, NuisanceConfig{});
  const TreatmentPair pair = TreatmentPair::scalar(0.0, 1.0);
  KernelSpec ks;  // Epanechnikov
  const double h = 0.5;
  Observation obs = data.row(4);
  obs.a = vec1(100.0);  // far outside both windows
  obs.y = -77.0;        // outcome cannot matter
  const double eta = fit.eta(pair.a, pair.a_prime, obs.x);
  CHECK(moment_function(obs, fit, pair, 0.0, ks, h) == eta);
  CHECK(moment_function(obs, fit, pair, eta, ks, h) == 0.0);
}

TEST_CASE("all residuals vanishing zeroes the moment at psi equal to eta") {
  DgpSpec spec;
  spec.seed = 53;
  const Dataset data = generate(spec, 300);
  const NuisanceFit fit = fit_nuisances(data, NuisanceConfig{});
  const TreatmentPair pair = TreatmentPair::scalar(0.4, -0.2);
  KernelSpec ks;
  const double h = 0.8;
  // Pick m so the fitted regression at (pair.a, m, x) equals eta, and set
  // y to that same value: every residual in the moment vanishes.
  Observation obs = data.row(10);
  const double eta = fit.eta(pair.a, pair.a_prime, obs.x);
  const double g0 = fit.gamma(pair.a, 0.0, obs.x);
  const double g1 = fit.gamma(pair.a, 1.0, obs.x);
  const double slope = g1 - g0;
  REQUIRE(std::abs(slope) > 1e-6);
  obs.m = (eta - g0) / slope;
  obs.y = fit.gamma(pair.a, obs.m, obs.x);
  // The observation sits inside both kernel windows, so the weights are live.
  CHECK(std::abs(obs.a(0) - pair.a(0)) < h);
  CHECK(std::abs(moment_function(obs, fit, pair, eta, ks, h)) < 1e-9);
}

TEST_CASE("fold solve returns the root of the averaged moment") {
  DgpSpec spec;
  spec.seed = 54;
  const Dataset data = generate(spec, 500);
  const NuisanceFit fit = fit_nuisances(data, NuisanceConfig{});
  const TreatmentPair pair = TreatmentPair::scalar(1.0, 0.0);
  KernelSpec ks;
  const double h = data_bandwidth(data, ks);
  const double psi = solve_fold_psi(data, fit, pair, ks, h);
  double acc = 0.0;
  for (Eigen::Index i = 0; i < data.n(); ++i) {
    acc += moment_function(data.row(i), fit, pair, psi, ks, h);
  }
  CHECK(std::abs(acc / static_cast<double>(data.n())) < 1e-10);
}

TEST_CASE("single-row fold outside the windows solves to eta") {
  DgpSpec spec;
  spec.seed = 55;
  const Dataset train = generate(spec, 300);
  const NuisanceFit fit = fit_nuisances(train, NuisanceConfig{});
  const TreatmentPair pair = TreatmentPair::scalar(0.0, 0.5);
  KernelSpec ks;
  Dataset fold = train.select({0});
  fold.a(0, 0) = 50.0;
  const double expect = fit.eta(pair.a, pair.a_prime, fold.row(0).x);
  CHECK(solve_fold_psi(fold, fit, pair, ks, 0.5) == expect);
}

TEST_CASE("estimate averages the per-fold roots") {
  DgpSpec spec;
  spec.seed = 56;
  const Dataset data = generate(spec, 400);
  EstimatorConfig config = quiet_config();
  config.seed = 5;
  const EstimateResult r = estimate_psi(data, TreatmentPair::scalar(1.0, 0.0), config);
  REQUIRE(r.per_fold.size() == 5);
  CHECK(r.psi_hat == stats::mean(r.per_fold));
  CHECK(r.n == 400);
  CHECK(r.ci_lower == doctest::Approx(r.psi_hat - 1.959963984540054 * r.se).epsilon(1e-15));
  CHECK(r.ci_upper == doctest::Approx(r.psi_hat + 1.959963984540054 * r.se).epsilon(1e-15));
}

TEST_CASE("per-fold roots match solve_fold_psi under the same fits") {
  DgpSpec spec;
  spec.seed = 57;
  const Dataset data = generate(spec, 300);
  EstimatorConfig config = quiet_config();
  config.folds = 3;
  config.seed = 8;
  const FoldPlan plan = FoldPlan::make(300, 3, 8);
  const EstimateResult r = estimate_psi(data, TreatmentPair::scalar(1.0, 0.0), config, plan);
  const auto fits = fit_fold_nuisances(data, plan, config);
  const double h = data_bandwidth(data, config.kernel);
  for (int f = 0; f < 3; ++f) {
    const Dataset fold = data.select(plan.fold_rows(f));
    const double direct = solve_fold_psi(fold, fits[static_cast<std::size_t>(f)],
                                         TreatmentPair::scalar(1.0, 0.0), config.kernel, h);
    CHECK(r.per_fold[static_cast<std::size_t>(f)] == doctest::Approx(direct).epsilon(1e-12));
  }
}

TEST_CASE("shape and bandwidth contracts") {
  DgpSpec spec;
  spec.seed = 58;
  const Dataset data = generate(spec, 200);
  EstimatorConfig config = quiet_config();

  SUBCASE("too few rows per fold") {
    const Dataset small = data.select({0, 1, 2, 3, 4, 5, 6, 7, 8});
    CHECK_THROWS_AS(estimate_psi(small, TreatmentPair::scalar(1.0, 0.0), config),
                    std::invalid_argument);
  }
  SUBCASE("pair dimension mismatch") {
    TreatmentPair pair;
    pair.a = Eigen::VectorXd::Zero(2);
    pair.a_prime = Eigen::VectorXd::Zero(2);
    CHECK_THROWS_AS(estimate_psi(data, pair, config), std::invalid_argument);
  }
  SUBCASE("fixed bandwidth override is honored") {
    config.fixed_bandwidth = 0.37;
    const EstimateResult r = estimate_psi(data, TreatmentPair::scalar(1.0, 0.0), config);
    CHECK(r.h_used == 0.37);
    config.fixed_bandwidth = -1.0;
    CHECK_THROWS_AS(estimate_psi(data, TreatmentPair::scalar(1.0, 0.0), config),
                    std::invalid_argument);
  }
  SUBCASE("default bandwidth is the data-driven one") {
    const EstimateResult r = estimate_psi(data, TreatmentPair::scalar(1.0, 0.0), config);
    CHECK(r.h_used == data_bandwidth(data, config.kernel));
  }
}

TEST_CASE("cross-fitted estimate is consistent for the closed-form target") {
  DgpSpec spec;
  spec.seed = 59;
  const TreatmentPair pair = TreatmentPair::scalar(1.0, 0.0);
  const double psi0 = oracle_psi(spec, pair);

  SUBCASE("five folds") {
    const Dataset data = generate(spec, 4000);
    EstimatorConfig config = quiet_config();
    config.seed = 21;
    const EstimateResult r = estimate_psi(data, pair, config);
    CHECK(std::abs(r.psi_hat - psi0) < 3.0 * r.se);
    CHECK(r.se > 0.0);
    CHECK(r.se < 0.5);
  }
  SUBCASE("debug mode without sample splitting") {
    const Dataset data = generate(spec, 4000, 60);
    EstimatorConfig config = quiet_config();
    config.folds = 1;
    const EstimateResult r = estimate_psi(data, pair, config);
    CHECK(r.per_fold.size() == 1);
    CHECK(std::abs(r.psi_hat - psi0) < 3.0 * r.se);
  }
}

TEST_CASE("row order does not change the estimate given the same assignment") {
  DgpSpec spec;
  spec.seed = 61;
  const Dataset data = generate(spec, 500);
  const TreatmentPair pair = TreatmentPair::scalar(1.0, 0.0);
  EstimatorConfig config = quiet_config();
  config.fixed_bandwidth = 0.35;
  const FoldPlan plan = FoldPlan::make(500, 5, 9);
  const EstimateResult base = estimate_psi(data, pair, config, plan);

  std::vector<Eigen::Index> perm(500);
  std::iota(perm.begin(), perm.end(), Eigen::Index{0});
  std::mt19937_64 eng(4);
  std::shuffle(perm.begin(), perm.end(), eng);
  const Dataset shuffled = data.select(perm);
  FoldPlan moved = plan;
  for (std::size_t i = 0; i < perm.size(); ++i) {
    moved.assignment[i] = plan.assignment[static_cast<std::size_t>(perm[i])];
  }
  const EstimateResult out = estimate_psi(shuffled, pair, config, moved);
  CHECK(out.psi_hat == doctest::Approx(base.psi_hat).epsilon(1e-12));
  std::vector<double> f1 = base.per_fold;
  std::vector<double> f2 = out.per_fold;
  std::sort(f1.begin(), f1.end());
  std::sort(f2.begin(), f2.end());
  for (std::size_t f = 0; f < f1.size(); ++f) {
    CHECK(f1[f] == doctest::Approx(f2[f]).epsilon(1e-12));
  }
}

TEST_CASE("plugin estimate") {
  SUBCASE("constant fitted regression returns the constant") {
    std::mt19937_64 eng(300);
    std::uniform_real_distribution<double> unit(-2.0, 2.0);
    Dataset d;
    const int n = 60;
    d.a.resize(n, 1);
    d.m.resize(n);
    d.x.resize(n, 1);
    d.y.resize(n);
    for (int i = 0; i < n; ++i) {
      d.a(i, 0) = unit(eng);
      d.m(i) = unit(eng);
      d.x(i, 0) = unit(eng);
      d.y(i) = 7.0;
    }
    const double v = estimate_psi_plugin(d, TreatmentPair::scalar(1.0, 0.0), quiet_config());
    CHECK(v == doctest::Approx(7.0).epsilon(1e-6));
  }
  SUBCASE("tracks the closed-form target under correct models") {
    DgpSpec spec;
    spec.seed = 62;
    const Dataset data = generate(spec, 4000);
    const TreatmentPair pair = TreatmentPair::scalar(1.0, 0.0);
    const double v = estimate_psi_plugin(data, pair, quiet_config());
    CHECK(std::abs(v - oracle_psi(spec, pair)) < 0.1);
  }
  SUBCASE("misspecified regression leaves a visible bias") {
    DgpSpec spec;
    spec.seed = 63;
    const Dataset data = generate(spec, 4000);
    const TreatmentPair pair = TreatmentPair::scalar(1.0, 0.0);
    EstimatorConfig config = quiet_config();
    config.pattern = MisspecPattern::Gamma;
    const double v = estimate_psi_plugin(data, pair, config);
    // Intercept-only regression collapses the plugin to the sample outcome
    // mean, far from psi0 when the direct path is strong.
    CHECK(std::abs(v - oracle_psi(spec, pair)) > 0.5);
  }
}

TEST_CASE("variance estimate") {
  SUBCASE("identical moment values give a degenerate interval") {
    const Dataset data = no_covariate_data(100, 6);
    EstimatorConfig config = quiet_config();
    config.fixed_bandwidth = 0.5;
    config.folds = 1;
    // Both evaluation points sit far outside the sample, so with a compact
    // kernel and a single shared fit every moment value collapses to the
    // same covariate-free eta constant.
    const TreatmentPair pair = TreatmentPair::scalar(50.0, 60.0);
    const FoldPlan plan = FoldPlan::make(100, 1, 2);
    const auto fits = fit_fold_nuisances(data, plan, config);
    const EstimateResult r = estimate_psi(data, pair, config, plan);
    const VarianceEstimate v =
        estimate_variance(data, fits, plan, pair, config.kernel, 0.5, r.psi_hat);
    CHECK(v.se == 0.0);
    CHECK(v.ci_lower == r.psi_hat);
    CHECK(v.ci_upper == r.psi_hat);
  }
  SUBCASE("se is the sample sd of the moment values over root n") {
    DgpSpec spec;
    spec.seed = 64;
    const Dataset data = generate(spec, 600);
    EstimatorConfig config = quiet_config();
    const TreatmentPair pair = TreatmentPair::scalar(1.0, 0.0);
    const FoldPlan plan = FoldPlan::make(600, 5, 3);
    const auto fits = fit_fold_nuisances(data, plan, config);
    const double h = data_bandwidth(data, config.kernel);
    const auto phi = cross_fitted_moments(data, fits, plan, pair, config.kernel, h);
    const VarianceEstimate v = estimate_variance(data, fits, plan, pair, config.kernel, h, 0.0);
    CHECK(v.se == doctest::Approx(stats::sample_sd(phi) / std::sqrt(600.0)).epsilon(1e-12));
  }
  SUBCASE("reported se calibrates the replication spread") {
    DgpSpec spec;
    const TreatmentPair pair = TreatmentPair::scalar(1.0, 0.0);
    const int reps = 500;
    std::vector<double> estimates;
    std::vector<double> ses;
    for (int r = 0; r < reps; ++r) {
      const Dataset data = generate(spec, 500, 9000 + static_cast<std::uint64_t>(r));
      EstimatorConfig config = quiet_config();
      config.seed = static_cast<std::uint64_t>(r);
      const EstimateResult res = estimate_psi(data, pair, config);
      estimates.push_back(res.psi_hat);
      ses.push_back(res.se);
    }
    const double ratio = stats::sample_sd(estimates) / stats::mean(ses);
    CHECK(ratio > 0.8);
    CHECK(ratio < 1.25);
  }
}

TEST_CASE("asymptotic bias and variance constants") {
  DgpSpec spec;
  const TreatmentPair pair = TreatmentPair::scalar(1.0, 0.0);
  KernelSpec gaussian;
  gaussian.family = KernelFamily::Gaussian;

  SUBCASE("bias scales exactly as h squared at a fixed seed") {
    const BiasVariance b1 = theoretical_bias_variance(spec, pair, gaussian, 0.4, 200000, 1);
    const BiasVariance b2 = theoretical_bias_variance(spec, pair, gaussian, 0.2, 200000, 1);
    CHECK(b1.bias / b2.bias == doctest::Approx(4.0).epsilon(1e-12));
    CHECK(b1.variance_leading == b2.variance_leading);
  }
  SUBCASE("halving h quarters the bias across independent draws") {
    const BiasVariance b1 = theoretical_bias_variance(spec, pair, gaussian, 0.4, 1000000, 101);
    const BiasVariance b2 = theoretical_bias_variance(spec, pair, gaussian, 0.2, 1000000, 202);
    CHECK(b1.bias / b2.bias == doctest::Approx(4.0).epsilon(0.1));
  }
  SUBCASE("kernel constants factor out") {
    KernelSpec epan;  // defaults to the compact kernel
    const BiasVariance bg = theoretical_bias_variance(spec, pair, gaussian, 0.3, 100000, 5);
    const BiasVariance be = theoretical_bias_variance(spec, pair, epan, 0.3, 100000, 5);
    const KernelMoments mg = kernel_moments(gaussian);
    const KernelMoments me = kernel_moments(epan);
    CHECK(be.bias / bg.bias == doctest::Approx(me.second_moment / mg.second_moment).epsilon(1e-12));
    CHECK(be.variance_leading / bg.variance_leading ==
          doctest::Approx(me.l2_norm / mg.l2_norm).epsilon(1e-12));
  }
  SUBCASE("variance constant grows with the outcome noise") {
    DgpSpec low = spec;
    low.var_y = 0.5;
    DgpSpec high = spec;
    high.var_y = 1.5;
    const BiasVariance bl = theoretical_bias_variance(low, pair, gaussian, 0.3, 100000, 6);
    const BiasVariance bh = theoretical_bias_variance(high, pair, gaussian, 0.3, 100000, 6);
    CHECK(bh.variance_leading > bl.variance_leading);
  }
  SUBCASE("matches an independent quadrature evaluation of the expectation") {
    // The outcome equation is affine in a, so the curvature term drops and
    // the integrand reduces to the slope and centering pieces. Integrate it
    // against the joint law of (X, M) with a tensor quadrature instead of
    // Monte Carlo.
    const double a = 1.0;
    const double ap = 0.0;
    const double h = 0.3;
    const stats::Quadrature q = stats::gauss_legendre(160);
    const double var_m_marg = spec.m_a * spec.m_a * spec.var_a + spec.var_m;
    const double sd_m_marg = std::sqrt(var_m_marg);
    double expect = 0.0;
    for (std::size_t ix = 0; ix < q.nodes.size(); ++ix) {
      const double x = 8.0 * q.nodes[ix];
      const double wx = 8.0 * q.weights[ix] * stats::normal_pdf(x, 0.0, 1.0);
      const double m_mean = spec.m0 + (spec.m_a * spec.a_x + spec.m_x) * x;
      double inner = 0.0;
      for (std::size_t im = 0; im < q.nodes.size(); ++im) {
        const double m = m_mean + 8.0 * sd_m_marg * q.nodes[im];
        const double wm =
            8.0 * sd_m_marg * q.weights[im] * stats::normal_pdf(m, m_mean, var_m_marg);
        const double ratio = spec.mediator_density(m, ap, x) / spec.mediator_density(m, a, x);
        const double t1 =
            ratio * spec.dgamma_da(m) * spec.d_treatment_density_xm(a, x, m) /
            spec.treatment_density(a, x);
        const double t2 = (spec.gamma(a, m, x) - spec.eta(a, ap, x)) * 0.5 *
                          spec.d2_treatment_density_xm(ap, x, m) /
                          spec.treatment_density(ap, x);
        inner += wm * (t1 + t2);
      }
      expect += wx * inner;
    }
    const double quad_bias = h * h * kernel_moments(gaussian).second_moment * expect;
    const BiasVariance mc = theoretical_bias_variance(spec, pair, gaussian, h, 4000000, 77);
    CHECK(std::abs(mc.bias - quad_bias) < 1e-3);
  }
}

TEST_SUITE_END();
