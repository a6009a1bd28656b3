#include <doctest.h>

#include "ctmed/csv.hpp"
#include "ctmed/harness.hpp"
#include "ctmed/stats.hpp"

#include <cmath>
#include <random>
#include <stdexcept>
#include <vector>

using namespace ctmed;

namespace {

ExperimentSpec small_spec() {
  ExperimentSpec spec;
  spec.dgp.seed = 1;
  spec.n_grid = {80, 120};
  spec.pairs = {TreatmentPair::scalar(1.0, 0.0)};
  spec.reps = 6;
  spec.estimators = {EstimatorKind::TripleRobust, EstimatorKind::Plugin};
  spec.patterns = {MisspecPattern::None, MisspecPattern::Gamma};
  spec.base_seed = 99;
  return spec;
}

}  // namespace

TEST_SUITE_BEGIN("harness");

TEST_CASE("aggregation statistics") {
  const std::vector<double> v{1.0, 2.0, 3.0, 4.0};
  CHECK(stats::mean(v) == 2.5);
  CHECK(stats::sample_sd(v) == doctest::Approx(1.2909944487358056).epsilon(1e-15));
  CHECK(stats::population_sd(v) == doctest::Approx(1.118033988749895).epsilon(1e-15));

  const std::vector<double> skewed{0.0, 0.0, 3.0};
  CHECK(stats::skewness(skewed) == doctest::Approx(0.7071067811865475).epsilon(1e-12));
  const std::vector<double> bimodal{-1.0, 1.0, -1.0, 1.0};
  CHECK(stats::excess_kurtosis(bimodal) == doctest::Approx(-2.0).epsilon(1e-12));

  const std::vector<double> flat{2.0, 2.0, 2.0};
  CHECK(stats::sample_sd(flat) == 0.0);
  CHECK(stats::population_sd(flat) == 0.0);
  CHECK_THROWS_AS(stats::skewness(flat), std::invalid_argument);
  CHECK_THROWS_AS(stats::excess_kurtosis(flat), std::invalid_argument);
  CHECK_THROWS_AS(stats::mean(std::vector<double>{}), std::invalid_argument);

  // Gauss-Legendre integrates low-degree monomials exactly.
  const stats::Quadrature q = stats::gauss_legendre(16);
  double w_sum = 0.0;
  double x2 = 0.0;
  double x7 = 0.0;
  double x10 = 0.0;
  for (std::size_t i = 0; i < q.nodes.size(); ++i) {
    w_sum += q.weights[i];
    x2 += q.weights[i] * std::pow(q.nodes[i], 2);
    x7 += q.weights[i] * std::pow(q.nodes[i], 7);
    x10 += q.weights[i] * std::pow(q.nodes[i], 10);
  }
  CHECK(w_sum == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(x2 == doctest::Approx(2.0 / 3.0).epsilon(1e-14));
  CHECK(std::abs(x7) < 1e-15);
  CHECK(x10 == doctest::Approx(2.0 / 11.0).epsilon(1e-13));
}

TEST_CASE("spec validation") {
  ExperimentSpec spec = small_spec();
  CHECK_NOTHROW(spec.validate());
  spec.n_grid.clear();
  CHECK_THROWS_AS(spec.validate(), std::invalid_argument);
  spec = small_spec();
  spec.reps = 0;
  CHECK_THROWS_AS(spec.validate(), std::invalid_argument);
  spec = small_spec();
  spec.pairs.clear();
  CHECK_THROWS_AS(spec.validate(), std::invalid_argument);
  spec = small_spec();
  spec.estimators.clear();
  CHECK_THROWS_AS(spec.validate(), std::invalid_argument);
  spec = small_spec();
  spec.patterns.clear();
  CHECK_THROWS_AS(spec.validate(), std::invalid_argument);
  spec = small_spec();
  spec.n_grid = {8};  // below 2 * folds
  CHECK_THROWS_AS(spec.validate(), std::invalid_argument);
}

TEST_CASE("cell hash separates every identity component") {
  const TreatmentPair p10 = TreatmentPair::scalar(1.0, 0.0);
  const TreatmentPair p15 = TreatmentPair::scalar(1.5, 0.0);
  const TreatmentPair p01 = TreatmentPair::scalar(0.0, 1.0);
  const auto base = cell_hash(EstimatorKind::TripleRobust, 400, p10, MisspecPattern::None);
  CHECK(base == cell_hash(EstimatorKind::TripleRobust, 400, p10, MisspecPattern::None));
  CHECK(base != cell_hash(EstimatorKind::Plugin, 400, p10, MisspecPattern::None));
  CHECK(base != cell_hash(EstimatorKind::TripleRobust, 401, p10, MisspecPattern::None));
  CHECK(base != cell_hash(EstimatorKind::TripleRobust, 400, p15, MisspecPattern::None));
  CHECK(base != cell_hash(EstimatorKind::TripleRobust, 400, p01, MisspecPattern::None));
  CHECK(base != cell_hash(EstimatorKind::TripleRobust, 400, p10, MisspecPattern::Alpha));
}

TEST_CASE("single-replication cells report that replication verbatim") {
  ExperimentSpec spec = small_spec();
  spec.reps = 1;
  spec.n_grid = {100};
  spec.patterns = {MisspecPattern::None};
  const ExperimentReport report = run_experiment(spec);
  REQUIRE(report.cells.size() == 2);  // TR and plugin
  for (const CellReport& cell : report.cells) {
    REQUIRE(cell.reps_completed == 1);
    REQUIRE(cell.estimates.size() == 1);
    CHECK(cell.bias == cell.estimates[0] - cell.psi0);
    CHECK(cell.sd == 0.0);
    CHECK(cell.rmse == doctest::Approx(std::abs(cell.bias)).epsilon(1e-15));
    CHECK(std::isnan(cell.skew));
    CHECK(std::isnan(cell.kurtosis));
    if (cell.estimator == EstimatorKind::TripleRobust) {
      CHECK(cell.mean_se > 0.0);
      CHECK((cell.coverage == 0.0 || cell.coverage == 1.0));
    } else {
      CHECK(std::isnan(cell.mean_se));
      CHECK(std::isnan(cell.coverage));
    }
  }
}

TEST_CASE("rmse decomposition holds for every cell") {
  ExperimentSpec spec = small_spec();
  const ExperimentReport report = run_experiment(spec);
  REQUIRE(report.cells.size() == 8);
  for (const CellReport& cell : report.cells) {
    CAPTURE(estimator_name(cell.estimator));
    CAPTURE(cell.n);
    CAPTURE(pattern_name(cell.pattern));
    CHECK(cell.reps_completed == 6);
    CHECK(std::abs(cell.rmse * cell.rmse - (cell.bias * cell.bias + cell.sd * cell.sd)) < 1e-10);
    if (cell.estimator == EstimatorKind::TripleRobust) {
      CHECK(cell.coverage >= 0.0);
      CHECK(cell.coverage <= 1.0);
    }
    CHECK(cell.wall_ms >= 0.0);
  }
}

TEST_CASE("noiseless limit collapses bias and spread") {
  ExperimentSpec spec;
  spec.dgp.a_x = 0.0;
  spec.dgp.m_x = 0.0;
  spec.dgp.y_x = 0.0;
  spec.dgp.var_a = 1e-6;
  spec.dgp.var_m = 1e-6;
  spec.dgp.var_y = 1e-6;
  spec.n_grid = {400};
  // Evaluation points inside the shrunken treatment support.
  spec.pairs = {TreatmentPair::scalar(0.001, -0.001)};
  spec.reps = 10;
  spec.estimators = {EstimatorKind::TripleRobust};
  spec.patterns = {MisspecPattern::None};
  spec.base_seed = 7;
  const ExperimentReport report = run_experiment(spec);
  REQUIRE(report.cells.size() == 1);
  const CellReport& cell = report.cells[0];
  CHECK(cell.reps_completed == 10);
  CHECK(std::abs(cell.bias) < 0.01);
  CHECK(cell.sd < 0.01);
}

TEST_CASE("reports are deterministic and worker-count independent") {
  const ExperimentSpec spec = small_spec();
  const ExperimentReport r1 = run_experiment(spec, 1);
  const ExperimentReport r2 = run_experiment(spec, 1);
  const ExperimentReport r4 = run_experiment(spec, 4);
  const std::string csv1 = report_to_csv(r1, true);
  CHECK(csv1 == report_to_csv(r2, true));
  CHECK(csv1 == report_to_csv(r4, true));
  // Spot-check that the zero-wall variant really zeroes the timing column
  // and nothing else.
  CHECK(csv1.find(",0\n") != std::string::npos);
}

TEST_CASE("cells can be re-run in isolation") {
  ExperimentSpec wide = small_spec();
  wide.n_grid = {80, 120};
  const ExperimentReport full = run_experiment(wide);

  ExperimentSpec narrow = small_spec();
  narrow.n_grid = {120};
  const ExperimentReport part = run_experiment(narrow);

  // Every n=120 cell of the full grid appears identically in the narrow run.
  std::size_t matched = 0;
  for (const CellReport& cell : full.cells) {
    if (cell.n != 120) continue;
    for (const CellReport& other : part.cells) {
      if (other.estimator == cell.estimator && other.pattern == cell.pattern) {
        CHECK(other.estimates == cell.estimates);
        ++matched;
      }
    }
  }
  CHECK(matched == 4);
}

TEST_CASE("failed replications are recorded without aborting the run") {
  ExperimentSpec spec = small_spec();
  spec.n_grid = {80};
  spec.estimators = {EstimatorKind::TripleRobust};
  spec.patterns = {MisspecPattern::None};
  spec.reps = 4;
  // Passes validation but leaves the mediator regression with a residual
  // variance that is zero relative to the signal, so every fit fails.
  spec.dgp.var_m = 1e-30;
  const ExperimentReport report = run_experiment(spec);
  REQUIRE(report.cells.size() == 1);
  const CellReport& cell = report.cells[0];
  CHECK(cell.reps_requested == 4);
  CHECK(cell.reps_completed == 0);
  REQUIRE(cell.failures.size() == 4);
  for (const RepFailure& f : cell.failures) {
    CHECK_FALSE(f.message.empty());
    CHECK(f.seed != 0);
  }
  CHECK(std::isnan(cell.bias));
  CHECK(std::isnan(cell.rmse));
  CHECK(std::isnan(cell.coverage));
  // The CSV spells the undefined aggregates rather than crashing.
  const std::string csv = report_to_csv(report, true);
  CHECK(csv.find("nan") != std::string::npos);
}

TEST_CASE("normality check") {
  SUBCASE("seeded normal sample passes") {
    std::mt19937_64 eng(1234);
    std::normal_distribution<double> gauss(5.0, 2.0);
    std::vector<double> v;
    for (int i = 0; i < 300; ++i) v.push_back(gauss(eng));
    const NormalityCheck c = normality_check(v);
    CHECK(c.pass);
    CHECK(std::abs(c.skew) < 0.35);
    CHECK(std::abs(c.excess_kurtosis) < 0.8);
  }
  SUBCASE("exponential sample fails on skewness") {
    std::mt19937_64 eng(4321);
    std::exponential_distribution<double> expo(1.0);
    std::vector<double> v;
    for (int i = 0; i < 300; ++i) v.push_back(expo(eng));
    const NormalityCheck c = normality_check(v);
    CHECK_FALSE(c.pass);
    CHECK(c.skew > 1.5);
  }
  SUBCASE("degenerate input is an error") {
    CHECK_THROWS_AS(normality_check(std::vector<double>(300, 1.0)), std::invalid_argument);
    CHECK_THROWS_AS(normality_check(std::vector<double>{1.0, 2.0}), std::invalid_argument);
  }
}

TEST_CASE("harness names are stable identifiers") {
  CHECK(estimator_name(EstimatorKind::TripleRobust) == "triple_robust");
  CHECK(estimator_name(EstimatorKind::Plugin) == "plugin");
  CHECK(pattern_name(MisspecPattern::None) == "none");
  CHECK(pattern_name(MisspecPattern::Gamma) == "gamma");
  CHECK(pattern_name(MisspecPattern::Alpha) == "alpha");
  CHECK(pattern_name(MisspecPattern::Lambda) == "lambda");
  CHECK(pattern_name(MisspecPattern::GammaAlpha) == "gamma_alpha");
  CHECK(pattern_name(MisspecPattern::GammaLambda) == "gamma_lambda");
  CHECK(pattern_name(MisspecPattern::AlphaLambda) == "alpha_lambda");
}

TEST_CASE("report csv layout is fixed") {
  ExperimentSpec spec = small_spec();
  spec.reps = 2;
  spec.n_grid = {80};
  spec.estimators = {EstimatorKind::TripleRobust};
  spec.patterns = {MisspecPattern::AlphaLambda};
  const ExperimentReport report = run_experiment(spec);
  const std::string csv = report_to_csv(report, true);
  CHECK(csv.rfind("estimator,n,a,a_prime,pattern,bias,sd,rmse,mean_se,coverage,skew,kurtosis,"
                  "reps_completed,wall_ms\n",
                  0) == 0);
  CHECK(csv.find("\ntriple_robust,80,1,0,alpha_lambda,") != std::string::npos);
  CHECK(csv.back() == '\n');
}

TEST_SUITE_END();
