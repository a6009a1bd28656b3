#include "ctmed/dgp.hpp"

#include "ctmed/parallel.hpp"
#include "ctmed/rng.hpp"
#include "ctmed/stats.hpp"

#include <cmath>
#include <random>
#include <stdexcept>
#include <vector>

namespace ctmed {

void DgpSpec::validate() const {
  if (!(var_a > 0.0)) throw std::invalid_argument("treatment noise variance must be positive");
  if (!(var_m > 0.0)) throw std::invalid_argument("mediator noise variance must be positive");
  if (var_y < 0.0) throw std::invalid_argument("outcome noise variance must be non-negative");
}

double DgpSpec::gamma(double a, double m, double x) const {
  return y0 + y_a * a + y_m * m + y_x * x + y_am * a * m;
}

double DgpSpec::dgamma_da(double m) const { return y_a + y_am * m; }

double DgpSpec::mediator_mean(double a, double x) const { return m0 + m_a * a + m_x * x; }

double DgpSpec::mediator_density(double m, double a, double x) const {
  return stats::normal_pdf(m, mediator_mean(a, x), var_m);
}

double DgpSpec::treatment_density(double a, double x) const {
  return stats::normal_pdf(a, a_x * x, var_a);
}

void DgpSpec::treatment_given_xm(double x, double m, double& mean, double& var) const {
  // Gaussian posterior of A given X and M = m0 + m_a A + m_x X + noise.
  if (m_a == 0.0) {
    mean = a_x * x;
    var = var_a;
    return;
  }
  const double precision = 1.0 / var_a + m_a * m_a / var_m;
  var = 1.0 / precision;
  mean = var * (a_x * x / var_a + m_a * (m - m0 - m_x * x) / var_m);
}

double DgpSpec::treatment_density_xm(double a, double x, double m) const {
  double mean = 0.0;
  double var = 0.0;
  treatment_given_xm(x, m, mean, var);
  return stats::normal_pdf(a, mean, var);
}

double DgpSpec::d_treatment_density_xm(double a, double x, double m) const {
  double mean = 0.0;
  double var = 0.0;
  treatment_given_xm(x, m, mean, var);
  const double f = stats::normal_pdf(a, mean, var);
  return -(a - mean) / var * f;
}

double DgpSpec::d2_treatment_density_xm(double a, double x, double m) const {
  double mean = 0.0;
  double var = 0.0;
  treatment_given_xm(x, m, mean, var);
  const double f = stats::normal_pdf(a, mean, var);
  const double z = (a - mean);
  return (z * z / (var * var) - 1.0 / var) * f;
}

double DgpSpec::d2_treatment_density(double a, double x) const {
  const double f = stats::normal_pdf(a, a_x * x, var_a);
  const double z = a - a_x * x;
  return (z * z / (var_a * var_a) - 1.0 / var_a) * f;
}

double DgpSpec::eta(double a, double a_prime, double x) const {
  return y0 + y_a * a + y_x * x + (y_m + y_am * a) * mediator_mean(a_prime, x);
}

Dataset generate(const DgpSpec& spec, std::size_t n) { return generate(spec, n, spec.seed); }

Dataset generate(const DgpSpec& spec, std::size_t n, std::uint64_t seed) {
  spec.validate();
  if (n == 0) throw std::invalid_argument("sample size must be positive");
  Dataset d;
  const Eigen::Index rows = static_cast<Eigen::Index>(n);
  d.a.resize(rows, 1);
  d.m.resize(rows);
  d.x.resize(rows, 1);
  d.y.resize(rows);
  auto eng = make_engine(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const double sd_a = std::sqrt(spec.var_a);
  const double sd_m = std::sqrt(spec.var_m);
  const double sd_y = std::sqrt(spec.var_y);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const double x = gauss(eng);
    const double a = spec.a_x * x + sd_a * gauss(eng);
    const double m = spec.mediator_mean(a, x) + sd_m * gauss(eng);
    const double y = spec.gamma(a, m, x) + (spec.var_y > 0.0 ? sd_y * gauss(eng) : 0.0);
    d.x(i, 0) = x;
    d.a(i, 0) = a;
    d.m(i) = m;
    d.y(i) = y;
  }
  return d;
}

namespace {
void require_scalar_pair(const TreatmentPair& pair) {
  if (pair.a.size() != 1 || pair.a_prime.size() != 1) {
    throw std::invalid_argument("this data-generating process has a scalar treatment");
  }
}
}  // namespace

double oracle_psi(const DgpSpec& spec, const TreatmentPair& pair) {
  require_scalar_pair(pair);
  const double a = pair.a(0);
  const double ap = pair.a_prime(0);
  // E over X of eta(a, a', X); X has mean zero.
  return spec.y0 + spec.y_a * a + (spec.y_m + spec.y_am * a) * (spec.m0 + spec.m_a * ap);
}

double oracle_psi_mc(const DgpSpec& spec, const TreatmentPair& pair, std::size_t draws,
                     std::uint64_t seed, int workers) {
  spec.validate();
  require_scalar_pair(pair);
  if (draws == 0) throw std::invalid_argument("oracle_psi_mc needs a positive draw count");
  const double a = pair.a(0);
  const double ap = pair.a_prime(0);
  const double sd_m = std::sqrt(spec.var_m);
  const double sd_y = std::sqrt(spec.var_y);

  // Counterfactual simulation: draw X and the mediator under a', then
  // evaluate the outcome equation under a with fresh outcome noise.
  const std::size_t chunk = 1 << 14;
  const std::size_t n_chunks = (draws + chunk - 1) / chunk;
  std::vector<double> partial(n_chunks, 0.0);
  parallel_for(n_chunks, workers, [&](std::size_t c) {
    auto eng = make_engine(derive_seed(seed, 0x6f7261636c65ULL, c));
    std::normal_distribution<double> gauss(0.0, 1.0);
    const std::size_t lo = c * chunk;
    const std::size_t hi = std::min(draws, lo + chunk);
    double s = 0.0;
    for (std::size_t i = lo; i < hi; ++i) {
      const double x = gauss(eng);
      const double m = spec.mediator_mean(ap, x) + sd_m * gauss(eng);
      const double ey = spec.var_y > 0.0 ? sd_y * gauss(eng) : 0.0;
      s += spec.gamma(a, m, x) + ey;
    }
    partial[c] = s;
  });
  double total = 0.0;
  for (double s : partial) total += s;
  return total / static_cast<double>(draws);
}

EffectTruth oracle_effects(const DgpSpec& spec, const TreatmentPair& pair) {
  require_scalar_pair(pair);
  const double a = pair.a(0);
  const double ap = pair.a_prime(0);
  const auto psi = [&](double t, double tp) {
    return oracle_psi(spec, TreatmentPair::scalar(t, tp));
  };
  EffectTruth t;
  t.nde = psi(a, ap) - psi(ap, ap);
  t.nie = psi(a, a) - psi(a, ap);
  t.ace = t.nde + t.nie;
  return t;
}

}  // namespace ctmed
