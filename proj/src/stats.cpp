#include "ctmed/stats.hpp"

#include <cmath>
#include <stdexcept>

namespace ctmed::stats {

namespace {
constexpr double kInvSqrt2Pi = 0.3989422804014327;

// Central moment of order p.
double central_moment(const std::vector<double>& v, double mu, int p) {
  double s = 0.0;
  for (double x : v) s += std::pow(x - mu, p);
  return s / static_cast<double>(v.size());
}

// A constant list has zero spread; detecting it up front keeps the sd
// routines from reporting the rounding noise of the mean instead.
bool is_constant(const std::vector<double>& v) {
  for (double x : v) {
    if (x != v.front()) return false;
  }
  return true;
}
}  // namespace

double mean(const std::vector<double>& v) {
  if (v.empty()) throw std::invalid_argument("mean of empty list");
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double sample_sd(const std::vector<double>& v) {
  if (v.size() < 2) throw std::invalid_argument("sample sd needs at least two values");
  if (is_constant(v)) return 0.0;
  const double mu = mean(v);
  double s = 0.0;
  for (double x : v) s += (x - mu) * (x - mu);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

double population_sd(const std::vector<double>& v) {
  if (v.empty()) throw std::invalid_argument("population sd of empty list");
  if (is_constant(v)) return 0.0;
  const double mu = mean(v);
  double s = 0.0;
  for (double x : v) s += (x - mu) * (x - mu);
  return std::sqrt(s / static_cast<double>(v.size()));
}

double skewness(const std::vector<double>& v) {
  if (v.size() < 2) throw std::invalid_argument("skewness needs at least two values");
  if (is_constant(v)) throw std::invalid_argument("skewness of a constant list");
  const double mu = mean(v);
  const double m2 = central_moment(v, mu, 2);
  if (m2 <= 0.0) throw std::invalid_argument("skewness of a constant list");
  return central_moment(v, mu, 3) / std::pow(m2, 1.5);
}

double excess_kurtosis(const std::vector<double>& v) {
  if (v.size() < 2) throw std::invalid_argument("kurtosis needs at least two values");
  if (is_constant(v)) throw std::invalid_argument("kurtosis of a constant list");
  const double mu = mean(v);
  const double m2 = central_moment(v, mu, 2);
  if (m2 <= 0.0) throw std::invalid_argument("kurtosis of a constant list");
  return central_moment(v, mu, 4) / (m2 * m2) - 3.0;
}

Quadrature gauss_legendre(int n) {
  if (n < 1) throw std::invalid_argument("quadrature order must be positive");
  Quadrature q;
  q.nodes.assign(n, 0.0);
  q.weights.assign(n, 0.0);
  const int half = (n + 1) / 2;
  for (int i = 0; i < half; ++i) {
    // Newton iteration from the standard cosine starting guess.
    double z = std::cos(M_PI * (i + 0.75) / (n + 0.5));
    double deriv = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0;
      double p1 = 0.0;
      for (int j = 0; j < n; ++j) {
        const double p2 = p1;
        p1 = p0;
        p0 = ((2.0 * j + 1.0) * z * p1 - j * p2) / (j + 1.0);
      }
      deriv = n * (z * p0 - p1) / (z * z - 1.0);
      const double step = p0 / deriv;
      z -= step;
      if (std::abs(step) < 1e-15) break;
    }
    q.nodes[i] = -z;
    q.nodes[n - 1 - i] = z;
    q.weights[i] = 2.0 / ((1.0 - z * z) * deriv * deriv);
    q.weights[n - 1 - i] = q.weights[i];
  }
  if (n % 2 == 1) q.nodes[n / 2] = 0.0;
  return q;
}

double normal_pdf(double z) { return kInvSqrt2Pi * std::exp(-0.5 * z * z); }

double normal_pdf(double x, double mean, double var) {
  const double z = (x - mean);
  return kInvSqrt2Pi / std::sqrt(var) * std::exp(-0.5 * z * z / var);
}

}  // namespace ctmed::stats
