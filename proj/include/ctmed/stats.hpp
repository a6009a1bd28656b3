#pragma once

#include <cstddef>
#include <vector>

namespace ctmed::stats {

// Two-sided 97.5% standard normal quantile, used for 95% intervals.
inline constexpr double z_975 = 1.959963984540054;

double mean(const std::vector<double>& v);

// Denominator n - 1.
double sample_sd(const std::vector<double>& v);

// Denominator n. Used by the simulation harness so that
// rmse^2 = bias^2 + sd^2 holds exactly.
double population_sd(const std::vector<double>& v);

// Standardized third moment m3 / m2^(3/2) (population moments).
double skewness(const std::vector<double>& v);

// m4 / m2^2 - 3 (population moments).
double excess_kurtosis(const std::vector<double>& v);

// Gauss-Legendre nodes and weights on [-1, 1].
struct Quadrature {
  std::vector<double> nodes;
  std::vector<double> weights;
};
Quadrature gauss_legendre(int n);

// Standard normal density.
double normal_pdf(double z);
// Density of N(mean, var) at x.
double normal_pdf(double x, double mean, double var);

}  // namespace ctmed::stats
