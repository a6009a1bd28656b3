#include "ctmed/kernel.hpp"

#include <cmath>
#include <stdexcept>

namespace ctmed {

namespace {
constexpr double kInvSqrt2Pi = 0.3989422804014327;
constexpr double kInvSqrtPi = 0.5641895835477563;
}  // namespace

void KernelSpec::validate() const {
  if (!(bandwidth_constant > 0.0)) {
    throw std::invalid_argument("kernel bandwidth constant must be positive");
  }
  if (treatment_dim < 1) {
    throw std::invalid_argument("kernel treatment dimension must be at least 1");
  }
}

double kernel_value(const KernelSpec& spec, double u) {
  switch (spec.family) {
    case KernelFamily::Gaussian:
      return kInvSqrt2Pi * std::exp(-0.5 * u * u);
    case KernelFamily::Epanechnikov:
      return std::abs(u) <= 1.0 ? 0.75 * (1.0 - u * u) : 0.0;
  }
  throw std::invalid_argument("unknown kernel family");
}

double product_kernel(const KernelSpec& spec, std::span<const double> diff, double h) {
  if (!(h > 0.0)) throw std::invalid_argument("bandwidth must be positive");
  double value = 1.0 / h;
  for (double d : diff) {
    value *= kernel_value(spec, d / h);
    if (value == 0.0) return 0.0;
  }
  return value;
}

double bandwidth(const KernelSpec& spec, std::size_t n) {
  spec.validate();
  if (n == 0) throw std::invalid_argument("bandwidth needs a positive sample size");
  const double exponent = -1.0 / (spec.treatment_dim + 4.0);
  return spec.bandwidth_constant * std::pow(static_cast<double>(n), exponent);
}

KernelMoments kernel_moments(const KernelSpec& spec) {
  switch (spec.family) {
    case KernelFamily::Gaussian:
      // integral u^2 k = 1, integral k^2 = 1 / (2 sqrt(pi))
      return {1.0, 0.5 * kInvSqrtPi};
    case KernelFamily::Epanechnikov:
      return {0.2, 0.6};
  }
  throw std::invalid_argument("unknown kernel family");
}

}  // namespace ctmed
