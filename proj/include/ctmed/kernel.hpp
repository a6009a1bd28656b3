#pragma once

#include <cstddef>
#include <span>

namespace ctmed {

enum class KernelFamily { Gaussian, Epanechnikov };

// Smoothing kernel choice plus the bandwidth rule inputs. Both families
// integrate to one, are symmetric, and have finite second moment and
// finite L2 norm.
struct KernelSpec {
  KernelFamily family = KernelFamily::Epanechnikov;
  // Dimensionless multiplier c in h = c * n^(-1/(treatment_dim + 4)).
  double bandwidth_constant = 1.0;
  int treatment_dim = 1;

  // Throws std::invalid_argument on non-positive constant or dimension.
  void validate() const;
};

// k(u) for the selected family.
double kernel_value(const KernelSpec& spec, double u);

// (1/h) * prod_j k(diff[j] / h). A single 1/h factor is used regardless
// of the treatment dimension; only treatment_dim == 1 is exercised by the
// validated configurations.
double product_kernel(const KernelSpec& spec, std::span<const double> diff, double h);

// h = c * n^(-1/(d + 4)) with d = spec.treatment_dim.
double bandwidth(const KernelSpec& spec, std::size_t n);

struct KernelMoments {
  double second_moment;  // integral of u^2 k(u)
  double l2_norm;        // integral of k(u)^2
};

// Closed-form moments for the selected family.
KernelMoments kernel_moments(const KernelSpec& spec);

}  // namespace ctmed
