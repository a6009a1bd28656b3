#pragma once

#include "ctmed/dataset.hpp"

#include <cstddef>
#include <cstdint>
#include <string>

namespace ctmed {

// Linear-Gaussian structural equations with analytically known targets:
//   X ~ N(0, 1)
//   A = a_x X + e_A,                          e_A ~ N(0, var_a)
//   M = m0 + m_a A + m_x X + e_M,             e_M ~ N(0, var_m)
//   Y = y0 + y_a A + y_m M + y_x X + y_am A M + e_Y,  e_Y ~ N(0, var_y)
// y_am == 0 gives the purely linear family; y_am != 0 adds the
// treatment-mediator interaction family. Treatment and covariate are
// scalar (d_A = d_X = 1).
struct DgpSpec {
  std::string name = "linear_gaussian";
  double a_x = 0.3;
  double var_a = 1.0;
  double m0 = 0.0;
  double m_a = 1.0;
  double m_x = 0.5;
  double var_m = 1.0;
  double y0 = 1.0;
  double y_a = 2.0;
  double y_m = 1.0;
  double y_x = 0.5;
  double var_y = 1.0;
  double y_am = 0.0;
  std::uint64_t seed = 1;

  // Throws std::invalid_argument on negative variances.
  void validate() const;

  bool has_interaction() const { return y_am != 0.0; }

  // E[Y | A=a, M=m, X=x] and its partial derivatives in a.
  double gamma(double a, double m, double x) const;
  double dgamma_da(double m) const;  // y_a + y_am * m

  // M | A=a, X=x is N(mediator_mean, var_m).
  double mediator_mean(double a, double x) const;
  double mediator_density(double m, double a, double x) const;

  // A | X=x is N(a_x * x, var_a).
  double treatment_density(double a, double x) const;

  // A | X=x, M=m is Gaussian; posterior mean and variance.
  void treatment_given_xm(double x, double m, double& mean, double& var) const;
  double treatment_density_xm(double a, double x, double m) const;
  // First and second derivatives in a of the density above.
  double d_treatment_density_xm(double a, double x, double m) const;
  double d2_treatment_density_xm(double a, double x, double m) const;
  // Second derivative in a of the A | X density.
  double d2_treatment_density(double a, double x) const;

  // E[ gamma(a, M, x) | A = a', X = x ] in closed form.
  double eta(double a, double a_prime, double x) const;
};

// Draws n rows using spec.seed.
Dataset generate(const DgpSpec& spec, std::size_t n);

// Draws n rows using an explicit seed (replication streams).
Dataset generate(const DgpSpec& spec, std::size_t n, std::uint64_t seed);

// Closed-form value of the mediation functional psi0(a, a') =
// E[ Y(a, M(a')) ].
double oracle_psi(const DgpSpec& spec, const TreatmentPair& pair);

// Monte Carlo evaluation of the same functional from the structural
// equations. Independent of the closed form; used to validate it.
double oracle_psi_mc(const DgpSpec& spec, const TreatmentPair& pair, std::size_t draws,
                     std::uint64_t seed, int workers = 1);

struct EffectTruth {
  double nde = 0.0;
  double nie = 0.0;
  double ace = 0.0;
};

// Effect decomposition implied by oracle_psi; ace == nde + nie.
EffectTruth oracle_effects(const DgpSpec& spec, const TreatmentPair& pair);

// Ground-truth bundle for one data-generating process.
struct OracleTruth {
  DgpSpec spec;

  double psi0(const TreatmentPair& pair) const { return oracle_psi(spec, pair); }
  double nde(const TreatmentPair& pair) const { return oracle_effects(spec, pair).nde; }
  double nie(const TreatmentPair& pair) const { return oracle_effects(spec, pair).nie; }
  double ace(const TreatmentPair& pair) const { return oracle_effects(spec, pair).ace; }
};

}  // namespace ctmed
