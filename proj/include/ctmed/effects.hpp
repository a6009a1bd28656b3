#pragma once

#include "ctmed/dataset.hpp"
#include "ctmed/estimator.hpp"

namespace ctmed {

struct EffectEstimate {
  double value = 0.0;
  double se = 0.0;
  double ci_lower = 0.0;
  double ci_upper = 0.0;
};

// ACE = psi(a,a) - psi(a',a'), NDE = psi(a,a') - psi(a',a'),
// NIE = psi(a,a) - psi(a,a'). ace.value == nde.value + nie.value exactly
// because all three come from the same component estimates.
struct EffectDecomposition {
  EffectEstimate ace;
  EffectEstimate nde;
  EffectEstimate nie;
  TreatmentPair pair;
  EstimateResult psi_aa;          // psi(a, a)
  EstimateResult psi_aap;         // psi(a, a')
  EstimateResult psi_apap;        // psi(a', a')
};

// Estimates the three functional values on one shared fold plan with
// shared per-fold nuisance fits, then differences them. Standard errors
// come from the empirical covariance of the three moment functions
// (delta method).
EffectDecomposition decompose(const Dataset& data, const TreatmentPair& pair,
                              const EstimatorConfig& config);

}  // namespace ctmed
