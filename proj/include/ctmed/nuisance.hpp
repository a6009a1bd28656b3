#pragma once

#include "ctmed/dataset.hpp"
#include "ctmed/stats.hpp"

#include <Eigen/Dense>

#include <functional>
#include <memory>
#include <variant>

namespace ctmed {

enum class NuisanceFamily { Linear, Kernel };
enum class NuisanceKind { Gamma, Alpha, Lambda };
enum class SpecFlag { Correct, Misspecified };

// Gauss-Legendre rule used to integrate the outcome regression against the
// fitted mediator law: n_points nodes over mean +- half_width_sigmas * sd.
struct QuadratureConfig {
  int n_points = 64;
  double half_width_sigmas = 6.0;
};

struct NuisanceConfig {
  NuisanceFamily gamma_family = NuisanceFamily::Linear;
  NuisanceFamily alpha_family = NuisanceFamily::Linear;
  NuisanceFamily lambda_family = NuisanceFamily::Linear;
  // Adds a_j * m columns to the outcome regression.
  bool gamma_interactions = false;
  // Densities are floored at this value before use; inverse densities are
  // therefore capped at its reciprocal.
  double trim_floor = 1e-3;
  QuadratureConfig quadrature;

  void validate() const;  // throws std::invalid_argument
};

// ---- outcome regression E[Y | A, M, X] ----

struct LinearOutcome {
  // Coefficients for (1, a_1..a_d, m, x_1..x_p) plus a_1*m..a_d*m when
  // interactions is set.
  Eigen::VectorXd beta;
  bool interactions = false;
  double value(const Eigen::VectorXd& a, double m, const Eigen::VectorXd& x) const;
};

struct ConstantOutcome {
  double c = 0.0;
};

// Nadaraya-Watson regression on (a, m, x) with Gaussian weights.
struct KernelOutcome {
  std::shared_ptr<const Dataset> train;
  Eigen::VectorXd h;  // per column of (a_1..a_d, m, x_1..x_p)
  double fallback = 0.0;  // training mean, returned when all weights vanish
  double value(const Eigen::VectorXd& a, double m, const Eigen::VectorXd& x) const;
};

struct GammaModel {
  std::variant<LinearOutcome, ConstantOutcome, KernelOutcome> impl;
  double operator()(const Eigen::VectorXd& a, double m, const Eigen::VectorXd& x) const;
};

// ---- conditional mediator law M | A, X ----

struct MediatorLinear {
  Eigen::VectorXd beta;  // (1, a_1..a_d, x_1..x_p)
  double sigma = 1.0;
};

// Intercept-only working model, N(mean, sigma^2) ignoring (A, X).
struct MediatorMarginal {
  double mean = 0.0;
  double sigma = 1.0;
};

// Kernel conditional density: Gaussian-weighted mixture of N(M_i, h_m^2).
struct MediatorKernel {
  std::shared_ptr<const Dataset> train;
  Eigen::VectorXd h_cond;  // per column of (a_1..a_d, x_1..x_p)
  double h_m = 1.0;
};

struct MediatorModel {
  std::variant<MediatorLinear, MediatorMarginal, MediatorKernel> impl;

  // Untrimmed conditional density f(m | a, x).
  double density(double m, const Eigen::VectorXd& a, const Eigen::VectorXd& x) const;
  // Conditional mean and sd, used to place the quadrature grid.
  double mean(const Eigen::VectorXd& a, const Eigen::VectorXd& x) const;
  double sd(const Eigen::VectorXd& a, const Eigen::VectorXd& x) const;
};

// ---- conditional treatment law A | X ----

struct TreatmentLinear {
  Eigen::MatrixXd beta;   // one column of (1, x_1..x_p) coefficients per treatment dim
  Eigen::VectorXd sigma;  // per treatment dim
};

struct TreatmentMarginal {
  Eigen::VectorXd mean;
  Eigen::VectorXd sigma;
};

struct TreatmentKernel {
  std::shared_ptr<const Dataset> train;
  Eigen::VectorXd h_x;  // per covariate
  Eigen::VectorXd h_a;  // per treatment dim
};

struct TreatmentModel {
  std::variant<TreatmentLinear, TreatmentMarginal, TreatmentKernel> impl;

  // Untrimmed conditional density f(a | x), a product over treatment dims
  // for the parametric families.
  double density(const Eigen::VectorXd& a, const Eigen::VectorXd& x) const;
};

// ---- fitted bundle ----

struct SpecFlags {
  SpecFlag gamma = SpecFlag::Correct;
  SpecFlag alpha = SpecFlag::Correct;
  SpecFlag lambda = SpecFlag::Correct;
};

// Training moments retained so misspecify() can rebuild intercept-only
// working models without the training data.
struct TrainingSummary {
  double y_mean = 0.0;
  double m_mean = 0.0;
  double m_sd = 1.0;
  Eigen::VectorXd a_mean;
  Eigen::VectorXd a_sd;
};

class NuisanceFit {
 public:
  GammaModel gamma_model;
  MediatorModel mediator_model;
  TreatmentModel treatment_model;
  TrainingSummary summary;
  SpecFlags flags;
  double trim_floor = 1e-3;
  QuadratureConfig quad;
  stats::Quadrature quad_table;

  double gamma(const Eigen::VectorXd& a, double m, const Eigen::VectorXd& x) const;

  // Trimmed mediator density max(f(m | a, x), trim_floor).
  double alpha(const Eigen::VectorXd& a, double m, const Eigen::VectorXd& x) const;

  // 1 / max(f(a | x), trim_floor).
  double lambda(const Eigen::VectorXd& a, const Eigen::VectorXd& x) const;

  // Outcome regression integrated against the fitted mediator law at
  // (a', x), evaluated by quadrature. Always derived from the current
  // gamma_model and mediator_model, so it stays consistent with them
  // after misspecify().
  double eta(const Eigen::VectorXd& a, const Eigen::VectorXd& a_prime,
             const Eigen::VectorXd& x) const;
};

GammaModel fit_gamma(const Dataset& train, const NuisanceConfig& config);
MediatorModel fit_alpha(const Dataset& train, const NuisanceConfig& config);
TreatmentModel fit_lambda(const Dataset& train, const NuisanceConfig& config);
NuisanceFit fit_nuisances(const Dataset& train, const NuisanceConfig& config);

// Replaces one component with its intercept-only working model fitted to
// the same training data (via the stored training moments) and flags it.
NuisanceFit misspecify(const NuisanceFit& fit, NuisanceKind which);

// ---- generic quadrature surface ----

using GammaFn =
    std::function<double(const Eigen::VectorXd& a, double m, const Eigen::VectorXd& x)>;

// eta evaluator over an arbitrary outcome regression. NuisanceFit::eta is
// the same computation specialized to the fitted models.
class EtaEvaluator {
 public:
  EtaEvaluator(GammaFn gamma, MediatorModel mediator, QuadratureConfig quad);

  double operator()(const Eigen::VectorXd& a, const Eigen::VectorXd& a_prime,
                    const Eigen::VectorXd& x) const;

 private:
  GammaFn gamma_;
  MediatorModel mediator_;
  QuadratureConfig quad_;
  stats::Quadrature table_;
};

EtaEvaluator fit_eta(GammaFn gamma, const MediatorModel& mediator,
                     const QuadratureConfig& quad);

}  // namespace ctmed
