#include "ctmed/nuisance.hpp"

#include "ctmed/errors.hpp"

#include <Eigen/QR>

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace ctmed {

namespace {

void check_covariate_dims(const Eigen::VectorXd& a, const Eigen::VectorXd& x,
                          Eigen::Index d_a, Eigen::Index d_x) {
  if (a.size() != d_a || x.size() != d_x) {
    throw std::invalid_argument("nuisance query dimensions do not match the training data");
  }
}

// Least squares with an explicit rank check; names the first degenerate
// column so misconfigured designs fail loudly.
Eigen::VectorXd ols(const Eigen::MatrixXd& design, const Eigen::VectorXd& response,
                    const std::vector<std::string>& labels) {
  if (design.rows() <= design.cols()) {
    throw fit_error("not enough rows to fit " + std::to_string(design.cols()) +
                    " regression coefficients");
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
  if (qr.rank() < design.cols()) {
    const auto& perm = qr.colsPermutation().indices();
    const int bad = perm(qr.rank());
    throw fit_error("singular design matrix: column '" + labels[static_cast<std::size_t>(bad)] +
                    "' is degenerate");
  }
  return qr.solve(response);
}

// Residual variance with denominator n - p. Exact or near-exact fits mean
// the conditional law is degenerate and no usable density exists.
double residual_variance(const Eigen::MatrixXd& design, const Eigen::VectorXd& response,
                         const Eigen::VectorXd& beta, const std::string& what) {
  const Eigen::VectorXd resid = response - design * beta;
  const double ssr = resid.squaredNorm();
  const double sst = (response.array() - response.mean()).matrix().squaredNorm();
  if (ssr <= sst * 1e-18) {
    throw fit_error(what + " residual variance is zero (degenerate conditional law)");
  }
  return ssr / static_cast<double>(design.rows() - design.cols());
}

Eigen::MatrixXd mediator_design(const Dataset& train) {
  const Eigen::Index n = train.n();
  Eigen::MatrixXd d(n, 1 + train.treatment_dim() + train.covariate_dim());
  d.col(0).setOnes();
  d.middleCols(1, train.treatment_dim()) = train.a;
  if (train.covariate_dim() > 0) d.rightCols(train.covariate_dim()) = train.x;
  return d;
}

std::vector<std::string> mediator_labels(const Dataset& train) {
  std::vector<std::string> labels{"intercept"};
  for (Eigen::Index j = 0; j < train.treatment_dim(); ++j)
    labels.push_back("A" + std::to_string(j + 1));
  for (Eigen::Index j = 0; j < train.covariate_dim(); ++j)
    labels.push_back("X" + std::to_string(j + 1));
  return labels;
}

// Rule-of-thumb per-column bandwidths for the kernel families.
Eigen::VectorXd rot_bandwidths(const Eigen::MatrixXd& cols, int smoothing_dims) {
  const double n = static_cast<double>(cols.rows());
  Eigen::VectorXd h(cols.cols());
  for (Eigen::Index j = 0; j < cols.cols(); ++j) {
    const double mu = cols.col(j).mean();
    const double sd = std::sqrt((cols.col(j).array() - mu).square().sum() /
                                std::max(1.0, n - 1.0));
    const double scale = sd > 0.0 ? sd : 1.0;
    h(j) = 1.06 * scale * std::pow(n, -1.0 / (4.0 + smoothing_dims));
  }
  return h;
}

double gaussian_weight(const Eigen::VectorXd& diff, const Eigen::VectorXd& h) {
  double q = 0.0;
  for (Eigen::Index j = 0; j < diff.size(); ++j) {
    const double z = diff(j) / h(j);
    q += z * z;
  }
  return std::exp(-0.5 * q);
}

constexpr double kInvSqrt2Pi = 0.3989422804014327;

double gauss_density(double x, double mean, double sd) {
  const double z = (x - mean) / sd;
  return kInvSqrt2Pi / sd * std::exp(-0.5 * z * z);
}

// Shared quadrature loop: integrates g(m) * f(m | a', x) over the fitted
// conditional law's effective support.
template <class G>
double eta_quadrature(const MediatorModel& med, const stats::Quadrature& table,
                      const QuadratureConfig& qc, const Eigen::VectorXd& a_prime,
                      const Eigen::VectorXd& x, G&& g) {
  const double mu = med.mean(a_prime, x);
  const double sd = med.sd(a_prime, x);
  const double radius = qc.half_width_sigmas * sd;
  double acc = 0.0;
  for (std::size_t k = 0; k < table.nodes.size(); ++k) {
    const double m = mu + radius * table.nodes[k];
    acc += table.weights[k] * med.density(m, a_prime, x) * g(m);
  }
  return radius * acc;
}

}  // namespace

void NuisanceConfig::validate() const {
  if (!(trim_floor > 0.0) || !(trim_floor < 1.0)) {
    throw std::invalid_argument("trim_floor must lie in (0, 1)");
  }
  if (quadrature.n_points < 2) {
    throw std::invalid_argument("quadrature needs at least 2 points");
  }
  if (!(quadrature.half_width_sigmas > 0.0)) {
    throw std::invalid_argument("quadrature half width must be positive");
  }
}

// ---- outcome regression ----

double LinearOutcome::value(const Eigen::VectorXd& a, double m, const Eigen::VectorXd& x) const {
  const Eigen::Index d_a = a.size();
  double v = beta(0);
  Eigen::Index k = 1;
  for (Eigen::Index j = 0; j < d_a; ++j) v += beta(k++) * a(j);
  v += beta(k++) * m;
  for (Eigen::Index j = 0; j < x.size(); ++j) v += beta(k++) * x(j);
  if (interactions) {
    for (Eigen::Index j = 0; j < d_a; ++j) v += beta(k++) * a(j) * m;
  }
  return v;
}

double KernelOutcome::value(const Eigen::VectorXd& a, double m, const Eigen::VectorXd& x) const {
  const Dataset& t = *train;
  check_covariate_dims(a, x, t.treatment_dim(), t.covariate_dim());
  double num = 0.0;
  double den = 0.0;
  Eigen::VectorXd diff(t.treatment_dim() + 1 + t.covariate_dim());
  for (Eigen::Index i = 0; i < t.n(); ++i) {
    Eigen::Index k = 0;
    for (Eigen::Index j = 0; j < t.treatment_dim(); ++j) diff(k++) = a(j) - t.a(i, j);
    diff(k++) = m - t.m(i);
    for (Eigen::Index j = 0; j < t.covariate_dim(); ++j) diff(k++) = x(j) - t.x(i, j);
    const double w = gaussian_weight(diff, h);
    num += w * t.y(i);
    den += w;
  }
  return den > 1e-300 ? num / den : fallback;
}

double GammaModel::operator()(const Eigen::VectorXd& a, double m, const Eigen::VectorXd& x) const {
  return std::visit(
      [&](const auto& model) -> double {
        using T = std::decay_t<decltype(model)>;
        if constexpr (std::is_same_v<T, ConstantOutcome>) {
          return model.c;
        } else {
          return model.value(a, m, x);
        }
      },
      impl);
}

// ---- mediator law ----

namespace {

// Weighted mixture summary for the kernel mediator family. Falls back to
// the unweighted training mixture when the query is far from all rows.
struct KernelMediatorLocal {
  double mean = 0.0;
  double var = 0.0;
};

KernelMediatorLocal kernel_mediator_local(const MediatorKernel& mk, const Eigen::VectorXd& a,
                                          const Eigen::VectorXd& x) {
  const Dataset& t = *mk.train;
  check_covariate_dims(a, x, t.treatment_dim(), t.covariate_dim());
  double sw = 0.0;
  double swm = 0.0;
  double swm2 = 0.0;
  Eigen::VectorXd diff(t.treatment_dim() + t.covariate_dim());
  for (Eigen::Index i = 0; i < t.n(); ++i) {
    Eigen::Index k = 0;
    for (Eigen::Index j = 0; j < t.treatment_dim(); ++j) diff(k++) = a(j) - t.a(i, j);
    for (Eigen::Index j = 0; j < t.covariate_dim(); ++j) diff(k++) = x(j) - t.x(i, j);
    const double w = gaussian_weight(diff, mk.h_cond);
    sw += w;
    swm += w * t.m(i);
    swm2 += w * t.m(i) * t.m(i);
  }
  KernelMediatorLocal out;
  if (sw > 1e-300) {
    out.mean = swm / sw;
    out.var = std::max(0.0, swm2 / sw - out.mean * out.mean) + mk.h_m * mk.h_m;
  } else {
    const double mu = t.m.mean();
    out.mean = mu;
    out.var = (t.m.array() - mu).square().sum() / static_cast<double>(t.n()) + mk.h_m * mk.h_m;
  }
  return out;
}

double kernel_mediator_density(const MediatorKernel& mk, double m, const Eigen::VectorXd& a,
                               const Eigen::VectorXd& x) {
  const Dataset& t = *mk.train;
  check_covariate_dims(a, x, t.treatment_dim(), t.covariate_dim());
  double sw = 0.0;
  double sf = 0.0;
  Eigen::VectorXd diff(t.treatment_dim() + t.covariate_dim());
  for (Eigen::Index i = 0; i < t.n(); ++i) {
    Eigen::Index k = 0;
    for (Eigen::Index j = 0; j < t.treatment_dim(); ++j) diff(k++) = a(j) - t.a(i, j);
    for (Eigen::Index j = 0; j < t.covariate_dim(); ++j) diff(k++) = x(j) - t.x(i, j);
    const double w = gaussian_weight(diff, mk.h_cond);
    sw += w;
    sf += w * gauss_density(m, t.m(i), mk.h_m);
  }
  if (sw > 1e-300) return sf / sw;
  double u = 0.0;
  for (Eigen::Index i = 0; i < t.n(); ++i) u += gauss_density(m, t.m(i), mk.h_m);
  return u / static_cast<double>(t.n());
}

double linear_mean(const MediatorLinear& ml, const Eigen::VectorXd& a, const Eigen::VectorXd& x) {
  double v = ml.beta(0);
  Eigen::Index k = 1;
  for (Eigen::Index j = 0; j < a.size(); ++j) v += ml.beta(k++) * a(j);
  for (Eigen::Index j = 0; j < x.size(); ++j) v += ml.beta(k++) * x(j);
  return v;
}

}  // namespace

double MediatorModel::density(double m, const Eigen::VectorXd& a, const Eigen::VectorXd& x) const {
  return std::visit(
      [&](const auto& model) -> double {
        using T = std::decay_t<decltype(model)>;
        if constexpr (std::is_same_v<T, MediatorLinear>) {
          return gauss_density(m, linear_mean(model, a, x), model.sigma);
        } else if constexpr (std::is_same_v<T, MediatorMarginal>) {
          return gauss_density(m, model.mean, model.sigma);
        } else {
          return kernel_mediator_density(model, m, a, x);
        }
      },
      impl);
}

double MediatorModel::mean(const Eigen::VectorXd& a, const Eigen::VectorXd& x) const {
  return std::visit(
      [&](const auto& model) -> double {
        using T = std::decay_t<decltype(model)>;
        if constexpr (std::is_same_v<T, MediatorLinear>) {
          return linear_mean(model, a, x);
        } else if constexpr (std::is_same_v<T, MediatorMarginal>) {
          return model.mean;
        } else {
          return kernel_mediator_local(model, a, x).mean;
        }
      },
      impl);
}

double MediatorModel::sd(const Eigen::VectorXd& a, const Eigen::VectorXd& x) const {
  return std::visit(
      [&](const auto& model) -> double {
        using T = std::decay_t<decltype(model)>;
        if constexpr (std::is_same_v<T, MediatorLinear>) {
          return model.sigma;
        } else if constexpr (std::is_same_v<T, MediatorMarginal>) {
          return model.sigma;
        } else {
          return std::sqrt(kernel_mediator_local(model, a, x).var);
        }
      },
      impl);
}

// ---- treatment law ----

double TreatmentModel::density(const Eigen::VectorXd& a, const Eigen::VectorXd& x) const {
  return std::visit(
      [&](const auto& model) -> double {
        using T = std::decay_t<decltype(model)>;
        if constexpr (std::is_same_v<T, TreatmentLinear>) {
          double f = 1.0;
          for (Eigen::Index j = 0; j < a.size(); ++j) {
            double mu = model.beta(0, j);
            for (Eigen::Index c = 0; c < x.size(); ++c) mu += model.beta(c + 1, j) * x(c);
            f *= gauss_density(a(j), mu, model.sigma(j));
          }
          return f;
        } else if constexpr (std::is_same_v<T, TreatmentMarginal>) {
          double f = 1.0;
          for (Eigen::Index j = 0; j < a.size(); ++j) {
            f *= gauss_density(a(j), model.mean(j), model.sigma(j));
          }
          return f;
        } else {
          const Dataset& t = *model.train;
          check_covariate_dims(a, x, t.treatment_dim(), t.covariate_dim());
          double sw = 0.0;
          double sf = 0.0;
          for (Eigen::Index i = 0; i < t.n(); ++i) {
            double w = 1.0;
            for (Eigen::Index c = 0; c < t.covariate_dim(); ++c) {
              const double z = (x(c) - t.x(i, c)) / model.h_x(c);
              w *= std::exp(-0.5 * z * z);
            }
            double fa = 1.0;
            for (Eigen::Index j = 0; j < t.treatment_dim(); ++j) {
              fa *= gauss_density(a(j), t.a(i, j), model.h_a(j));
            }
            sw += w;
            sf += w * fa;
          }
          if (sw > 1e-300) return sf / sw;
          double u = 0.0;
          for (Eigen::Index i = 0; i < t.n(); ++i) {
            double fa = 1.0;
            for (Eigen::Index j = 0; j < t.treatment_dim(); ++j) {
              fa *= gauss_density(a(j), t.a(i, j), model.h_a(j));
            }
            u += fa;
          }
          return u / static_cast<double>(t.n());
        }
      },
      impl);
}

// ---- fitting ----

GammaModel fit_gamma(const Dataset& train, const NuisanceConfig& config) {
  config.validate();
  if (config.gamma_family == NuisanceFamily::Kernel) {
    const int dims = static_cast<int>(train.treatment_dim() + 1 + train.covariate_dim());
    Eigen::MatrixXd cols(train.n(), dims);
    cols.leftCols(train.treatment_dim()) = train.a;
    cols.col(train.treatment_dim()) = train.m;
    if (train.covariate_dim() > 0) cols.rightCols(train.covariate_dim()) = train.x;
    KernelOutcome ko;
    ko.train = std::make_shared<Dataset>(train);
    ko.h = rot_bandwidths(cols, dims);
    ko.fallback = train.y.mean();
    return GammaModel{ko};
  }
  const Eigen::Index d_a = train.treatment_dim();
  const Eigen::Index d_x = train.covariate_dim();
  const Eigen::Index p = 1 + d_a + 1 + d_x + (config.gamma_interactions ? d_a : 0);
  Eigen::MatrixXd design(train.n(), p);
  design.col(0).setOnes();
  design.middleCols(1, d_a) = train.a;
  design.col(1 + d_a) = train.m;
  if (d_x > 0) design.middleCols(2 + d_a, d_x) = train.x;
  std::vector<std::string> labels{"intercept"};
  for (Eigen::Index j = 0; j < d_a; ++j) labels.push_back("A" + std::to_string(j + 1));
  labels.push_back("M");
  for (Eigen::Index j = 0; j < d_x; ++j) labels.push_back("X" + std::to_string(j + 1));
  if (config.gamma_interactions) {
    for (Eigen::Index j = 0; j < d_a; ++j) {
      design.col(2 + d_a + d_x + j) = train.a.col(j).cwiseProduct(train.m);
      labels.push_back("A" + std::to_string(j + 1) + "*M");
    }
  }
  LinearOutcome lo;
  lo.beta = ols(design, train.y, labels);
  lo.interactions = config.gamma_interactions;
  return GammaModel{lo};
}

MediatorModel fit_alpha(const Dataset& train, const NuisanceConfig& config) {
  config.validate();
  if (config.alpha_family == NuisanceFamily::Kernel) {
    const int cond_dims = static_cast<int>(train.treatment_dim() + train.covariate_dim());
    Eigen::MatrixXd cond(train.n(), cond_dims);
    cond.leftCols(train.treatment_dim()) = train.a;
    if (train.covariate_dim() > 0) cond.rightCols(train.covariate_dim()) = train.x;
    MediatorKernel mk;
    mk.train = std::make_shared<Dataset>(train);
    mk.h_cond = rot_bandwidths(cond, cond_dims + 1);
    mk.h_m = rot_bandwidths(train.m, 1)(0);
    return MediatorModel{mk};
  }
  const Eigen::MatrixXd design = mediator_design(train);
  MediatorLinear ml;
  ml.beta = ols(design, train.m, mediator_labels(train));
  ml.sigma = std::sqrt(residual_variance(design, train.m, ml.beta, "mediator"));
  return MediatorModel{ml};
}

TreatmentModel fit_lambda(const Dataset& train, const NuisanceConfig& config) {
  config.validate();
  if (config.lambda_family == NuisanceFamily::Kernel) {
    TreatmentKernel tk;
    tk.train = std::make_shared<Dataset>(train);
    const int cond = static_cast<int>(train.covariate_dim());
    if (cond > 0) {
      tk.h_x = rot_bandwidths(train.x, cond + static_cast<int>(train.treatment_dim()));
    } else {
      tk.h_x.resize(0);
    }
    tk.h_a = rot_bandwidths(train.a, cond + static_cast<int>(train.treatment_dim()));
    return TreatmentModel{tk};
  }
  const Eigen::Index d_x = train.covariate_dim();
  Eigen::MatrixXd design(train.n(), 1 + d_x);
  design.col(0).setOnes();
  if (d_x > 0) design.rightCols(d_x) = train.x;
  std::vector<std::string> labels{"intercept"};
  for (Eigen::Index j = 0; j < d_x; ++j) labels.push_back("X" + std::to_string(j + 1));
  TreatmentLinear tl;
  tl.beta.resize(1 + d_x, train.treatment_dim());
  tl.sigma.resize(train.treatment_dim());
  for (Eigen::Index j = 0; j < train.treatment_dim(); ++j) {
    const Eigen::VectorXd beta = ols(design, train.a.col(j), labels);
    tl.beta.col(j) = beta;
    tl.sigma(j) = std::sqrt(
        residual_variance(design, train.a.col(j), beta, "treatment A" + std::to_string(j + 1)));
  }
  return TreatmentModel{tl};
}

NuisanceFit fit_nuisances(const Dataset& train, const NuisanceConfig& config) {
  config.validate();
  train.validate();
  NuisanceFit fit;
  fit.gamma_model = fit_gamma(train, config);
  fit.mediator_model = fit_alpha(train, config);
  fit.treatment_model = fit_lambda(train, config);
  fit.trim_floor = config.trim_floor;
  fit.quad = config.quadrature;
  fit.quad_table = stats::gauss_legendre(config.quadrature.n_points);

  const double n = static_cast<double>(train.n());
  fit.summary.y_mean = train.y.mean();
  fit.summary.m_mean = train.m.mean();
  fit.summary.m_sd =
      std::sqrt((train.m.array() - fit.summary.m_mean).square().sum() / std::max(1.0, n - 1.0));
  fit.summary.a_mean.resize(train.treatment_dim());
  fit.summary.a_sd.resize(train.treatment_dim());
  for (Eigen::Index j = 0; j < train.treatment_dim(); ++j) {
    fit.summary.a_mean(j) = train.a.col(j).mean();
    fit.summary.a_sd(j) = std::sqrt((train.a.col(j).array() - fit.summary.a_mean(j)).square().sum() /
                                    std::max(1.0, n - 1.0));
  }
  if (fit.summary.m_sd <= 0.0) throw fit_error("mediator sample is constant");
  for (Eigen::Index j = 0; j < train.treatment_dim(); ++j) {
    if (fit.summary.a_sd(j) <= 0.0) {
      throw fit_error("treatment column A" + std::to_string(j + 1) + " is constant");
    }
  }
  return fit;
}

NuisanceFit misspecify(const NuisanceFit& fit, NuisanceKind which) {
  NuisanceFit out = fit;
  switch (which) {
    case NuisanceKind::Gamma:
      out.gamma_model.impl = ConstantOutcome{fit.summary.y_mean};
      out.flags.gamma = SpecFlag::Misspecified;
      break;
    case NuisanceKind::Alpha:
      out.mediator_model.impl = MediatorMarginal{fit.summary.m_mean, fit.summary.m_sd};
      out.flags.alpha = SpecFlag::Misspecified;
      break;
    case NuisanceKind::Lambda:
      out.treatment_model.impl = TreatmentMarginal{fit.summary.a_mean, fit.summary.a_sd};
      out.flags.lambda = SpecFlag::Misspecified;
      break;
  }
  return out;
}

// ---- fitted bundle evaluation ----

double NuisanceFit::gamma(const Eigen::VectorXd& a, double m, const Eigen::VectorXd& x) const {
  return gamma_model(a, m, x);
}

double NuisanceFit::alpha(const Eigen::VectorXd& a, double m, const Eigen::VectorXd& x) const {
  return std::max(mediator_model.density(m, a, x), trim_floor);
}

double NuisanceFit::lambda(const Eigen::VectorXd& a, const Eigen::VectorXd& x) const {
  return 1.0 / std::max(treatment_model.density(a, x), trim_floor);
}

double NuisanceFit::eta(const Eigen::VectorXd& a, const Eigen::VectorXd& a_prime,
                        const Eigen::VectorXd& x) const {
  return eta_quadrature(mediator_model, quad_table, quad, a_prime, x,
                        [&](double m) { return gamma_model(a, m, x); });
}

// ---- generic quadrature surface ----

EtaEvaluator::EtaEvaluator(GammaFn gamma, MediatorModel mediator, QuadratureConfig quad)
    : gamma_(std::move(gamma)),
      mediator_(std::move(mediator)),
      quad_(quad),
      table_(stats::gauss_legendre(quad.n_points)) {}

double EtaEvaluator::operator()(const Eigen::VectorXd& a, const Eigen::VectorXd& a_prime,
                                const Eigen::VectorXd& x) const {
  return eta_quadrature(mediator_, table_, quad_, a_prime, x,
                        [&](double m) { return gamma_(a, m, x); });
}

EtaEvaluator fit_eta(GammaFn gamma, const MediatorModel& mediator, const QuadratureConfig& quad) {
  return EtaEvaluator(std::move(gamma), mediator, quad);
}

}  // namespace ctmed
