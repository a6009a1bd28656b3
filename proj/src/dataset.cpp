#include "ctmed/dataset.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace ctmed {

Observation Dataset::row(Eigen::Index i) const {
  Observation o;
  o.a = a.row(i).transpose();
  o.m = m(i);
  o.x = x.row(i).transpose();
  o.y = y(i);
  return o;
}

Dataset Dataset::select(const std::vector<Eigen::Index>& rows) const {
  Dataset out;
  const Eigen::Index k = static_cast<Eigen::Index>(rows.size());
  out.a.resize(k, a.cols());
  out.m.resize(k);
  out.x.resize(k, x.cols());
  out.y.resize(k);
  for (Eigen::Index i = 0; i < k; ++i) {
    const Eigen::Index r = rows[static_cast<std::size_t>(i)];
    out.a.row(i) = a.row(r);
    out.m(i) = m(r);
    out.x.row(i) = x.row(r);
    out.y(i) = y(r);
  }
  return out;
}

void Dataset::validate() const {
  const Eigen::Index rows = y.size();
  if (rows < 1) throw std::invalid_argument("dataset is empty");
  if (a.rows() != rows || m.size() != rows || x.rows() != rows) {
    throw std::invalid_argument("dataset columns disagree on the number of rows");
  }
  if (a.cols() < 1) throw std::invalid_argument("dataset needs at least one treatment column");
  for (Eigen::Index i = 0; i < rows; ++i) {
    if (!a.row(i).allFinite() || !std::isfinite(m(i)) || !x.row(i).allFinite() ||
        !std::isfinite(y(i))) {
      throw std::invalid_argument("non-finite value in dataset row " + std::to_string(i + 1));
    }
  }
}

TreatmentPair TreatmentPair::scalar(double a, double a_prime) {
  TreatmentPair p;
  p.a = Eigen::VectorXd::Constant(1, a);
  p.a_prime = Eigen::VectorXd::Constant(1, a_prime);
  return p;
}

}  // namespace ctmed
