#pragma once

#include <Eigen/Dense>

#include <vector>

namespace ctmed {

// One observation (A, M, X, Y): treatment vector, scalar mediator,
// covariate vector, scalar outcome.
struct Observation {
  Eigen::VectorXd a;
  double m = 0.0;
  Eigen::VectorXd x;
  double y = 0.0;
};

// Column-oriented i.i.d. sample.
struct Dataset {
  Eigen::MatrixXd a;  // n x d_A
  Eigen::VectorXd m;  // n
  Eigen::MatrixXd x;  // n x d_X (d_X may be zero)
  Eigen::VectorXd y;  // n

  Eigen::Index n() const { return y.size(); }
  Eigen::Index treatment_dim() const { return a.cols(); }
  Eigen::Index covariate_dim() const { return x.cols(); }

  Observation row(Eigen::Index i) const;

  // New dataset holding the given rows in the given order.
  Dataset select(const std::vector<Eigen::Index>& rows) const;

  // Throws std::invalid_argument on inconsistent dimensions or any
  // non-finite entry.
  void validate() const;
};

// Evaluation point pair (a, a') for the mediation functional.
struct TreatmentPair {
  Eigen::VectorXd a;
  Eigen::VectorXd a_prime;

  static TreatmentPair scalar(double a, double a_prime);
  bool degenerate() const {
    return a.size() == a_prime.size() && (a.array() == a_prime.array()).all();
  }
};

}  // namespace ctmed
