#pragma once

#include <Eigen/Dense>

#include "hgp/gaussian_math.hpp"

namespace hgp {

/// Moment-form Gaussian: the currency of EP marginals and Kalman beliefs.
struct GaussianBelief {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;

  int dim() const { return static_cast<int>(mean.size()); }
};

/// Natural-form Gaussian likelihood message (precision matrix + shift vector).
/// A zero precision is a vacuous message.
struct GaussianMessage {
  Eigen::MatrixXd precision;
  Eigen::VectorXd shift;

  static GaussianMessage vacuous(int n) {
    return {Eigen::MatrixXd::Zero(n, n), Eigen::VectorXd::Zero(n)};
  }
  bool is_vacuous(double tol = 0.0) const {
    return precision.cwiseAbs().maxCoeff() <= tol;
  }
  int dim() const { return static_cast<int>(shift.size()); }
};

// Multiply a message into a belief:
//   cov'  = (P^-1 + L)^-1 = (I + P L)^-1 P
//   mean' = (I + P L)^-1 (m + P h)
// The (I + P L) form avoids inverting P.
GaussianBelief update_with_message(const GaussianBelief& belief,
                                   const GaussianMessage& msg);

// Divide a message out of a belief (natural-parameter subtraction). Throws
// NotPsdError when the remainder is not positive definite within the jitter
// ladder.
GaussianBelief divide_message(const GaussianBelief& belief,
                              const GaussianMessage& msg,
                              double base_jitter = 0.0,
                              JitterStats* stats = nullptr);

}  // namespace hgp
