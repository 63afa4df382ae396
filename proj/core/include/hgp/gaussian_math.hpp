#pragma once

#include <Eigen/Dense>

#include "hgp/errors.hpp"

namespace hgp {

/// Squared-exponential kernel hyperparameters (variance amplitude, lengthscale
/// in index units). Construction rejects non-positive values.
struct KernelParams {
  KernelParams(double amplitude, double lengthscale);

  double amplitude;
  double lengthscale;
};

/// K(i,j) = amplitude * exp(-(i-j)^2 / (2 * lengthscale^2)) on the integer
/// grid 0..n-1. Entries are mirrored so the result is exactly symmetric.
Eigen::MatrixXd se_kernel_matrix(const KernelParams& params, int n);

struct CholPsd {
  Eigen::MatrixXd lower;  // L with L L^T = m + jitter * I
  double jitter = 0.0;
  int attempts = 1;  // ladder rungs tried, including the successful one
};

// Cholesky with a diagonal jitter ladder {0, b, 10b, ..., 1e6 b}. When
// base_jitter is 0 the base b falls back to 1e-10 times the mean diagonal.
// Throws NotPsdError when the ladder is exhausted.
CholPsd chol_psd(const Eigen::MatrixXd& m, double base_jitter = 0.0);

/// Solve (L L^T) x = rhs from a chol_psd factor.
Eigen::MatrixXd chol_solve(const CholPsd& chol, const Eigen::MatrixXd& rhs);

/// Dense inverse of the factored matrix, via triangular solves.
Eigen::MatrixXd chol_inverse(const CholPsd& chol);

/// Aggregates jitter activity across factorizations for run diagnostics.
struct JitterStats {
  long escalations = 0;
  double max_jitter = 0.0;

  void record(const CholPsd& c) {
    if (c.jitter > 0.0) {
      ++escalations;
      if (c.jitter > max_jitter) max_jitter = c.jitter;
    }
  }
  void merge(const JitterStats& other) {
    escalations += other.escalations;
    if (other.max_jitter > max_jitter) max_jitter = other.max_jitter;
  }
};

double std_normal_pdf(double x);
double log_std_normal_pdf(double x);

/// Phi(x) via the complementary error function; stable in both tails.
double std_normal_cdf(double x);

/// log Phi(x), switching to the asymptotic tail series for very negative x.
double log_std_normal_cdf(double x);

/// phi(x) / Phi(x), stable for arbitrarily negative x.
double inverse_mills(double x);

/// E[Phi(g)] for g ~ N(mean, variance); equals Phi(mean / sqrt(1 + variance)).
double expected_probit(double mean, double variance);

struct TiltedMoments1D {
  double log_z;
  double mean;
  double var;
};

// Moments of p(g) ∝ Phi(sign * g) N(g; mean, var). The classic probit-EP
// identities:
//   z = sign * mean / sqrt(1 + var),  r = phi(z) / Phi(z)
//   E[g]   = mean + sign * var * r / sqrt(1 + var)
//   Var[g] = var - var^2 * r * (z + r) / (1 + var)
TiltedMoments1D probit_tilted_moments(double mean, double var, double sign);

bool is_symmetric(const Eigen::MatrixXd& m, double rel_tol = 1e-12);

inline Eigen::MatrixXd symmetrized(const Eigen::MatrixXd& m) {
  return 0.5 * (m + m.transpose());
}

bool all_finite(const Eigen::MatrixXd& m);

}  // namespace hgp
