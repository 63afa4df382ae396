#pragma once

#include <cstdint>

#include <Eigen/Dense>

#include "hgp/gaussian_math.hpp"

namespace hgp {

// Indicator convention: omega = 1 selects the spike (beta pinned to zero) and
// P(omega = 1) = Phi(gamma), so large gamma means sparse. Parts of the
// literature use the opposite convention; this constant documents ours.
inline constexpr bool kIndicatorMeansSpike = true;

/// All model constants. k < n is the typical compressive regime but any
/// k >= 1 is accepted.
struct Hyperparameters {
  int n = 1;                              // signal dimension
  int k = 1;                              // observation dimension
  int t_steps = 1;                        // horizon
  double noise_var = 1e-2;                // observation noise variance
  double slab_var = 1.0;                  // slab variance
  KernelParams spatial_kernel{1.0, 3.0};  // gamma-field covariance
  KernelParams temporal_kernel{0.25, 3.0};  // mu random-walk increment covariance

  void validate() const;
};

/// One sampled state sequence. omega(t,i) = 1 forces beta(t,i) = 0 exactly.
struct LatentTrajectory {
  Eigen::MatrixXd mu;     // T x N
  Eigen::MatrixXd gamma;  // T x N
  Eigen::MatrixXi omega;  // T x N, entries in {0,1}
  Eigen::MatrixXd beta;   // T x N
};

struct SampledData {
  LatentTrajectory latent;
  Eigen::MatrixXd x;  // K x N sensing matrix
  Eigen::MatrixXd y;  // T x K observations
};

/// K x N matrix of i.i.d. standard normals, deterministic given the seed.
Eigen::MatrixXd make_sensing_matrix(const Hyperparameters& hyper, std::uint64_t seed);

// Forward-sample the full generative chain:
//   mu_1 ~ N(0, W), mu_t ~ N(mu_{t-1}, W), gamma_t ~ N(mu_t, Sigma0),
//   omega_it ~ Ber(Phi(gamma_it)), beta_it = 0 if omega_it else N(0, slab_var),
//   y_t ~ N(X beta_t, noise_var I).
SampledData sample_trajectory(const Hyperparameters& hyper, std::uint64_t seed);

/// y_t = X beta_t + noise; noise_var = 0 gives exact y_t = X beta_t.
Eigen::MatrixXd observe(const Eigen::MatrixXd& x, const Eigen::MatrixXd& beta,
                        double noise_var, std::uint64_t seed);

}  // namespace hgp
