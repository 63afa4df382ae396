#include "hgp/model.hpp"

#include <cmath>
#include <stdexcept>

#include "hgp/rng.hpp"

namespace hgp {

void Hyperparameters::validate() const {
  if (n < 1 || k < 1 || t_steps < 1)
    throw std::invalid_argument("Hyperparameters: n, k, t_steps must be >= 1");
  if (!(noise_var > 0.0) || !std::isfinite(noise_var))
    throw std::invalid_argument("Hyperparameters: noise_var must be positive");
  if (!(slab_var > 0.0) || !std::isfinite(slab_var))
    throw std::invalid_argument("Hyperparameters: slab_var must be positive");
}

Eigen::MatrixXd make_sensing_matrix(const Hyperparameters& hyper, std::uint64_t seed) {
  hyper.validate();
  Rng rng(seed);
  Eigen::MatrixXd x(hyper.k, hyper.n);
  for (int i = 0; i < hyper.k; ++i)
    for (int j = 0; j < hyper.n; ++j) x(i, j) = rng.normal();
  return x;
}

SampledData sample_trajectory(const Hyperparameters& hyper, std::uint64_t seed) {
  hyper.validate();
  const int n = hyper.n;
  const int t_steps = hyper.t_steps;

  const Eigen::MatrixXd w = se_kernel_matrix(hyper.temporal_kernel, n);
  const Eigen::MatrixXd sigma0 = se_kernel_matrix(hyper.spatial_kernel, n);
  const Eigen::MatrixXd lw = chol_psd(w).lower;
  const Eigen::MatrixXd ls = chol_psd(sigma0).lower;

  Rng rng(Rng::derive(seed, 0));
  const double slab_std = std::sqrt(hyper.slab_var);

  LatentTrajectory traj;
  traj.mu.resize(t_steps, n);
  traj.gamma.resize(t_steps, n);
  traj.omega.resize(t_steps, n);
  traj.beta.resize(t_steps, n);

  Eigen::VectorXd z(n);
  auto draw = [&]() {
    for (int i = 0; i < n; ++i) z(i) = rng.normal();
  };

  for (int t = 0; t < t_steps; ++t) {
    draw();
    Eigen::VectorXd mu_t = lw * z;
    if (t > 0) mu_t += traj.mu.row(t - 1).transpose();
    traj.mu.row(t) = mu_t.transpose();

    draw();
    const Eigen::VectorXd gamma_t = mu_t + ls * z;
    traj.gamma.row(t) = gamma_t.transpose();

    for (int i = 0; i < n; ++i) {
      const bool spike = rng.uniform() < std_normal_cdf(gamma_t(i));
      traj.omega(t, i) = spike ? 1 : 0;
      traj.beta(t, i) = spike ? 0.0 : slab_std * rng.normal();
    }
  }

  SampledData out;
  out.latent = std::move(traj);
  out.x = make_sensing_matrix(hyper, Rng::derive(seed, 1));
  out.y = observe(out.x, out.latent.beta, hyper.noise_var, Rng::derive(seed, 2));
  return out;
}

Eigen::MatrixXd observe(const Eigen::MatrixXd& x, const Eigen::MatrixXd& beta,
                        double noise_var, std::uint64_t seed) {
  if (beta.cols() != x.cols())
    throw std::invalid_argument("observe: beta columns must match sensing columns");
  if (noise_var < 0.0 || !std::isfinite(noise_var))
    throw std::invalid_argument("observe: noise_var must be >= 0");

  const int t_steps = static_cast<int>(beta.rows());
  const int k = static_cast<int>(x.rows());
  Eigen::MatrixXd y = beta * x.transpose();  // T x K
  if (noise_var > 0.0) {
    Rng rng(seed);
    const double sd = std::sqrt(noise_var);
    for (int t = 0; t < t_steps; ++t)
      for (int j = 0; j < k; ++j) y(t, j) += sd * rng.normal();
  }
  return y;
}

}  // namespace hgp
