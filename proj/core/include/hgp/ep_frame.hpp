#pragma once

#include <cstdint>

#include <Eigen/Dense>

#include "hgp/belief.hpp"
#include "hgp/model.hpp"

namespace hgp {

/// Per-coefficient Gaussian site factors in precision/shift form. Precisions
/// stay >= 0 throughout; negative moment-matched updates are clipped.
struct SiteApprox {
  Eigen::VectorXd beta_precision;
  Eigen::VectorXd beta_shift;
  Eigen::VectorXd gamma_precision;
  Eigen::VectorXd gamma_shift;

  static SiteApprox zero(int n) {
    return {Eigen::VectorXd::Zero(n), Eigen::VectorXd::Zero(n),
            Eigen::VectorXd::Zero(n), Eigen::VectorXd::Zero(n)};
  }
  int dim() const { return static_cast<int>(beta_precision.size()); }
};

enum class RefreshMode {
  rank_one,  // rank-one belief updates per site, full resync once per sweep
  full,      // full posterior recomputation after every site update
};

struct EPConfig {
  int max_sweeps = 50;
  double tol = 1e-6;            // max-abs site-parameter change declaring convergence
  double damping = 0.8;         // step fraction in natural parameters
  double min_cavity_var = 1e-10;
  double jitter = 0.0;          // base jitter for factorizations (0 = auto)
  bool random_site_order = false;
  std::uint64_t order_seed = 0;
  RefreshMode refresh = RefreshMode::rank_one;
};

/// Exact moments of the tilted density
///   p(b, g) ∝ N(b; bm, bv) N(g; gm, gv) [Phi(g) d0(b) + (1-Phi(g)) N(b; 0, slab_var)]
struct HybridMoments {
  double log_z;
  double beta_mean;
  double beta_var;
  double gamma_mean;
  double gamma_var;
  double spike_prob;  // posterior responsibility of the point-mass branch
};

// Closed form: the normalizer splits into
//   Z = Phi(zg) N(0; bm, bv) + (1 - Phi(zg)) N(0; bm, bv + slab_var),
// zg = gm / sqrt(1 + gv); beta moments mix the point mass with the
// product Gaussian N(b; bm, bv) N(b; 0, slab_var); gamma moments mix the
// Phi- and (1-Phi)-tilted marginals. Throws CavityError when a cavity
// variance is below min_var.
HybridMoments hybrid_moments(double beta_cavity_mean, double beta_cavity_var,
                             double gamma_cavity_mean, double gamma_cavity_var,
                             double slab_var, double min_var = 0.0);

// Joint Gaussian over beta given likelihood and sites:
//   cov = (X^T X / noise_var + diag(tau))^-1,
//   mean = cov (X^T y / noise_var + shift).
GaussianBelief posterior_beta(const Eigen::MatrixXd& x, double noise_var,
                              const SiteApprox& sites, const Eigen::VectorXd& y,
                              double base_jitter = 0.0, JitterStats* stats = nullptr);

// Joint Gaussian over gamma given its prior and sites, computed without
// inverting the prior covariance:
//   B = I + D^1/2 S D^1/2,  cov = S - S D^1/2 B^-1 D^1/2 S,
//   mean = prior_mean - S D^1/2 B^-1 D^1/2 prior_mean + cov shift.
GaussianBelief posterior_gamma(const GaussianBelief& prior, const SiteApprox& sites,
                               double base_jitter = 0.0, JitterStats* stats = nullptr);

// Gaussian likelihood message the gamma sites imply about the mean field mu,
// pushed through the channel gamma ~ N(mu, channel_cov):
//   precision = (D channel + I)^-1 D,  shift = (D channel + I)^-1 shift_sites.
GaussianMessage mu_likelihood_message(const Eigen::MatrixXd& channel_cov,
                                      const SiteApprox& sites);

struct FrameDiagnostics {
  int clip_events = 0;       // negative site precisions clipped to vacuous
  int cavity_skips = 0;      // site updates skipped on cavity failure
  JitterStats jitter;
  double site_log_z_sum = 0.0;  // evidence proxy, diagnostic only
};

struct FramePosterior {
  GaussianBelief beta_belief;
  GaussianBelief gamma_belief;
  Eigen::VectorXd inclusion_prob;  // P(omega_i = 1 | y): spike probabilities
  GaussianMessage mu_message;
  bool converged = false;
  int sweeps_used = 0;
  SiteApprox sites;
  FrameDiagnostics diagnostics;
};

// Single-frame EP over the structured spike-and-slab posterior
// p(beta, gamma | y) with gamma prior N(prior.mean, prior.cov). Sweeps sites
// in ascending order (or shuffled when configured), moment-matching each
// hybrid factor against its cavity with damping. With a fixed-mean prior this
// is exactly the one-level model: no temporal machinery is involved.
//
// warm_start reuses site parameters from a previous run; mu_channel_cov
// overrides the covariance used for the upward message (defaults to the
// spatial kernel from hyper).
FramePosterior ep_frame_run(const Eigen::VectorXd& y, const Eigen::MatrixXd& x,
                            const Hyperparameters& hyper,
                            const GaussianBelief& gamma_prior, const EPConfig& config,
                            const SiteApprox* warm_start = nullptr,
                            const Eigen::MatrixXd* mu_channel_cov = nullptr);

}  // namespace hgp
