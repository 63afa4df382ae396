#pragma once

#include <vector>

#include <Eigen/Dense>

#include "hgp/belief.hpp"
#include "hgp/ep_frame.hpp"
#include "hgp/model.hpp"

namespace hgp {

/// Linear-Gaussian random walk mu_t ~ N(mu_{t-1}, W) with mu_1 ~ mu1_prior.
struct TemporalChainSpec {
  Eigen::MatrixXd w;
  GaussianBelief mu1_prior;
  int t_steps;

  /// Chain implied by the model hyperparameters: W from the temporal kernel,
  /// mu_1 ~ N(0, W).
  static TemporalChainSpec from_hyper(const Hyperparameters& hyper);
};

// Forward filter: predict adds W to the covariance, update multiplies in the
// frame message. A vacuous message leaves the prediction untouched.
std::vector<GaussianBelief> kalman_forward(const TemporalChainSpec& spec,
                                           const std::vector<GaussianMessage>& messages,
                                           double base_jitter = 0.0,
                                           JitterStats* stats = nullptr);

// Rauch-Tung-Striebel backward pass over the filtered beliefs. Smoothed
// covariances never exceed the filtered ones in the Loewner order.
std::vector<GaussianBelief> rts_smooth(const TemporalChainSpec& spec,
                                       const std::vector<GaussianBelief>& filtered,
                                       double base_jitter = 0.0,
                                       JitterStats* stats = nullptr);

// Leave-one-out chain marginals: entry t is the smoothed belief over mu_t
// with frame t's own message removed, i.e. the cavity the outer EP loop uses
// as the frame prior. Computed by a two-filter pass (forward predictions,
// backward information messages), which stays stable where a direct Gaussian
// division of the smoothed belief cancels catastrophically.
std::vector<GaussianBelief> leave_one_out_cavities(
    const TemporalChainSpec& spec, const std::vector<GaussianMessage>& messages);

struct OuterConfig {
  int max_outer = 10;
  double outer_tol = 1e-4;        // max-abs change in smoothed mu means
  bool mean_only_prior = false;   // ablation: drop V_mu from the frame prior
  bool diagonal_mu_message = false;
  bool filter_only = false;       // streaming variant: skip the backward pass
};

struct HierDiagnostics {
  std::vector<double> outer_mu_change;       // per outer iteration
  std::vector<std::vector<int>> frame_sweeps;  // per outer iteration, per frame
  int clip_events = 0;
  int cavity_skips = 0;
  JitterStats jitter;
};

struct HierResult {
  std::vector<FramePosterior> frames;
  std::vector<GaussianBelief> mu_smoothed;
  int outer_iters = 0;
  bool converged = false;
  HierDiagnostics diagnostics;
};

// Outer loop coupling per-frame EP with the temporal chain. Each iteration
// runs EP per frame against the prior N(m_t, Sigma0 + V_t), where (m_t, V_t)
// is the smoothed mu belief with that frame's own message divided out
// (pure-prediction beliefs on the first iteration), then re-filters and
// re-smooths the collected messages. Frame sites are warm-started across
// iterations. Non-convergence of the outer loop is reported, not an error.
HierResult hier_ep_run(const Eigen::MatrixXd& y_seq, const Eigen::MatrixXd& x,
                       const Hyperparameters& hyper, const EPConfig& ep_config,
                       const OuterConfig& outer_config);

}  // namespace hgp
