#include "hgp/hier_temporal.hpp"

#include <cmath>
#include <stdexcept>

namespace hgp {

TemporalChainSpec TemporalChainSpec::from_hyper(const Hyperparameters& hyper) {
  TemporalChainSpec spec;
  spec.w = se_kernel_matrix(hyper.temporal_kernel, hyper.n);
  spec.mu1_prior = {Eigen::VectorXd::Zero(hyper.n), spec.w};
  spec.t_steps = hyper.t_steps;
  return spec;
}

std::vector<GaussianBelief> kalman_forward(const TemporalChainSpec& spec,
                                           const std::vector<GaussianMessage>& messages,
                                           double base_jitter, JitterStats* stats) {
  (void)base_jitter;
  (void)stats;
  if (static_cast<int>(messages.size()) != spec.t_steps)
    throw std::invalid_argument("kalman_forward: message count must equal t_steps");

  std::vector<GaussianBelief> filtered;
  filtered.reserve(spec.t_steps);

  GaussianBelief pred = spec.mu1_prior;
  for (int t = 0; t < spec.t_steps; ++t) {
    if (t > 0) {
      pred.mean = filtered[t - 1].mean;
      pred.cov = filtered[t - 1].cov + spec.w;
    }
    filtered.push_back(update_with_message(pred, messages[t]));
  }
  return filtered;
}

std::vector<GaussianBelief> rts_smooth(const TemporalChainSpec& spec,
                                       const std::vector<GaussianBelief>& filtered,
                                       double base_jitter, JitterStats* stats) {
  if (static_cast<int>(filtered.size()) != spec.t_steps)
    throw std::invalid_argument("rts_smooth: filtered count must equal t_steps");

  std::vector<GaussianBelief> smoothed = filtered;
  for (int t = spec.t_steps - 2; t >= 0; --t) {
    const Eigen::MatrixXd pred_cov = filtered[t].cov + spec.w;
    CholPsd ch = chol_psd(pred_cov, base_jitter);
    if (stats) stats->record(ch);
    // Gain = P_f P_pred^-1 (identity transition).
    const Eigen::MatrixXd gain = chol_solve(ch, filtered[t].cov).transpose();
    smoothed[t].mean =
        filtered[t].mean + gain * (smoothed[t + 1].mean - filtered[t].mean);
    smoothed[t].cov = symmetrized(
        filtered[t].cov + gain * (smoothed[t + 1].cov - pred_cov) * gain.transpose());
  }
  return smoothed;
}

namespace {

GaussianMessage diagonalized(const GaussianMessage& msg) {
  GaussianMessage out;
  out.precision = msg.precision.diagonal().asDiagonal();
  out.shift = msg.shift;  // natural shift kept as-is
  return out;
}

// Transport a Gaussian likelihood on mu_{t+1} back through the transition
// mu_{t+1} = mu_t + noise(W):
//   precision' = (I + P W)^-1 P,  shift' = (I + P W)^-1 h.
GaussianMessage transport_back(const GaussianMessage& msg, const Eigen::MatrixXd& w) {
  if (msg.is_vacuous()) return msg;
  const int n = msg.dim();
  Eigen::MatrixXd m = Eigen::MatrixXd::Identity(n, n) + msg.precision * w;
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(m);
  GaussianMessage out;
  out.precision = symmetrized(lu.solve(msg.precision));
  out.shift = lu.solve(msg.shift);
  return out;
}

}  // namespace

std::vector<GaussianBelief> leave_one_out_cavities(
    const TemporalChainSpec& spec, const std::vector<GaussianMessage>& messages) {
  const int t_steps = spec.t_steps;
  const int n = static_cast<int>(spec.w.rows());

  std::vector<GaussianBelief> pred(t_steps);
  GaussianBelief filtered = spec.mu1_prior;
  for (int t = 0; t < t_steps; ++t) {
    pred[t] = (t == 0) ? spec.mu1_prior
                       : GaussianBelief{filtered.mean, filtered.cov + spec.w};
    filtered = update_with_message(pred[t], messages[t]);
  }

  std::vector<GaussianMessage> future(t_steps, GaussianMessage::vacuous(n));
  for (int t = t_steps - 2; t >= 0; --t) {
    GaussianMessage at_next;
    at_next.precision = messages[t + 1].precision + future[t + 1].precision;
    at_next.shift = messages[t + 1].shift + future[t + 1].shift;
    future[t] = transport_back(at_next, spec.w);
  }

  std::vector<GaussianBelief> cavities(t_steps);
  for (int t = 0; t < t_steps; ++t)
    cavities[t] = update_with_message(pred[t], future[t]);
  return cavities;
}

HierResult hier_ep_run(const Eigen::MatrixXd& y_seq, const Eigen::MatrixXd& x,
                       const Hyperparameters& hyper, const EPConfig& ep_config,
                       const OuterConfig& outer_config) {
  hyper.validate();
  const int n = hyper.n;
  const int t_steps = hyper.t_steps;
  if (y_seq.rows() != t_steps || y_seq.cols() != x.rows() || x.cols() != n)
    throw std::invalid_argument("hier_ep_run: dimension mismatch");
  if (outer_config.max_outer < 1)
    throw std::invalid_argument("hier_ep_run: max_outer must be >= 1");

  const Eigen::MatrixXd sigma0 = se_kernel_matrix(hyper.spatial_kernel, n);
  const TemporalChainSpec chain = TemporalChainSpec::from_hyper(hyper);

  HierResult result;
  HierDiagnostics& diag = result.diagnostics;

  // Cold start: pure-prediction chain marginals, mean zero, cov t * W.
  std::vector<GaussianBelief> mu_beliefs;
  mu_beliefs.reserve(t_steps);
  for (int t = 0; t < t_steps; ++t)
    mu_beliefs.push_back({Eigen::VectorXd::Zero(n), static_cast<double>(t + 1) * chain.w});

  std::vector<GaussianMessage> messages(t_steps, GaussianMessage::vacuous(n));
  std::vector<FramePosterior> frames(t_steps);
  std::vector<SiteApprox> sites(t_steps);
  std::vector<bool> has_sites(t_steps, false);

  Eigen::MatrixXd prev_means = Eigen::MatrixXd::Zero(t_steps, n);

  for (int outer = 1; outer <= outer_config.max_outer; ++outer) {
    diag.frame_sweeps.emplace_back();

    // Frame-t prior: the chain posterior with frame t's own message removed.
    // On the first iteration all messages are vacuous, so this is the
    // pure-prediction cold start.
    const std::vector<GaussianBelief> cavities = leave_one_out_cavities(chain, messages);

    for (int t = 0; t < t_steps; ++t) {
      const GaussianBelief& mu_cavity = cavities[t];

      GaussianBelief prior;
      prior.mean = mu_cavity.mean;
      prior.cov = outer_config.mean_only_prior ? sigma0
                                               : Eigen::MatrixXd(sigma0 + mu_cavity.cov);

      frames[t] = ep_frame_run(y_seq.row(t).transpose(), x, hyper, prior, ep_config,
                               has_sites[t] ? &sites[t] : nullptr, &sigma0);
      sites[t] = frames[t].sites;
      has_sites[t] = true;
      messages[t] = outer_config.diagonal_mu_message ? diagonalized(frames[t].mu_message)
                                                     : frames[t].mu_message;

      diag.frame_sweeps.back().push_back(frames[t].sweeps_used);
      diag.clip_events += frames[t].diagnostics.clip_events;
      diag.cavity_skips += frames[t].diagnostics.cavity_skips;
      diag.jitter.merge(frames[t].diagnostics.jitter);
    }

    std::vector<GaussianBelief> filtered =
        kalman_forward(chain, messages, ep_config.jitter, &diag.jitter);
    mu_beliefs = outer_config.filter_only
                     ? filtered
                     : rts_smooth(chain, filtered, ep_config.jitter, &diag.jitter);

    double change = 0.0;
    for (int t = 0; t < t_steps; ++t) {
      change = std::max(change,
                        (mu_beliefs[t].mean - prev_means.row(t).transpose())
                            .cwiseAbs()
                            .maxCoeff());
      prev_means.row(t) = mu_beliefs[t].mean.transpose();
    }
    diag.outer_mu_change.push_back(change);
    result.outer_iters = outer;

    if (change < outer_config.outer_tol) {
      result.converged = true;
      break;
    }
  }

  result.frames = std::move(frames);
  result.mu_smoothed = std::move(mu_beliefs);
  return result;
}

}  // namespace hgp
