#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "hgp/hier_temporal.hpp"
#include "hgp/rng.hpp"
#include "test_oracles.hpp"

using namespace hgp;

namespace {

Hyperparameters make_hyper(int n, int k, int t_steps) {
  Hyperparameters h;
  h.n = n;
  h.k = k;
  h.t_steps = t_steps;
  h.noise_var = 1e-2;
  h.slab_var = 1.0;
  h.spatial_kernel = KernelParams(1.0, 3.0);
  h.temporal_kernel = KernelParams(0.25, 3.0);
  return h;
}

std::vector<GaussianMessage> random_messages(int t_steps, int n, Rng& rng,
                                             double vacuous_prob = 0.0) {
  std::vector<GaussianMessage> msgs;
  for (int t = 0; t < t_steps; ++t) {
    if (rng.uniform() < vacuous_prob) {
      msgs.push_back(GaussianMessage::vacuous(n));
      continue;
    }
    Eigen::MatrixXd a(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) a(i, j) = rng.normal();
    GaussianMessage m;
    m.precision = a * a.transpose() / n + 0.1 * Eigen::MatrixXd::Identity(n, n);
    m.shift.resize(n);
    for (int i = 0; i < n; ++i) m.shift(i) = rng.normal();
    msgs.push_back(std::move(m));
  }
  return msgs;
}

TemporalChainSpec random_chain(int n, int t_steps, Rng& rng) {
  TemporalChainSpec spec;
  Eigen::MatrixXd a(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) a(i, j) = rng.normal();
  spec.w = a * a.transpose() / n + 0.5 * Eigen::MatrixXd::Identity(n, n);
  spec.mu1_prior = {Eigen::VectorXd::Zero(n), spec.w};
  spec.t_steps = t_steps;
  return spec;
}

}  // namespace

TEST_CASE("vacuous messages give pure prediction") {
  const Hyperparameters h = make_hyper(6, 3, 4);
  const TemporalChainSpec spec = TemporalChainSpec::from_hyper(h);
  const auto filtered =
      kalman_forward(spec, std::vector<GaussianMessage>(4, GaussianMessage::vacuous(6)));
  for (int t = 0; t < 4; ++t) {
    CHECK(filtered[t].mean.cwiseAbs().maxCoeff() == 0.0);
    CHECK((filtered[t].cov - (t + 1.0) * spec.w).cwiseAbs().maxCoeff() <= 1e-12);
  }
}

TEST_CASE("static limit reduces to a precision-weighted combination") {
  Rng rng(4);
  const int n = 4, t_steps = 3;
  TemporalChainSpec spec;
  spec.w = se_kernel_matrix(KernelParams(1e-12, 3.0), n);
  spec.mu1_prior = {Eigen::VectorXd::Zero(n),
                    1e8 * Eigen::MatrixXd::Identity(n, n)};  // vague start
  spec.t_steps = t_steps;

  const auto msgs = random_messages(t_steps, n, rng);
  Eigen::MatrixXd prec_sum = Eigen::MatrixXd::Zero(n, n);
  Eigen::VectorXd shift_sum = Eigen::VectorXd::Zero(n);
  for (const auto& m : msgs) {
    prec_sum += m.precision;
    shift_sum += m.shift;
  }
  const Eigen::VectorXd combo = prec_sum.ldlt().solve(shift_sum);

  const auto filtered = kalman_forward(spec, msgs);
  CHECK((filtered.back().mean - combo).cwiseAbs().maxCoeff() <= 1e-4);
}

TEST_CASE("filter matches the batch joint solve") {
  Rng rng(5);
  const int n = 4, t_steps = 3;
  const TemporalChainSpec spec = random_chain(n, t_steps, rng);
  const auto msgs = random_messages(t_steps, n, rng, 0.3);

  const auto filtered = kalman_forward(spec, msgs);
  const auto batch = hgp_test::batch_chain_posterior(spec, msgs);
  // The last filtered marginal is the last smoothed marginal.
  CHECK((filtered.back().mean - batch.back().mean).cwiseAbs().maxCoeff() <= 1e-8);
  CHECK((filtered.back().cov - batch.back().cov).cwiseAbs().maxCoeff() <= 1e-8);
}

TEST_CASE("smoother matches the batch joint solve at every step") {
  for (std::uint64_t seed : {21, 22, 23}) {
    Rng rng(seed);
    const int n = 3, t_steps = 4;
    const TemporalChainSpec spec = random_chain(n, t_steps, rng);
    const auto msgs = random_messages(t_steps, n, rng, 0.25);

    const auto smoothed = rts_smooth(spec, kalman_forward(spec, msgs));
    const auto batch = hgp_test::batch_chain_posterior(spec, msgs);
    for (int t = 0; t < t_steps; ++t) {
      CHECK((smoothed[t].mean - batch[t].mean).cwiseAbs().maxCoeff() <= 1e-8);
      CHECK((smoothed[t].cov - batch[t].cov).cwiseAbs().maxCoeff() <= 1e-8);
    }
  }
}

TEST_CASE("smoothing a single step is the identity") {
  Rng rng(6);
  const TemporalChainSpec spec = random_chain(5, 1, rng);
  const auto msgs = random_messages(1, 5, rng);
  const auto filtered = kalman_forward(spec, msgs);
  const auto smoothed = rts_smooth(spec, filtered);
  CHECK((smoothed[0].mean - filtered[0].mean).cwiseAbs().maxCoeff() == 0.0);
  CHECK((smoothed[0].cov - filtered[0].cov).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("vacuous messages smooth to zero means") {
  const Hyperparameters h = make_hyper(5, 3, 4);
  const TemporalChainSpec spec = TemporalChainSpec::from_hyper(h);
  const auto smoothed = rts_smooth(
      spec,
      kalman_forward(spec, std::vector<GaussianMessage>(4, GaussianMessage::vacuous(5))));
  for (const auto& s : smoothed) CHECK(s.mean.cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("smoothed covariances never exceed filtered ones") {
  Rng rng(7);
  const int n = 6, t_steps = 5;
  const TemporalChainSpec spec = random_chain(n, t_steps, rng);
  const auto msgs = random_messages(t_steps, n, rng, 0.2);
  const auto filtered = kalman_forward(spec, msgs);
  const auto smoothed = rts_smooth(spec, filtered);
  for (int t = 0; t < t_steps; ++t) {
    const Eigen::MatrixXd diff = filtered[t].cov - smoothed[t].cov;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(symmetrized(diff));
    CHECK(es.eigenvalues().minCoeff() >= -1e-8);
  }
}

TEST_CASE("leave-one-out cavities recombine to the smoothed marginals") {
  Rng rng(19);
  const int n = 4, t_steps = 5;
  const TemporalChainSpec spec = random_chain(n, t_steps, rng);
  const auto msgs = random_messages(t_steps, n, rng, 0.2);

  const auto cavities = leave_one_out_cavities(spec, msgs);
  const auto smoothed = rts_smooth(spec, kalman_forward(spec, msgs));
  for (int t = 0; t < t_steps; ++t) {
    const GaussianBelief back = update_with_message(cavities[t], msgs[t]);
    CHECK((back.mean - smoothed[t].mean).cwiseAbs().maxCoeff() <= 1e-8);
    CHECK((back.cov - smoothed[t].cov).cwiseAbs().maxCoeff() <= 1e-8);
  }
}

TEST_CASE("message division and re-multiplication round trip") {
  Rng rng(8);
  const int n = 5;
  const TemporalChainSpec spec = random_chain(n, 1, rng);
  const auto msgs = random_messages(1, n, rng);
  const GaussianBelief belief = kalman_forward(spec, msgs)[0];

  const GaussianBelief cavity = divide_message(belief, msgs[0]);
  const GaussianBelief back = update_with_message(cavity, msgs[0]);
  CHECK((back.mean - belief.mean).cwiseAbs().maxCoeff() <= 1e-10);
  CHECK((back.cov - belief.cov).cwiseAbs().maxCoeff() <= 1e-10);
}

TEST_CASE("a single-frame chain equals one-level EP with widened prior") {
  Rng rng(9);
  const int n = 10, k = 4;
  Hyperparameters h = make_hyper(n, k, 1);
  Eigen::MatrixXd x(k, n);
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < n; ++j) x(i, j) = rng.normal();
  Eigen::MatrixXd y(1, k);
  for (int j = 0; j < k; ++j) y(0, j) = rng.normal();

  const HierResult hier = hier_ep_run(y, x, h, EPConfig{}, OuterConfig{});

  const Eigen::MatrixXd sigma0 = se_kernel_matrix(h.spatial_kernel, n);
  const Eigen::MatrixXd w = se_kernel_matrix(h.temporal_kernel, n);
  const GaussianBelief prior{Eigen::VectorXd::Zero(n), sigma0 + w};
  const FramePosterior flat =
      ep_frame_run(y.row(0).transpose(), x, h, prior, EPConfig{}, nullptr, &sigma0);

  CHECK((hier.frames[0].beta_belief.mean - flat.beta_belief.mean)
            .cwiseAbs()
            .maxCoeff() <= 1e-10);
  CHECK((hier.frames[0].inclusion_prob - flat.inclusion_prob).cwiseAbs().maxCoeff() <=
        1e-10);
}

TEST_CASE("huge temporal amplitude decouples the frames") {
  Rng rng(10);
  const int n = 12, k = 6, t_steps = 3;
  Hyperparameters h = make_hyper(n, k, t_steps);
  h.temporal_kernel = KernelParams(1e4, 3.0);

  Eigen::MatrixXd x(k, n);
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < n; ++j) x(i, j) = rng.normal();
  Eigen::MatrixXd y(t_steps, k);
  for (int t = 0; t < t_steps; ++t)
    for (int j = 0; j < k; ++j) y(t, j) = rng.normal();

  const HierResult hier = hier_ep_run(y, x, h, EPConfig{}, OuterConfig{});

  // With a near-infinite transition noise the leave-one-out chain prior at
  // every frame is approximately N(0, W), so each frame decouples to a
  // one-level run with a vague prior.
  const Eigen::MatrixXd sigma0 = se_kernel_matrix(h.spatial_kernel, n);
  const Eigen::MatrixXd w = se_kernel_matrix(h.temporal_kernel, n);
  for (int t = 0; t < t_steps; ++t) {
    const GaussianBelief vague{Eigen::VectorXd::Zero(n), sigma0 + w};
    const FramePosterior flat = ep_frame_run(y.row(t).transpose(), x, h, vague,
                                             EPConfig{}, nullptr, &sigma0);
    CHECK((hier.frames[t].inclusion_prob - flat.inclusion_prob)
              .cwiseAbs()
              .maxCoeff() <= 0.05);
  }
}

TEST_CASE("outer loop reports finite diagnostics and positive variances") {
  Rng rng(11);
  const int n = 16, k = 7, t_steps = 4;
  Hyperparameters h = make_hyper(n, k, t_steps);
  Eigen::MatrixXd x(k, n);
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < n; ++j) x(i, j) = rng.normal();
  Eigen::MatrixXd y(t_steps, k);
  for (int t = 0; t < t_steps; ++t)
    for (int j = 0; j < k; ++j) y(t, j) = rng.normal();

  const HierResult r = hier_ep_run(y, x, h, EPConfig{}, OuterConfig{});
  CHECK(r.outer_iters >= 1);
  CHECK(static_cast<int>(r.frames.size()) == t_steps);
  CHECK(static_cast<int>(r.mu_smoothed.size()) == t_steps);
  for (double c : r.diagnostics.outer_mu_change) CHECK(std::isfinite(c));
  for (int t = 0; t < t_steps; ++t) {
    CHECK(r.frames[t].beta_belief.mean.allFinite());
    CHECK(r.frames[t].inclusion_prob.allFinite());
    CHECK(r.mu_smoothed[t].mean.allFinite());
    CHECK((r.frames[t].beta_belief.cov.diagonal().array() > 0.0).all());
    CHECK((r.mu_smoothed[t].cov.diagonal().array() > 0.0).all());
  }
}

TEST_CASE("filter-only mode runs and matches dimensions") {
  Rng rng(12);
  const int n = 8, k = 4, t_steps = 3;
  Hyperparameters h = make_hyper(n, k, t_steps);
  Eigen::MatrixXd x(k, n);
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < n; ++j) x(i, j) = rng.normal();
  Eigen::MatrixXd y = Eigen::MatrixXd::Zero(t_steps, k);

  OuterConfig outer;
  outer.filter_only = true;
  outer.max_outer = 2;
  const HierResult r = hier_ep_run(y, x, h, EPConfig{}, outer);
  CHECK(static_cast<int>(r.mu_smoothed.size()) == t_steps);
  for (const auto& b : r.mu_smoothed) CHECK(b.mean.allFinite());
}
