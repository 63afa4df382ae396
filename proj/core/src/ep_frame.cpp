#include "hgp/ep_frame.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <sstream>
#include <vector>

#include "hgp/rng.hpp"

namespace hgp {

namespace {

double log_normal_at_zero(double mean, double var) {
  return -0.5 * std::log(2.0 * std::numbers::pi * var) - 0.5 * mean * mean / var;
}

// Posterior from cached likelihood terms: precision = gram + diag(tau).
GaussianBelief beta_from_gram(const Eigen::MatrixXd& gram, const Eigen::VectorXd& xty,
                              const SiteApprox& sites, double base_jitter,
                              JitterStats* stats) {
  Eigen::MatrixXd precision = gram;
  precision.diagonal() += sites.beta_precision;
  CholPsd ch = chol_psd(precision, base_jitter);
  if (stats) stats->record(ch);
  GaussianBelief out;
  out.cov = chol_inverse(ch);
  out.mean = chol_solve(ch, xty + sites.beta_shift);
  return out;
}

// Sherman-Morrison update of a moment-form belief after a site change
// (d_tau, d_nu) at coordinate i. Callers guarantee 1 + d_tau * cov(i,i) > 0.
void rank_one_update(GaussianBelief& b, int i, double d_tau, double d_nu) {
  if (d_tau == 0.0 && d_nu == 0.0) return;
  const Eigen::VectorXd c = b.cov.col(i);
  const double denom = 1.0 + d_tau * c(i);
  const double mi = b.mean(i);
  b.cov.noalias() -= (d_tau / denom) * (c * c.transpose());
  b.mean.noalias() += ((d_nu - d_tau * mi) / denom) * c;
}

// Spike-dominated sites want infinite precision; capping keeps the joint
// solvable and leaves site-parameter rounding noise well under any sensible
// convergence tolerance.
constexpr double kMaxSitePrecision = 1e8;

struct Cavity {
  double mean;
  double var;
  double precision;
};

// Divide site i out of the marginal. Returns false when the remainder is
// improper or narrower than the floor.
bool make_cavity(double marg_mean, double marg_var, double site_tau, double site_nu,
                 double min_var, Cavity* out) {
  if (!(marg_var > 0.0) || !std::isfinite(marg_var)) return false;
  const double prec = 1.0 / marg_var - site_tau;
  if (!(prec > 0.0)) return false;
  const double var = 1.0 / prec;
  if (var < min_var) return false;
  out->var = var;
  out->precision = prec;
  out->mean = var * (marg_mean / marg_var - site_nu);
  return std::isfinite(out->mean);
}

}  // namespace

HybridMoments hybrid_moments(double beta_cavity_mean, double beta_cavity_var,
                             double gamma_cavity_mean, double gamma_cavity_var,
                             double slab_var, double min_var) {
  if (!(beta_cavity_var >= min_var) || !(gamma_cavity_var >= min_var))
    throw CavityError("hybrid_moments: cavity variance below floor");
  if (!(beta_cavity_var > 0.0) || !(gamma_cavity_var > 0.0))
    throw CavityError("hybrid_moments: cavity variance must be positive");
  if (!(slab_var > 0.0))
    throw std::invalid_argument("hybrid_moments: slab_var must be positive");

  const TiltedMoments1D g_spike = probit_tilted_moments(gamma_cavity_mean, gamma_cavity_var, +1.0);
  const TiltedMoments1D g_slab = probit_tilted_moments(gamma_cavity_mean, gamma_cavity_var, -1.0);

  const double log_w_spike = g_spike.log_z + log_normal_at_zero(beta_cavity_mean, beta_cavity_var);
  const double log_w_slab =
      g_slab.log_z + log_normal_at_zero(beta_cavity_mean, beta_cavity_var + slab_var);

  const double m = std::max(log_w_spike, log_w_slab);
  HybridMoments out;
  out.log_z = m + std::log(std::exp(log_w_spike - m) + std::exp(log_w_slab - m));
  out.spike_prob = 1.0 / (1.0 + std::exp(log_w_slab - log_w_spike));
  const double slab_prob = 1.0 - out.spike_prob;

  // Slab branch in beta is the product Gaussian N(b; bm, bv) N(b; 0, slab_var).
  const double prod_var = beta_cavity_var * slab_var / (beta_cavity_var + slab_var);
  const double prod_mean = beta_cavity_mean * slab_var / (beta_cavity_var + slab_var);
  out.beta_mean = slab_prob * prod_mean;
  const double beta_second = slab_prob * (prod_var + prod_mean * prod_mean);
  out.beta_var = std::max(beta_second - out.beta_mean * out.beta_mean, 0.0);

  out.gamma_mean = out.spike_prob * g_spike.mean + slab_prob * g_slab.mean;
  const double gamma_second =
      out.spike_prob * (g_spike.var + g_spike.mean * g_spike.mean) +
      slab_prob * (g_slab.var + g_slab.mean * g_slab.mean);
  out.gamma_var = std::max(gamma_second - out.gamma_mean * out.gamma_mean, 0.0);
  return out;
}

GaussianBelief posterior_beta(const Eigen::MatrixXd& x, double noise_var,
                              const SiteApprox& sites, const Eigen::VectorXd& y,
                              double base_jitter, JitterStats* stats) {
  if (!(noise_var > 0.0))
    throw std::invalid_argument("posterior_beta: noise_var must be positive");
  if (x.rows() != y.size() || x.cols() != sites.dim())
    throw std::invalid_argument("posterior_beta: dimension mismatch");
  const Eigen::MatrixXd gram = x.transpose() * x / noise_var;
  const Eigen::VectorXd xty = x.transpose() * y / noise_var;
  return beta_from_gram(gram, xty, sites, base_jitter, stats);
}

GaussianBelief posterior_gamma(const GaussianBelief& prior, const SiteApprox& sites,
                               double base_jitter, JitterStats* stats) {
  const int n = prior.dim();
  if (sites.dim() != n)
    throw std::invalid_argument("posterior_gamma: dimension mismatch");

  const Eigen::VectorXd d_sqrt = sites.gamma_precision.cwiseMax(0.0).cwiseSqrt();
  const Eigen::MatrixXd a = d_sqrt.asDiagonal() * prior.cov;  // D^1/2 S
  Eigen::MatrixXd b = a * d_sqrt.asDiagonal();
  b.diagonal().array() += 1.0;
  CholPsd cb = chol_psd(symmetrized(b), base_jitter);
  if (stats) stats->record(cb);

  GaussianBelief out;
  out.cov = symmetrized(prior.cov - a.transpose() * chol_solve(cb, a));
  const Eigen::VectorXd dm = d_sqrt.cwiseProduct(prior.mean);
  out.mean = prior.mean - a.transpose() * chol_solve(cb, dm) + out.cov * sites.gamma_shift;
  return out;
}

GaussianMessage mu_likelihood_message(const Eigen::MatrixXd& channel_cov,
                                      const SiteApprox& sites) {
  const int n = static_cast<int>(channel_cov.rows());
  if (sites.dim() != n)
    throw std::invalid_argument("mu_likelihood_message: dimension mismatch");
  const Eigen::VectorXd d = sites.gamma_precision.cwiseMax(0.0);

  // (Sigma + D^-1)^-1 = (D Sigma + I)^-1 D handles vacuous sites without 1/0.
  Eigen::MatrixXd m = d.asDiagonal() * channel_cov;
  m.diagonal().array() += 1.0;
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(m);

  GaussianMessage msg;
  msg.precision = symmetrized(lu.solve(Eigen::MatrixXd(d.asDiagonal())));
  msg.shift = lu.solve(sites.gamma_shift);
  return msg;
}

FramePosterior ep_frame_run(const Eigen::VectorXd& y, const Eigen::MatrixXd& x,
                            const Hyperparameters& hyper,
                            const GaussianBelief& gamma_prior, const EPConfig& config,
                            const SiteApprox* warm_start,
                            const Eigen::MatrixXd* mu_channel_cov) {
  hyper.validate();
  const int n = static_cast<int>(x.cols());
  if (y.size() != x.rows() || gamma_prior.dim() != n)
    throw std::invalid_argument("ep_frame_run: dimension mismatch");
  if (!(config.damping > 0.0) || config.damping > 1.0)
    throw std::invalid_argument("ep_frame_run: damping must be in (0, 1]");

  FramePosterior out;
  FrameDiagnostics& diag = out.diagnostics;

  SiteApprox sites = warm_start ? *warm_start : SiteApprox::zero(n);
  if (!warm_start) {
    // Cold start at the slab width: keeps the joint well conditioned when K < N.
    sites.beta_precision.setConstant(1.0 / hyper.slab_var);
  }

  const Eigen::MatrixXd gram = x.transpose() * x / hyper.noise_var;
  const Eigen::VectorXd xty = x.transpose() * y / hyper.noise_var;

  GaussianBelief beta = beta_from_gram(gram, xty, sites, config.jitter, &diag.jitter);
  GaussianBelief gamma = posterior_gamma(gamma_prior, sites, config.jitter, &diag.jitter);

  Eigen::VectorXd spike_resp(n);
  for (int i = 0; i < n; ++i)
    spike_resp(i) = expected_probit(gamma_prior.mean(i), gamma_prior.cov(i, i));

  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);

  for (int sweep = 1; sweep <= config.max_sweeps; ++sweep) {
    if (config.random_site_order) {
      Rng rng(Rng::derive(config.order_seed, static_cast<std::uint64_t>(sweep)));
      for (int i = n - 1; i > 0; --i)
        std::swap(order[i], order[rng.uniform_int(0, i)]);
    }

    double max_delta = 0.0;
    std::vector<int> skipped;

    for (int i : order) {
      Cavity bc, gc;
      if (!make_cavity(beta.mean(i), beta.cov(i, i), sites.beta_precision(i),
                       sites.beta_shift(i), config.min_cavity_var, &bc) ||
          !make_cavity(gamma.mean(i), gamma.cov(i, i), sites.gamma_precision(i),
                       sites.gamma_shift(i), config.min_cavity_var, &gc)) {
        skipped.push_back(i);
        ++diag.cavity_skips;
        continue;
      }

      const HybridMoments hm =
          hybrid_moments(bc.mean, bc.var, gc.mean, gc.var, hyper.slab_var, 0.0);
      spike_resp(i) = hm.spike_prob;

      // Moment matching in natural parameters; clipped sites go vacuous.
      const double tbv = std::max(hm.beta_var, 1.0 / kMaxSitePrecision);
      const double tgv = std::max(hm.gamma_var, 1.0 / kMaxSitePrecision);
      double tau_b = 1.0 / tbv - bc.precision;
      double nu_b = hm.beta_mean / tbv - bc.mean * bc.precision;
      double tau_g = 1.0 / tgv - gc.precision;
      double nu_g = hm.gamma_mean / tgv - gc.mean * gc.precision;
      if (tau_b < 0.0) {
        tau_b = 0.0;
        nu_b = 0.0;
        ++diag.clip_events;
      }
      if (tau_g < 0.0) {
        tau_g = 0.0;
        nu_g = 0.0;
        ++diag.clip_events;
      }
      tau_b = std::min(tau_b, kMaxSitePrecision);
      tau_g = std::min(tau_g, kMaxSitePrecision);

      const double d = config.damping;
      const double new_tau_b = sites.beta_precision(i) + d * (tau_b - sites.beta_precision(i));
      const double new_nu_b = sites.beta_shift(i) + d * (nu_b - sites.beta_shift(i));
      const double new_tau_g = sites.gamma_precision(i) + d * (tau_g - sites.gamma_precision(i));
      const double new_nu_g = sites.gamma_shift(i) + d * (nu_g - sites.gamma_shift(i));

      max_delta = std::max(
          {max_delta, std::abs(new_tau_b - sites.beta_precision(i)),
           std::abs(new_nu_b - sites.beta_shift(i)),
           std::abs(new_tau_g - sites.gamma_precision(i)),
           std::abs(new_nu_g - sites.gamma_shift(i))});

      if (config.refresh == RefreshMode::rank_one) {
        rank_one_update(beta, i, new_tau_b - sites.beta_precision(i),
                        new_nu_b - sites.beta_shift(i));
        rank_one_update(gamma, i, new_tau_g - sites.gamma_precision(i),
                        new_nu_g - sites.gamma_shift(i));
      }

      sites.beta_precision(i) = new_tau_b;
      sites.beta_shift(i) = new_nu_b;
      sites.gamma_precision(i) = new_tau_g;
      sites.gamma_shift(i) = new_nu_g;

      if (config.refresh == RefreshMode::full) {
        beta = beta_from_gram(gram, xty, sites, config.jitter, &diag.jitter);
        gamma = posterior_gamma(gamma_prior, sites, config.jitter, &diag.jitter);
      }
    }

    if (static_cast<int>(skipped.size()) == n) {
      std::ostringstream msg;
      msg << "ep_frame_run: every site failed its cavity in sweep " << sweep;
      throw DivergedError(msg.str(), sweep, skipped);
    }

    if (config.refresh == RefreshMode::rank_one) {
      // Resync kills the drift rank-one arithmetic accumulates.
      beta = beta_from_gram(gram, xty, sites, config.jitter, &diag.jitter);
      gamma = posterior_gamma(gamma_prior, sites, config.jitter, &diag.jitter);
    }

    out.sweeps_used = sweep;
    if (max_delta < config.tol) {
      out.converged = true;
      break;
    }
  }

  // Read-only responsibility pass from the final beliefs.
  diag.site_log_z_sum = 0.0;
  for (int i = 0; i < n; ++i) {
    Cavity bc, gc;
    if (make_cavity(beta.mean(i), beta.cov(i, i), sites.beta_precision(i),
                    sites.beta_shift(i), config.min_cavity_var, &bc) &&
        make_cavity(gamma.mean(i), gamma.cov(i, i), sites.gamma_precision(i),
                    sites.gamma_shift(i), config.min_cavity_var, &gc)) {
      const HybridMoments hm =
          hybrid_moments(bc.mean, bc.var, gc.mean, gc.var, hyper.slab_var, 0.0);
      spike_resp(i) = hm.spike_prob;
      diag.site_log_z_sum += hm.log_z;
    }
  }

  out.beta_belief = std::move(beta);
  out.gamma_belief = std::move(gamma);
  out.inclusion_prob = spike_resp.cwiseMax(0.0).cwiseMin(1.0);
  out.sites = std::move(sites);
  if (mu_channel_cov != nullptr) {
    out.mu_message = mu_likelihood_message(*mu_channel_cov, out.sites);
  } else {
    out.mu_message =
        mu_likelihood_message(se_kernel_matrix(hyper.spatial_kernel, n), out.sites);
  }
  return out;
}

}  // namespace hgp
