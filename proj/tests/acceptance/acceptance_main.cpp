// Acceptance suite: runs every release criterion at its stated tolerance and
// prints one PASS/FAIL line each. Exit code is the number of failures.

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "hgp/csv.hpp"
#include "hgp/ep_frame.hpp"
#include "hgp/experiment.hpp"
#include "hgp/hier_temporal.hpp"
#include "hgp/model.hpp"
#include "hgp/rng.hpp"
#include "test_oracles.hpp"

namespace fs = std::filesystem;
using namespace hgp;

namespace {

struct Criterion {
  std::string name;
  std::function<bool(std::ostream&)> run;
};

Eigen::MatrixXd random_matrix(int r, int c, Rng& rng) {
  Eigen::MatrixXd m(r, c);
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) m(i, j) = rng.normal();
  return m;
}

bool check_finite_frame(const FramePosterior& fp) {
  return fp.beta_belief.mean.allFinite() && fp.beta_belief.cov.allFinite() &&
         fp.gamma_belief.mean.allFinite() && fp.gamma_belief.cov.allFinite() &&
         fp.inclusion_prob.allFinite() &&
         (fp.beta_belief.cov.diagonal().array() > 0.0).all() &&
         (fp.gamma_belief.cov.diagonal().array() > 0.0).all();
}

// ---------------------------------------------------------------- criterion 1
bool moment_matching_oracle(std::ostream& log) {
  Rng rng(2024);
  const double slabs[] = {0.5, 1.0, 4.0};
  double worst = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    const double bm = -3.0 + 6.0 * rng.uniform();
    const double bv = 0.1 + 4.9 * rng.uniform();
    const double gm = -4.0 + 8.0 * rng.uniform();
    const double gv = 0.1 + 4.9 * rng.uniform();
    const double sv = slabs[trial % 3];

    const HybridMoments got = hybrid_moments(bm, bv, gm, gv, sv);
    const hgp_test::HybridOracle want =
        hgp_test::hybrid_moments_quadrature(bm, bv, gm, gv, sv, 100);

    const double err = std::max(
        {std::abs(got.log_z - want.log_z), std::abs(got.beta_mean - want.beta_mean),
         std::abs(got.beta_var - want.beta_var),
         std::abs(got.gamma_mean - want.gamma_mean),
         std::abs(got.gamma_var - want.gamma_var),
         std::abs(got.spike_prob - want.spike_prob)});
    worst = std::max(worst, err);
  }
  log << "max |closed form - quadrature| = " << worst << " (tol 1e-6)";
  return worst <= 1e-6;
}

// ---------------------------------------------------------------- criterion 2
bool enumeration_oracle(std::ostream& log) {
  double worst_mean = 0.0, worst_incl = 0.0;
  for (int inst = 0; inst < 20; ++inst) {
    Rng rng(500 + inst);
    const int n = 8, k = 8;
    Hyperparameters h;
    h.n = n;
    h.k = k;
    h.t_steps = 1;
    h.noise_var = 0.0625;
    h.slab_var = 1.0;
    h.spatial_kernel = KernelParams(1.0, 3.0);
    h.temporal_kernel = KernelParams(0.25, 3.0);

    const Eigen::MatrixXd x = random_matrix(k, n, rng);
    Eigen::VectorXd prior_mean(n), prior_var(n);
    for (int i = 0; i < n; ++i) {
      prior_mean(i) = -1.0 + 2.0 * rng.uniform();
      prior_var(i) = 0.5 + 1.5 * rng.uniform();
    }
    Eigen::VectorXd beta_true = Eigen::VectorXd::Zero(n);
    for (int i = 0; i < n; ++i)
      if (rng.uniform() < 0.35) beta_true(i) = rng.normal();
    Eigen::VectorXd y = x * beta_true;
    for (int j = 0; j < k; ++j) y(j) += 0.25 * rng.normal();

    GaussianBelief prior{prior_mean, Eigen::MatrixXd(prior_var.asDiagonal())};
    EPConfig cfg;
    cfg.max_sweeps = 200;
    cfg.tol = 1e-9;
    const FramePosterior fp = ep_frame_run(y, x, h, prior, cfg);
    const hgp_test::EnumerationPosterior exact = hgp_test::enumerate_spike_slab(
        y, x, h.noise_var, h.slab_var, prior_mean, prior_var);

    worst_mean = std::max(
        worst_mean, (fp.beta_belief.mean - exact.beta_mean).cwiseAbs().maxCoeff());
    worst_incl = std::max(
        worst_incl, (fp.inclusion_prob - exact.inclusion).cwiseAbs().maxCoeff());
  }
  log << "max |EP - exact| mean = " << worst_mean << " (tol 0.05), inclusion = "
      << worst_incl << " (tol 0.1)";
  return worst_mean <= 0.05 && worst_incl <= 0.1;
}

// ---------------------------------------------------------------- criterion 3
bool temporal_exactness(std::ostream& log) {
  double worst = 0.0;
  for (int seed = 0; seed < 10; ++seed) {
    Rng rng(900 + seed);
    const int n = 2 + rng.uniform_int(0, 14);       // N <= 16
    const int t_steps = 2 + rng.uniform_int(0, 3);  // T <= 5

    TemporalChainSpec spec;
    Eigen::MatrixXd a = random_matrix(n, n, rng);
    spec.w = a * a.transpose() / n + 0.5 * Eigen::MatrixXd::Identity(n, n);
    spec.mu1_prior = {Eigen::VectorXd::Zero(n), spec.w};
    spec.t_steps = t_steps;

    std::vector<GaussianMessage> msgs;
    for (int t = 0; t < t_steps; ++t) {
      if (rng.uniform() < 0.25) {
        msgs.push_back(GaussianMessage::vacuous(n));
        continue;
      }
      Eigen::MatrixXd b = random_matrix(n, n, rng);
      GaussianMessage m;
      m.precision = b * b.transpose() / n + 0.1 * Eigen::MatrixXd::Identity(n, n);
      m.shift = random_matrix(n, 1, rng);
      msgs.push_back(std::move(m));
    }

    const auto smoothed = rts_smooth(spec, kalman_forward(spec, msgs));
    const auto batch = hgp_test::batch_chain_posterior(spec, msgs);
    for (int t = 0; t < t_steps; ++t) {
      worst = std::max(worst,
                       (smoothed[t].mean - batch[t].mean).cwiseAbs().maxCoeff());
      worst = std::max(worst,
                       (smoothed[t].cov - batch[t].cov).cwiseAbs().maxCoeff());
    }
  }
  log << "max |filter+smooth - batch solve| = " << worst << " (tol 1e-8)";
  return worst <= 1e-8;
}

// ---------------------------------------------------------------- criterion 4
bool generative_self_consistency(std::ostream& log) {
  Hyperparameters h;
  h.n = 64;
  h.k = 26;
  h.t_steps = 1;
  h.noise_var = 1e-2;
  h.slab_var = 1.0;
  h.spatial_kernel = KernelParams(1.0, 3.0);
  h.temporal_kernel = KernelParams(0.25, 3.0);

  long spikes = 0, total = 0;
  bool invariant_ok = true;
  for (int rep = 0; rep < 500; ++rep) {
    const SampledData s = sample_trajectory(h, 3000 + rep);
    spikes += s.latent.omega.sum();
    total += s.latent.omega.size();
    for (int i = 0; i < h.n; ++i) {
      if (s.latent.omega(0, i) == 1 && s.latent.beta(0, i) != 0.0) invariant_ok = false;
      if (s.latent.omega(0, i) != 0 && s.latent.omega(0, i) != 1) invariant_ok = false;
    }
  }
  const double rate = static_cast<double>(spikes) / static_cast<double>(total);
  // gamma_i ~ N(0, alpha_Sigma + alpha_W) marginally, so E[Phi(gamma)] = 0.5.
  const double expected =
      expected_probit(0.0, h.spatial_kernel.amplitude + h.temporal_kernel.amplitude);
  const double se = std::sqrt(0.25 / static_cast<double>(total));
  log << "spike rate = " << rate << " vs " << expected << " (band " << 3.0 * se
      << "), spike=>zero invariant " << (invariant_ok ? "held" : "VIOLATED");
  return invariant_ok && std::abs(rate - expected) <= 3.0 * se;
}

// ---------------------------------------------------------------- criterion 5
bool directional_replication(std::ostream& log) {
  ExperimentConfig base;  // defaults: N=64, T=10, ratio 0.4 -> K=26, 3x5 blobs
  CompareOptions opts;
  opts.num_seeds = 10;
  opts.base_seed = 1;
  opts.variants = {Variant::hierarchical, Variant::one_level};
  const CompareResult r = run_compare(base, opts);

  int hier_wins = 0, hier_small = 0, one_small = 0;
  double hier_f = 0.0, one_f = 0.0;
  for (int s = 0; s < opts.num_seeds; ++s) {
    const MetricReport& hier = r.per_seed[0][s];
    const MetricReport& one = r.per_seed[1][s];
    if (hier.nmse <= one.nmse) ++hier_wins;
    if (hier.nmse < 0.15) ++hier_small;
    if (one.nmse < 0.15) ++one_small;
    hier_f += hier.f_measure / opts.num_seeds;
    one_f += one.f_measure / opts.num_seeds;
  }
  log << "hier<=one on " << hier_wins << "/10 seeds; mean F " << hier_f << " vs "
      << one_f << "; nmse<0.15 on " << hier_small << "/10 (hier) and " << one_small
      << "/10 (one_level)";
  return hier_wins >= 8 && hier_f >= one_f && hier_small >= 8 && one_small >= 8;
}

// ---------------------------------------------------------------- criterion 6
bool numerical_hygiene(std::ostream& log) {
  // Sweep the seeded instances the suite leans on and inspect every exposed
  // field, then confirm the run artifacts carry the hygiene counters.
  bool ok = true;
  std::ostringstream why;

  for (int seed = 0; seed < 5; ++seed) {
    Rng rng(40 + seed);
    const int n = 24, k = 10, t_steps = 4;
    Hyperparameters h;
    h.n = n;
    h.k = k;
    h.t_steps = t_steps;
    h.noise_var = 1e-2;
    h.slab_var = 1.0;
    h.spatial_kernel = KernelParams(1.0, 3.0);
    h.temporal_kernel = KernelParams(0.25, 3.0);
    const Eigen::MatrixXd x = random_matrix(k, n, rng);
    const Eigen::MatrixXd y = random_matrix(t_steps, k, rng);
    const HierResult hr = hier_ep_run(y, x, h, EPConfig{}, OuterConfig{});
    for (const auto& f : hr.frames)
      if (!check_finite_frame(f)) {
        ok = false;
        why << "non-finite frame field (seed " << seed << "); ";
      }
    for (const auto& b : hr.mu_smoothed)
      if (!b.mean.allFinite() || !(b.cov.diagonal().array() > 0.0).all()) {
        ok = false;
        why << "bad smoothed belief (seed " << seed << "); ";
      }
    for (double c : hr.diagnostics.outer_mu_change)
      if (!std::isfinite(c)) ok = false;
  }

  const fs::path dir = fs::temp_directory_path() / "hgp_acceptance_hygiene";
  fs::remove_all(dir);
  ExperimentConfig c;
  c.blobs.n = 32;
  c.blobs.t_steps = 3;
  c.blobs.num_blobs = 2;
  c.blobs.blob_width = 4;
  c.out_dir = dir.string();
  const RunResult r = run_experiment(c);
  if (!r.beta_hat.allFinite() || !r.inclusion_prob.allFinite()) {
    ok = false;
    why << "non-finite run outputs; ";
  }
  std::ifstream diag_in(dir / "diagnostics.json");
  std::stringstream diag;
  diag << diag_in.rdbuf();
  for (const char* key :
       {"clip_events", "jitter_escalations", "max_jitter", "finite_outputs"}) {
    if (diag.str().find(key) == std::string::npos) {
      ok = false;
      why << "diagnostics.json missing " << key << "; ";
    }
  }
  if (diag.str().find("\"finite_outputs\": true") == std::string::npos) {
    ok = false;
    why << "finite_outputs flag not true; ";
  }
  fs::remove_all(dir);

  log << (ok ? "all exposed fields finite, variances positive, counters reported"
             : why.str());
  return ok;
}

// ---------------------------------------------------------------- criterion 7
bool determinism(std::ostream& log) {
  const fs::path base = fs::temp_directory_path() / "hgp_acceptance_determinism";
  fs::remove_all(base);
  fs::create_directories(base);
  const fs::path dir_a = base / "a";
  const fs::path dir_b = base / "b";

  auto slurp = [](const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  };

  // Default config, desk scale, run twice through the CLI when available.
  const char* cli = std::getenv("HGP_CLI");
  bool ok = false;
  if (cli != nullptr && *cli != '\0') {
    const fs::path cfg_path = base / "config.json";
    std::ofstream(cfg_path)
        << R"({"data":{"blobs":{"n":32,"t_steps":3,"num_blobs":2,"blob_width":4}},)"
        << R"("ep":{"max_sweeps":40},"outer":{"max_outer":4}})";
    std::ostringstream cmd_a, cmd_b;
    cmd_a << '"' << cli << '"' << " run --config " << cfg_path << " --out " << dir_a
          << " > " << (base / "log_a.txt") << " 2>&1";
    cmd_b << '"' << cli << '"' << " run --config " << cfg_path << " --out " << dir_b
          << " > " << (base / "log_b.txt") << " 2>&1";
    const int rc_a = std::system(cmd_a.str().c_str());
    const int rc_b = std::system(cmd_b.str().c_str());
    const std::string ma = slurp(dir_a / "metrics.json");
    const std::string mb = slurp(dir_b / "metrics.json");
    ok = rc_a == 0 && rc_b == 0 && !ma.empty() && ma == mb;
    log << "CLI run twice: metrics.json " << (ok ? "byte-identical" : "DIFFER")
        << " (" << ma.size() << " bytes)";
  } else {
    ExperimentConfig c;
    c.blobs.n = 32;
    c.blobs.t_steps = 3;
    c.blobs.num_blobs = 2;
    c.blobs.blob_width = 4;
    c.out_dir = dir_a.string();
    run_experiment(c);
    c.out_dir = dir_b.string();
    run_experiment(c);
    const std::string ma = slurp(dir_a / "metrics.json");
    const std::string mb = slurp(dir_b / "metrics.json");
    ok = !ma.empty() && ma == mb;
    log << "library run twice (HGP_CLI unset): metrics.json "
        << (ok ? "byte-identical" : "DIFFER");
  }
  fs::remove_all(base);
  return ok;
}

}  // namespace

int main() {
  std::vector<Criterion> criteria = {
      {"moment-matching oracle (200 tuples, 1e-6)", moment_matching_oracle},
      {"enumeration oracle (20 instances, 0.05 / 0.1)", enumeration_oracle},
      {"temporal exactness vs batch solve (1e-8)", temporal_exactness},
      {"generative self-consistency (spike rate, spike=>zero)",
       generative_self_consistency},
      {"directional replication (hier vs one_level, 10 paired seeds)",
       directional_replication},
      {"numerical hygiene (finite fields, positive variances, counters)",
       numerical_hygiene},
      {"determinism (run twice, byte-identical metrics.json)", determinism},
  };

  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    std::ostringstream detail;
    bool ok = false;
    const auto start = std::chrono::steady_clock::now();
    try {
      ok = criteria[i].run(detail);
    } catch (const std::exception& e) {
      detail << "exception: " << e.what();
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
            .count();
    std::cout << (ok ? "[PASS]" : "[FAIL]") << " criterion " << (i + 1) << ": "
              << criteria[i].name << " — " << detail.str() << " [" << secs << "s]\n";
    if (!ok) ++failures;
  }
  std::cout << (failures == 0 ? "ALL CRITERIA PASSED" : "SOME CRITERIA FAILED")
            << " (" << criteria.size() - failures << "/" << criteria.size() << ")\n";
  return failures;
}
