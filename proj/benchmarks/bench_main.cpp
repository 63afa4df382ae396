#include <benchmark/benchmark.h>

#include "hgp/ep_frame.hpp"
#include "hgp/experiment.hpp"
#include "hgp/hier_temporal.hpp"
#include "hgp/model.hpp"
#include "hgp/rng.hpp"

namespace {

hgp::Hyperparameters bench_hyper(int n, int k, int t_steps) {
  hgp::Hyperparameters h;
  h.n = n;
  h.k = k;
  h.t_steps = t_steps;
  h.noise_var = 1e-2;
  h.slab_var = 1.0;
  h.spatial_kernel = hgp::KernelParams(1.0, 3.0);
  h.temporal_kernel = hgp::KernelParams(0.25, 3.0);
  return h;
}

void BM_SeKernel(benchmark::State& state) {
  const hgp::KernelParams p(1.0, 3.0);
  const int n = static_cast<int>(state.range(0));
  for (auto _ : state)
    benchmark::DoNotOptimize(hgp::se_kernel_matrix(p, n));
}
BENCHMARK(BM_SeKernel)->Arg(64)->Arg(256);

void BM_CholPsd(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const Eigen::MatrixXd m = hgp::se_kernel_matrix(hgp::KernelParams(1.0, 3.0), n);
  for (auto _ : state)
    benchmark::DoNotOptimize(hgp::chol_psd(m, 0.0));
}
BENCHMARK(BM_CholPsd)->Arg(64)->Arg(256);

void BM_HybridMoments(benchmark::State& state) {
  hgp::Rng rng(1);
  for (auto _ : state) {
    const double bm = -2.0 + 4.0 * rng.uniform();
    const double gm = -3.0 + 6.0 * rng.uniform();
    benchmark::DoNotOptimize(hgp::hybrid_moments(bm, 0.8, gm, 1.2, 1.0));
  }
}
BENCHMARK(BM_HybridMoments);

void BM_EpFrame(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const int k = n * 2 / 5;
  const hgp::Hyperparameters h = bench_hyper(n, k, 1);
  const Eigen::MatrixXd x = hgp::make_sensing_matrix(h, 2);
  hgp::Rng rng(3);
  Eigen::VectorXd y(k);
  for (int j = 0; j < k; ++j) y(j) = rng.normal();
  const hgp::GaussianBelief prior{Eigen::VectorXd::Zero(n),
                                  hgp::se_kernel_matrix(h.spatial_kernel, n)};
  for (auto _ : state)
    benchmark::DoNotOptimize(hgp::ep_frame_run(y, x, h, prior, hgp::EPConfig{}));
}
BENCHMARK(BM_EpFrame)->Arg(32)->Arg(64)->Unit(benchmark::kMillisecond);

void BM_KalmanSmooth(benchmark::State& state) {
  const int n = 64, t_steps = 10;
  const hgp::Hyperparameters h = bench_hyper(n, 26, t_steps);
  const hgp::TemporalChainSpec spec = hgp::TemporalChainSpec::from_hyper(h);
  hgp::Rng rng(4);
  std::vector<hgp::GaussianMessage> msgs;
  for (int t = 0; t < t_steps; ++t) {
    Eigen::MatrixXd a(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) a(i, j) = rng.normal();
    hgp::GaussianMessage m;
    m.precision = a * a.transpose() / n;
    m.shift.setZero(n);
    msgs.push_back(std::move(m));
  }
  for (auto _ : state) {
    auto filtered = hgp::kalman_forward(spec, msgs);
    benchmark::DoNotOptimize(hgp::rts_smooth(spec, filtered));
  }
}
BENCHMARK(BM_KalmanSmooth)->Unit(benchmark::kMillisecond);

void BM_HierRun(benchmark::State& state) {
  hgp::ExperimentConfig c;
  c.blobs.n = 32;
  c.blobs.t_steps = 4;
  c.blobs.num_blobs = 2;
  c.blobs.blob_width = 4;
  c.outer.max_outer = 4;
  for (auto _ : state)
    benchmark::DoNotOptimize(hgp::run_experiment(c));
}
BENCHMARK(BM_HierRun)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
