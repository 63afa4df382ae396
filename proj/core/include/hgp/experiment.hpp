#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "hgp/ep_frame.hpp"
#include "hgp/eval.hpp"
#include "hgp/hier_temporal.hpp"
#include "hgp/model.hpp"

namespace hgp {

/// Synthetic structured signal: rectangular blobs whose integer centers do
/// reflected random walks and whose amplitudes drift slowly across frames.
struct BlobSpec {
  int n = 64;
  int t_steps = 10;
  int num_blobs = 3;
  int blob_width = 5;
  double drift_std = 1.0;
  double amplitude_std = 1.0;

  void validate() const;
};

/// T x N ground-truth sequence; entries outside blob supports are exactly 0.
Eigen::MatrixXd generate_blob_sequence(const BlobSpec& spec, std::uint64_t seed);

enum class Variant { hierarchical, one_level, independent };
enum class MaskSource { magnitude, inclusion };

std::string to_string(Variant v);
std::string to_string(MaskSource m);
Variant variant_from_string(const std::string& s);
MaskSource mask_source_from_string(const std::string& s);

struct Seeds {
  std::uint64_t data = 1;
  std::uint64_t sensing = 2;
  std::uint64_t noise = 3;
  std::uint64_t inference = 4;
};

/// Model constants minus the dimensions, which are derived from the data and
/// the measurement ratio at run time.
struct ModelParams {
  double noise_var = 1e-2;
  double slab_var = 1.0;
  KernelParams spatial_kernel{1.0, 3.0};
  KernelParams temporal_kernel{0.25, 3.0};
};

struct ExperimentConfig {
  std::string csv_path;  // when set, frames come from this file instead of blobs
  BlobSpec blobs;
  ModelParams model;
  double measurement_ratio = 0.4;
  Variant variant = Variant::hierarchical;
  EPConfig ep;
  OuterConfig outer;
  Seeds seeds;
  std::string out_dir;  // empty: no artifacts written
  std::optional<double> mask_threshold;  // default 0.1 * sqrt(slab_var)
  MaskSource mask_source = MaskSource::magnitude;

  double resolved_mask_threshold() const;
  void validate() const;
};

/// Parse a config JSON file / string. Missing keys keep their defaults.
ExperimentConfig load_experiment_config(const std::string& path);
ExperimentConfig parse_experiment_config(const std::string& json_text);

/// Full config echo with every default materialized, including derived
/// dimensions and the RNG algorithm id. Re-running from this string
/// reproduces the run exactly.
std::string resolved_config_json(const ExperimentConfig& config, int n, int k,
                                 int t_steps);

struct RunResult {
  MetricReport report;
  Eigen::MatrixXd beta_true;
  Eigen::MatrixXd beta_hat;
  Eigen::MatrixXd inclusion_prob;
  std::optional<Eigen::MatrixXd> mu_smoothed;
  Hyperparameters hyper;
  std::string resolved_config;  // JSON
  std::string diagnostics;      // JSON
};

// Run one experiment end to end: build or load the truth, sense, observe,
// infer with the configured variant, score, and (when out_dir is set) write
// config.resolved.json, metrics.json, metrics.csv, beta_true.csv,
// beta_hat.csv, inclusion_prob.csv, mu_smoothed.csv (hierarchical only) and
// diagnostics.json. All outputs are pure functions of the config. On EP
// divergence the diagnostics file is still written before the error
// propagates.
RunResult run_experiment(const ExperimentConfig& config);

struct CompareOptions {
  int num_seeds = 10;
  std::uint64_t base_seed = 1;
  std::vector<Variant> variants = {Variant::hierarchical, Variant::one_level,
                                   Variant::independent};
  int jobs = 1;
};

struct CompareResult {
  std::vector<std::vector<MetricReport>> per_seed;  // [variant][seed]
  std::vector<MetricReport> aggregate;              // seed means per variant
  ComparisonTable table;
  std::string summary_json;
};

// Paired-seed comparison: every variant sees identical data, sensing and
// noise streams for each seed index. Independent runs may execute
// concurrently (jobs > 1); each writes to its own subdirectory of
// base.out_dir when set.
CompareResult run_compare(const ExperimentConfig& base, const CompareOptions& options);

}  // namespace hgp
