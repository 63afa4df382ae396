#include "hgp/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <future>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "hgp/csv.hpp"
#include "hgp/errors.hpp"
#include "hgp/rng.hpp"

namespace hgp {

namespace fs = std::filesystem;
using nlohmann::json;

void BlobSpec::validate() const {
  if (n < 1 || t_steps < 1) throw ConfigError("BlobSpec: n and t_steps must be >= 1");
  if (blob_width < 1) throw ConfigError("BlobSpec: blob_width must be >= 1");
  if (num_blobs < 1) throw ConfigError("BlobSpec: num_blobs must be >= 1");
  if (2 * num_blobs * blob_width > n)
    throw ConfigError("BlobSpec: num_blobs * blob_width must be <= n / 2");
  if (drift_std < 0.0 || !(amplitude_std > 0.0))
    throw ConfigError("BlobSpec: drift_std must be >= 0 and amplitude_std > 0");
}

namespace {

int reflect_into(int pos, int hi) {
  if (hi <= 0) return 0;
  while (pos < 0 || pos > hi) pos = (pos < 0) ? -pos : 2 * hi - pos;
  return pos;
}

}  // namespace

Eigen::MatrixXd generate_blob_sequence(const BlobSpec& spec, std::uint64_t seed) {
  spec.validate();
  Rng rng(seed);
  const int hi = spec.n - spec.blob_width;

  std::vector<int> pos(spec.num_blobs);
  std::vector<Eigen::VectorXd> values(spec.num_blobs);
  for (int b = 0; b < spec.num_blobs; ++b) {
    pos[b] = rng.uniform_int(0, hi);
    values[b].resize(spec.blob_width);
    for (int j = 0; j < spec.blob_width; ++j)
      values[b](j) = spec.amplitude_std * rng.normal();
  }

  Eigen::MatrixXd beta = Eigen::MatrixXd::Zero(spec.t_steps, spec.n);
  for (int t = 0; t < spec.t_steps; ++t) {
    if (t > 0) {
      for (int b = 0; b < spec.num_blobs; ++b) {
        const int step = static_cast<int>(std::lround(spec.drift_std * rng.normal()));
        pos[b] = reflect_into(pos[b] + step, hi);
        for (int j = 0; j < spec.blob_width; ++j)
          values[b](j) += 0.1 * spec.amplitude_std * rng.normal();
      }
    }
    for (int b = 0; b < spec.num_blobs; ++b)
      for (int j = 0; j < spec.blob_width; ++j) beta(t, pos[b] + j) += values[b](j);
  }
  return beta;
}

std::string to_string(Variant v) {
  switch (v) {
    case Variant::hierarchical: return "hierarchical";
    case Variant::one_level: return "one_level";
    case Variant::independent: return "independent";
  }
  throw std::logic_error("unknown variant");
}

std::string to_string(MaskSource m) {
  return m == MaskSource::magnitude ? "magnitude" : "inclusion";
}

Variant variant_from_string(const std::string& s) {
  if (s == "hierarchical") return Variant::hierarchical;
  if (s == "one_level") return Variant::one_level;
  if (s == "independent") return Variant::independent;
  throw ConfigError("unknown variant: " + s);
}

MaskSource mask_source_from_string(const std::string& s) {
  if (s == "magnitude") return MaskSource::magnitude;
  if (s == "inclusion") return MaskSource::inclusion;
  throw ConfigError("unknown mask_source: " + s);
}

double ExperimentConfig::resolved_mask_threshold() const {
  return mask_threshold.value_or(0.1 * std::sqrt(model.slab_var));
}

void ExperimentConfig::validate() const {
  if (!(measurement_ratio > 0.0) || measurement_ratio > 1.0)
    throw ConfigError("measurement_ratio must be in (0, 1]");
  if (!(model.noise_var > 0.0) || !(model.slab_var > 0.0))
    throw ConfigError("noise_var and slab_var must be positive");
  if (csv_path.empty()) blobs.validate();
  if (mask_threshold && !(*mask_threshold > 0.0))
    throw ConfigError("mask_threshold must be positive");
  if (!(ep.damping > 0.0) || ep.damping > 1.0)
    throw ConfigError("ep.damping must be in (0, 1]");
  if (ep.max_sweeps < 1 || outer.max_outer < 1)
    throw ConfigError("ep.max_sweeps and outer.max_outer must be >= 1");
}

namespace {

std::string refresh_to_string(RefreshMode m) {
  return m == RefreshMode::rank_one ? "rank_one" : "full";
}

RefreshMode refresh_from_string(const std::string& s) {
  if (s == "rank_one") return RefreshMode::rank_one;
  if (s == "full") return RefreshMode::full;
  throw ConfigError("unknown ep.refresh: " + s);
}

json config_to_json(const ExperimentConfig& c) {
  json j;
  j["data"]["source"] = c.csv_path.empty() ? "blobs" : "csv";
  j["data"]["csv_path"] = c.csv_path;
  j["data"]["blobs"] = {{"n", c.blobs.n},
                        {"t_steps", c.blobs.t_steps},
                        {"num_blobs", c.blobs.num_blobs},
                        {"blob_width", c.blobs.blob_width},
                        {"drift_std", c.blobs.drift_std},
                        {"amplitude_std", c.blobs.amplitude_std}};
  j["model"] = {
      {"noise_var", c.model.noise_var},
      {"slab_var", c.model.slab_var},
      {"spatial_kernel",
       {{"amplitude", c.model.spatial_kernel.amplitude},
        {"lengthscale", c.model.spatial_kernel.lengthscale}}},
      {"temporal_kernel",
       {{"amplitude", c.model.temporal_kernel.amplitude},
        {"lengthscale", c.model.temporal_kernel.lengthscale}}}};
  j["measurement_ratio"] = c.measurement_ratio;
  j["variant"] = to_string(c.variant);
  j["ep"] = {{"max_sweeps", c.ep.max_sweeps},
             {"tol", c.ep.tol},
             {"damping", c.ep.damping},
             {"min_cavity_var", c.ep.min_cavity_var},
             {"jitter", c.ep.jitter},
             {"random_site_order", c.ep.random_site_order},
             {"refresh", refresh_to_string(c.ep.refresh)}};
  j["outer"] = {{"max_outer", c.outer.max_outer},
                {"outer_tol", c.outer.outer_tol},
                {"mean_only_prior", c.outer.mean_only_prior},
                {"diagonal_mu_message", c.outer.diagonal_mu_message},
                {"filter_only", c.outer.filter_only}};
  j["seeds"] = {{"data", c.seeds.data},
                {"sensing", c.seeds.sensing},
                {"noise", c.seeds.noise},
                {"inference", c.seeds.inference}};
  j["out_dir"] = c.out_dir;
  j["mask_threshold"] = c.resolved_mask_threshold();
  j["mask_source"] = to_string(c.mask_source);
  return j;
}

template <typename T>
void maybe(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

ExperimentConfig config_from_json(const json& j) {
  ExperimentConfig c;
  if (j.contains("data")) {
    const json& d = j.at("data");
    std::string source = "blobs";
    maybe(d, "source", source);
    if (source == "csv") {
      if (!d.contains("csv_path") || d.at("csv_path").get<std::string>().empty())
        throw ConfigError("data.source is csv but data.csv_path is missing");
      c.csv_path = d.at("csv_path").get<std::string>();
    } else if (source != "blobs") {
      throw ConfigError("unknown data.source: " + source);
    }
    if (d.contains("blobs")) {
      const json& b = d.at("blobs");
      maybe(b, "n", c.blobs.n);
      maybe(b, "t_steps", c.blobs.t_steps);
      maybe(b, "num_blobs", c.blobs.num_blobs);
      maybe(b, "blob_width", c.blobs.blob_width);
      maybe(b, "drift_std", c.blobs.drift_std);
      maybe(b, "amplitude_std", c.blobs.amplitude_std);
    }
  }
  if (j.contains("model")) {
    const json& m = j.at("model");
    maybe(m, "noise_var", c.model.noise_var);
    maybe(m, "slab_var", c.model.slab_var);
    if (m.contains("spatial_kernel")) {
      const json& k = m.at("spatial_kernel");
      c.model.spatial_kernel = KernelParams(k.value("amplitude", 1.0),
                                            k.value("lengthscale", 3.0));
    }
    if (m.contains("temporal_kernel")) {
      const json& k = m.at("temporal_kernel");
      c.model.temporal_kernel = KernelParams(k.value("amplitude", 0.25),
                                             k.value("lengthscale", 3.0));
    }
  }
  maybe(j, "measurement_ratio", c.measurement_ratio);
  if (j.contains("variant")) c.variant = variant_from_string(j.at("variant").get<std::string>());
  if (j.contains("ep")) {
    const json& e = j.at("ep");
    maybe(e, "max_sweeps", c.ep.max_sweeps);
    maybe(e, "tol", c.ep.tol);
    maybe(e, "damping", c.ep.damping);
    maybe(e, "min_cavity_var", c.ep.min_cavity_var);
    maybe(e, "jitter", c.ep.jitter);
    maybe(e, "random_site_order", c.ep.random_site_order);
    if (e.contains("refresh"))
      c.ep.refresh = refresh_from_string(e.at("refresh").get<std::string>());
  }
  if (j.contains("outer")) {
    const json& o = j.at("outer");
    maybe(o, "max_outer", c.outer.max_outer);
    maybe(o, "outer_tol", c.outer.outer_tol);
    maybe(o, "mean_only_prior", c.outer.mean_only_prior);
    maybe(o, "diagonal_mu_message", c.outer.diagonal_mu_message);
    maybe(o, "filter_only", c.outer.filter_only);
  }
  if (j.contains("seeds")) {
    const json& s = j.at("seeds");
    maybe(s, "data", c.seeds.data);
    maybe(s, "sensing", c.seeds.sensing);
    maybe(s, "noise", c.seeds.noise);
    maybe(s, "inference", c.seeds.inference);
  }
  maybe(j, "out_dir", c.out_dir);
  if (j.contains("mask_threshold")) c.mask_threshold = j.at("mask_threshold").get<double>();
  if (j.contains("mask_source"))
    c.mask_source = mask_source_from_string(j.at("mask_source").get<std::string>());
  return c;
}

void write_text_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write file: " + path.string());
  out << text;
}

std::string metrics_to_json(const MetricReport& r, MaskSource source) {
  json j;
  j["label"] = r.label;
  j["nmse"] = r.nmse;
  j["f_measure"] = r.f_measure;
  j["threshold_used"] = r.threshold_used;
  j["per_frame_nmse"] = r.per_frame_nmse;
  j["mask_source"] = to_string(source);
  return j.dump(2) + "\n";
}

std::string metrics_to_csv(const MetricReport& r) {
  std::ostringstream os;
  os.precision(17);
  os << "metric,frame,value\n";
  os << "nmse,all," << r.nmse << "\n";
  os << "f_measure,all," << r.f_measure << "\n";
  for (std::size_t t = 0; t < r.per_frame_nmse.size(); ++t)
    os << "nmse," << t << "," << r.per_frame_nmse[t] << "\n";
  return os.str();
}

}  // namespace

ExperimentConfig load_experiment_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_experiment_config(ss.str());
}

ExperimentConfig parse_experiment_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config JSON parse error: ") + e.what());
  }
  try {
    return config_from_json(j);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config JSON type error: ") + e.what());
  }
}

std::string resolved_config_json(const ExperimentConfig& config, int n, int k,
                                 int t_steps) {
  json j = config_to_json(config);
  j["derived"] = {{"n", n}, {"k", k}, {"t_steps", t_steps}};
  j["rng_algorithm"] = Rng::algorithm_id();
  return j.dump(2) + "\n";
}

namespace {

struct InferenceOutput {
  Eigen::MatrixXd beta_hat;
  Eigen::MatrixXd inclusion;
  std::optional<Eigen::MatrixXd> mu_smoothed;
  json diagnostics;
};

json frame_diag_json(const std::vector<FramePosterior>& frames) {
  json j;
  std::vector<int> sweeps;
  std::vector<bool> conv;
  int clips = 0, skips = 0;
  JitterStats jitter;
  double log_z = 0.0;
  for (const auto& f : frames) {
    sweeps.push_back(f.sweeps_used);
    conv.push_back(f.converged);
    clips += f.diagnostics.clip_events;
    skips += f.diagnostics.cavity_skips;
    jitter.merge(f.diagnostics.jitter);
    log_z += f.diagnostics.site_log_z_sum;
  }
  j["frame_sweeps"] = sweeps;
  j["frame_converged"] = conv;
  j["clip_events"] = clips;
  j["cavity_skips"] = skips;
  j["jitter_escalations"] = jitter.escalations;
  j["max_jitter"] = jitter.max_jitter;
  j["site_log_z_sum"] = log_z;
  return j;
}

InferenceOutput infer(const ExperimentConfig& config, const Hyperparameters& hyper,
                      const Eigen::MatrixXd& x, const Eigen::MatrixXd& y) {
  const int n = hyper.n;
  const int t_steps = hyper.t_steps;

  EPConfig ep = config.ep;
  ep.order_seed = config.seeds.inference;

  InferenceOutput out;
  out.beta_hat.resize(t_steps, n);
  out.inclusion.resize(t_steps, n);

  if (config.variant == Variant::hierarchical) {
    HierResult hr = hier_ep_run(y, x, hyper, ep, config.outer);
    Eigen::MatrixXd mu(t_steps, n);
    for (int t = 0; t < t_steps; ++t) {
      out.beta_hat.row(t) = hr.frames[t].beta_belief.mean.transpose();
      out.inclusion.row(t) = hr.frames[t].inclusion_prob.transpose();
      mu.row(t) = hr.mu_smoothed[t].mean.transpose();
    }
    out.mu_smoothed = std::move(mu);

    out.diagnostics = frame_diag_json(hr.frames);
    out.diagnostics["outer_iters"] = hr.outer_iters;
    out.diagnostics["outer_converged"] = hr.converged;
    out.diagnostics["outer_mu_change"] = hr.diagnostics.outer_mu_change;
    out.diagnostics["outer_frame_sweeps"] = hr.diagnostics.frame_sweeps;
    out.diagnostics["clip_events"] = hr.diagnostics.clip_events;
    out.diagnostics["cavity_skips"] = hr.diagnostics.cavity_skips;
    out.diagnostics["jitter_escalations"] = hr.diagnostics.jitter.escalations;
    out.diagnostics["max_jitter"] = hr.diagnostics.jitter.max_jitter;
  } else {
    const Eigen::MatrixXd channel =
        config.variant == Variant::one_level
            ? se_kernel_matrix(hyper.spatial_kernel, n)
            : Eigen::MatrixXd(hyper.spatial_kernel.amplitude *
                              Eigen::MatrixXd::Identity(n, n));
    const GaussianBelief prior{Eigen::VectorXd::Zero(n), channel};

    std::vector<FramePosterior> frames(t_steps);
    for (int t = 0; t < t_steps; ++t) {
      frames[t] = ep_frame_run(y.row(t).transpose(), x, hyper, prior, ep, nullptr,
                               &channel);
      out.beta_hat.row(t) = frames[t].beta_belief.mean.transpose();
      out.inclusion.row(t) = frames[t].inclusion_prob.transpose();
    }
    out.diagnostics = frame_diag_json(frames);
  }

  out.diagnostics["variant"] = to_string(config.variant);
  return out;
}

}  // namespace

RunResult run_experiment(const ExperimentConfig& config) {
  config.validate();

  const Eigen::MatrixXd beta_true = config.csv_path.empty()
                                        ? generate_blob_sequence(config.blobs,
                                                                 config.seeds.data)
                                        : ingest_csv_frames(config.csv_path);
  const int n = static_cast<int>(beta_true.cols());
  const int t_steps = static_cast<int>(beta_true.rows());
  const int k =
      std::max(1, static_cast<int>(std::lround(config.measurement_ratio * n)));

  Hyperparameters hyper;
  hyper.n = n;
  hyper.k = k;
  hyper.t_steps = t_steps;
  hyper.noise_var = config.model.noise_var;
  hyper.slab_var = config.model.slab_var;
  hyper.spatial_kernel = config.model.spatial_kernel;
  hyper.temporal_kernel = config.model.temporal_kernel;
  hyper.validate();

  RunResult result;
  result.hyper = hyper;
  result.beta_true = beta_true;
  result.resolved_config = resolved_config_json(config, n, k, t_steps);

  const bool write_artifacts = !config.out_dir.empty();
  if (write_artifacts) {
    fs::create_directories(config.out_dir);
    write_text_file(fs::path(config.out_dir) / "config.resolved.json",
                    result.resolved_config);
    write_matrix_csv((fs::path(config.out_dir) / "beta_true.csv").string(), beta_true);
  }

  const Eigen::MatrixXd x = make_sensing_matrix(hyper, config.seeds.sensing);
  const Eigen::MatrixXd y = observe(x, beta_true, hyper.noise_var, config.seeds.noise);

  InferenceOutput inf;
  try {
    inf = infer(config, hyper, x, y);
  } catch (const DivergedError& e) {
    if (write_artifacts) {
      json j;
      j["variant"] = to_string(config.variant);
      j["error"] = e.what();
      j["diverged_sweep"] = e.sweep;
      j["failed_sites"] = e.failed_sites;
      write_text_file(fs::path(config.out_dir) / "diagnostics.json", j.dump(2) + "\n");
    }
    throw;
  }

  const double threshold = config.resolved_mask_threshold();
  result.report = make_metric_report(beta_true, inf.beta_hat, threshold,
                                     to_string(config.variant));
  if (config.mask_source == MaskSource::inclusion) {
    // Predicted support = slab responsibility >= 0.5; truth still by magnitude.
    result.report.f_measure = f_measure_masks(
        beta_true.array().abs() > threshold, inf.inclusion.array() < 0.5);
  }

  result.beta_hat = std::move(inf.beta_hat);
  result.inclusion_prob = std::move(inf.inclusion);
  result.mu_smoothed = std::move(inf.mu_smoothed);

  const bool finite = all_finite(result.beta_hat) && all_finite(result.inclusion_prob) &&
                      (!result.mu_smoothed || all_finite(*result.mu_smoothed));
  inf.diagnostics["finite_outputs"] = finite;
  result.diagnostics = inf.diagnostics.dump(2) + "\n";

  if (write_artifacts) {
    const fs::path dir(config.out_dir);
    write_text_file(dir / "metrics.json",
                    metrics_to_json(result.report, config.mask_source));
    write_text_file(dir / "metrics.csv", metrics_to_csv(result.report));
    write_matrix_csv((dir / "beta_hat.csv").string(), result.beta_hat);
    write_matrix_csv((dir / "inclusion_prob.csv").string(), result.inclusion_prob);
    if (result.mu_smoothed)
      write_matrix_csv((dir / "mu_smoothed.csv").string(), *result.mu_smoothed);
    write_text_file(dir / "diagnostics.json", result.diagnostics);
  }
  return result;
}

CompareResult run_compare(const ExperimentConfig& base, const CompareOptions& options) {
  if (options.num_seeds < 1) throw ConfigError("compare: num_seeds must be >= 1");
  if (options.variants.empty()) throw ConfigError("compare: need at least one variant");

  const int v_count = static_cast<int>(options.variants.size());
  CompareResult result;
  result.per_seed.assign(v_count, {});

  struct Job {
    int variant_idx;
    int seed_idx;
    ExperimentConfig config;
  };
  std::vector<Job> jobs;
  for (int v = 0; v < v_count; ++v) {
    for (int s = 0; s < options.num_seeds; ++s) {
      ExperimentConfig c = base;
      c.variant = options.variants[v];
      c.seeds.data = options.base_seed + static_cast<std::uint64_t>(s);
      c.seeds.sensing = options.base_seed + 10000 + static_cast<std::uint64_t>(s);
      c.seeds.noise = options.base_seed + 20000 + static_cast<std::uint64_t>(s);
      if (!base.out_dir.empty()) {
        c.out_dir = (fs::path(base.out_dir) /
                     (to_string(c.variant) + "_seed" + std::to_string(s)))
                        .string();
      }
      jobs.push_back({v, s, std::move(c)});
    }
  }

  std::vector<MetricReport> reports(jobs.size());
  const int workers = std::max(1, options.jobs);
  for (std::size_t start = 0; start < jobs.size(); start += workers) {
    const std::size_t stop = std::min(jobs.size(), start + workers);
    std::vector<std::future<MetricReport>> batch;
    for (std::size_t i = start; i < stop; ++i) {
      batch.push_back(std::async(std::launch::async, [&jobs, i]() {
        return run_experiment(jobs[i].config).report;
      }));
    }
    for (std::size_t i = start; i < stop; ++i)
      reports[i] = batch[i - start].get();
  }

  for (std::size_t i = 0; i < jobs.size(); ++i)
    result.per_seed[jobs[i].variant_idx].push_back(reports[i]);

  json summary;
  summary["num_seeds"] = options.num_seeds;
  summary["base_seed"] = options.base_seed;
  for (int v = 0; v < v_count; ++v) {
    const auto& runs = result.per_seed[v];
    MetricReport agg;
    agg.label = to_string(options.variants[v]);
    agg.threshold_used = runs.front().threshold_used;
    std::size_t frames = runs.front().per_frame_nmse.size();
    agg.per_frame_nmse.assign(frames, 0.0);
    json seed_list = json::array();
    for (int s = 0; s < options.num_seeds; ++s) {
      agg.nmse += runs[s].nmse / options.num_seeds;
      agg.f_measure += runs[s].f_measure / options.num_seeds;
      for (std::size_t t = 0; t < frames; ++t)
        agg.per_frame_nmse[t] += runs[s].per_frame_nmse[t] / options.num_seeds;
      seed_list.push_back({{"seed_index", s},
                           {"nmse", runs[s].nmse},
                           {"f_measure", runs[s].f_measure}});
    }
    summary["per_seed"][agg.label] = seed_list;
    result.aggregate.push_back(std::move(agg));
  }

  result.table = compare_runs(result.aggregate);
  summary["mean_table_csv"] = result.table.to_csv();
  result.summary_json = summary.dump(2) + "\n";

  if (!base.out_dir.empty()) {
    fs::create_directories(base.out_dir);
    write_text_file(fs::path(base.out_dir) / "compare_table.csv", result.table.to_csv());
    write_text_file(fs::path(base.out_dir) / "compare_table.txt", result.table.to_text());
    write_text_file(fs::path(base.out_dir) / "compare_summary.json", result.summary_json);
  }
  return result;
}

}  // namespace hgp
