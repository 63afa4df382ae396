#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

namespace hgp {

struct MetricReport {
  double nmse = 0.0;
  double f_measure = 0.0;
  double threshold_used = 0.0;
  std::vector<double> per_frame_nmse;
  std::string label;
};

/// Pooled normalized squared error: sum_t ||b_t - bh_t||^2 / sum_t ||b_t||^2.
/// Throws when the truth is identically zero.
double nmse(const Eigen::MatrixXd& beta_true, const Eigen::MatrixXd& beta_hat);

/// Per-frame variant of the same ratio. Frames with zero truth energy fall
/// back to the mean frame energy as normalizer so the output stays finite.
std::vector<double> per_frame_nmse(const Eigen::MatrixXd& beta_true,
                                   const Eigen::MatrixXd& beta_hat);

// F-measure over |value| > threshold masks pooled across all entries.
// Conventions: P = 1 when nothing is predicted, R = 1 when nothing is true,
// F = 0 when P + R = 0; two empty masks score 1.
double f_measure(const Eigen::MatrixXd& beta_true, const Eigen::MatrixXd& beta_hat,
                 double threshold);

using BoolMask = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;

/// Same statistic on precomputed masks (used when the predicted mask comes
/// from posterior inclusion probabilities instead of magnitudes).
double f_measure_masks(const BoolMask& truth, const BoolMask& predicted);

MetricReport make_metric_report(const Eigen::MatrixXd& beta_true,
                                const Eigen::MatrixXd& beta_hat, double threshold,
                                const std::string& label);

/// Metric-by-run comparison. best_run is -1 where runs tie on a metric.
struct ComparisonTable {
  std::vector<std::string> metric_names;
  std::vector<std::string> run_labels;
  Eigen::MatrixXd values;  // metric x run
  std::vector<int> best_run;
  std::vector<bool> tie;

  std::string to_csv() const;
  std::string to_text() const;
};

ComparisonTable compare_runs(const std::vector<MetricReport>& reports);

}  // namespace hgp
