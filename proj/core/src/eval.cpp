#include "hgp/eval.hpp"

#include <cmath>
#include <iomanip>
#include <sstream>
#include <stdexcept>

namespace hgp {

namespace {

void check_shapes(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw std::invalid_argument("metric inputs must have identical shapes");
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string quoted = "\"";
  for (char c : s) {
    if (c == '"') quoted += '"';
    quoted += c;
  }
  return quoted + "\"";
}

}  // namespace

double nmse(const Eigen::MatrixXd& beta_true, const Eigen::MatrixXd& beta_hat) {
  check_shapes(beta_true, beta_hat);
  const double denom = beta_true.squaredNorm();
  if (!(denom > 0.0))
    throw std::invalid_argument("nmse: truth is identically zero, normalizer undefined");
  return (beta_true - beta_hat).squaredNorm() / denom;
}

std::vector<double> per_frame_nmse(const Eigen::MatrixXd& beta_true,
                                   const Eigen::MatrixXd& beta_hat) {
  check_shapes(beta_true, beta_hat);
  const int t_steps = static_cast<int>(beta_true.rows());
  const double mean_energy = beta_true.squaredNorm() / std::max(t_steps, 1);
  std::vector<double> out(t_steps);
  for (int t = 0; t < t_steps; ++t) {
    const double num = (beta_true.row(t) - beta_hat.row(t)).squaredNorm();
    const double den = beta_true.row(t).squaredNorm();
    out[t] = num / (den > 0.0 ? den : mean_energy);
  }
  return out;
}

double f_measure(const Eigen::MatrixXd& beta_true, const Eigen::MatrixXd& beta_hat,
                 double threshold) {
  check_shapes(beta_true, beta_hat);
  return f_measure_masks(beta_true.array().abs() > threshold,
                         beta_hat.array().abs() > threshold);
}

double f_measure_masks(const BoolMask& truth, const BoolMask& predicted) {
  if (truth.rows() != predicted.rows() || truth.cols() != predicted.cols())
    throw std::invalid_argument("f_measure_masks: masks must have identical shapes");
  long tp = 0, fp = 0, fn = 0;
  for (Eigen::Index i = 0; i < truth.rows(); ++i) {
    for (Eigen::Index j = 0; j < truth.cols(); ++j) {
      if (truth(i, j) && predicted(i, j)) ++tp;
      else if (!truth(i, j) && predicted(i, j)) ++fp;
      else if (truth(i, j) && !predicted(i, j)) ++fn;
    }
  }
  const double precision = (tp + fp == 0) ? 1.0 : static_cast<double>(tp) / (tp + fp);
  const double recall = (tp + fn == 0) ? 1.0 : static_cast<double>(tp) / (tp + fn);
  if (precision + recall == 0.0) return 0.0;
  return 2.0 * precision * recall / (precision + recall);
}

MetricReport make_metric_report(const Eigen::MatrixXd& beta_true,
                                const Eigen::MatrixXd& beta_hat, double threshold,
                                const std::string& label) {
  MetricReport r;
  r.nmse = nmse(beta_true, beta_hat);
  r.f_measure = f_measure(beta_true, beta_hat, threshold);
  r.threshold_used = threshold;
  r.per_frame_nmse = per_frame_nmse(beta_true, beta_hat);
  r.label = label;
  return r;
}

ComparisonTable compare_runs(const std::vector<MetricReport>& reports) {
  if (reports.empty())
    throw std::invalid_argument("compare_runs: need at least one report");

  ComparisonTable t;
  t.metric_names = {"nmse", "f_measure"};
  const int runs = static_cast<int>(reports.size());
  t.values.resize(2, runs);
  for (int j = 0; j < runs; ++j) {
    t.run_labels.push_back(reports[j].label);
    t.values(0, j) = reports[j].nmse;
    t.values(1, j) = reports[j].f_measure;
  }

  // Row 0 minimizes, row 1 maximizes.
  for (int m = 0; m < 2; ++m) {
    int best = 0;
    for (int j = 1; j < runs; ++j) {
      const bool better = (m == 0) ? t.values(m, j) < t.values(m, best)
                                   : t.values(m, j) > t.values(m, best);
      if (better) best = j;
    }
    int count = 0;
    for (int j = 0; j < runs; ++j)
      if (t.values(m, j) == t.values(m, best)) ++count;
    if (count > 1) {
      t.best_run.push_back(-1);
      t.tie.push_back(true);
    } else {
      t.best_run.push_back(best);
      t.tie.push_back(false);
    }
  }
  return t;
}

std::string ComparisonTable::to_csv() const {
  std::ostringstream os;
  os << "metric";
  for (const auto& label : run_labels) os << "," << csv_field(label);
  os << ",best\n";
  for (std::size_t m = 0; m < metric_names.size(); ++m) {
    os << metric_names[m];
    os << std::setprecision(17);
    for (int j = 0; j < values.cols(); ++j) os << "," << values(m, j);
    os << "," << (tie[m] ? "tie" : csv_field(run_labels[best_run[m]])) << "\n";
  }
  return os.str();
}

std::string ComparisonTable::to_text() const {
  std::ostringstream os;
  os << std::left << std::setw(12) << "metric";
  for (const auto& label : run_labels) os << std::setw(18) << label;
  os << "best\n";
  for (std::size_t m = 0; m < metric_names.size(); ++m) {
    os << std::left << std::setw(12) << metric_names[m];
    for (int j = 0; j < values.cols(); ++j) {
      std::ostringstream cell;
      cell << std::setprecision(6) << values(m, j);
      if (!tie[m] && best_run[m] == j) cell << " *";
      os << std::setw(18) << cell.str();
    }
    os << (tie[m] ? "tie" : run_labels[best_run[m]]) << "\n";
  }
  return os.str();
}

}  // namespace hgp
