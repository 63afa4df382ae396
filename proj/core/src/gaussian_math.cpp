#include "hgp/gaussian_math.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

namespace hgp {

namespace {

constexpr double kLogSqrt2Pi = 0.9189385332046727417803297364;  // log sqrt(2 pi)

// Tail series for Phi(z) ~ phi(z)/(-z) * (1 - 1/z^2 + 3/z^4 - 15/z^6), z << 0.
double tail_series(double z) {
  const double zi2 = 1.0 / (z * z);
  return 1.0 - zi2 * (1.0 - 3.0 * zi2 * (1.0 - 5.0 * zi2));
}

constexpr double kTailCut = -37.0;

}  // namespace

KernelParams::KernelParams(double amplitude, double lengthscale)
    : amplitude(amplitude), lengthscale(lengthscale) {
  if (!(amplitude > 0.0) || !std::isfinite(amplitude))
    throw std::invalid_argument("KernelParams: amplitude must be positive");
  if (!(lengthscale > 0.0) || !std::isfinite(lengthscale))
    throw std::invalid_argument("KernelParams: lengthscale must be positive");
}

Eigen::MatrixXd se_kernel_matrix(const KernelParams& params, int n) {
  if (n < 1) throw std::invalid_argument("se_kernel_matrix: n must be >= 1");
  Eigen::MatrixXd m(n, n);
  const double inv2l2 = 1.0 / (2.0 * params.lengthscale * params.lengthscale);
  for (int i = 0; i < n; ++i) {
    m(i, i) = params.amplitude;
    for (int j = i + 1; j < n; ++j) {
      const double d = static_cast<double>(i - j);
      const double v = params.amplitude * std::exp(-d * d * inv2l2);
      m(i, j) = v;
      m(j, i) = v;
    }
  }
  return m;
}

CholPsd chol_psd(const Eigen::MatrixXd& m, double base_jitter) {
  if (m.rows() != m.cols())
    throw std::invalid_argument("chol_psd: matrix must be square");
  if (!is_symmetric(m))
    throw std::invalid_argument("chol_psd: matrix must be symmetric");

  const int n = static_cast<int>(m.rows());
  double base = base_jitter;
  if (base <= 0.0) {
    const double mean_diag = m.diagonal().mean();
    base = 1e-10 * (mean_diag > 0.0 ? mean_diag : 1.0);
  }

  double jitter = 0.0;
  int attempts = 0;
  for (int rung = 0; rung <= 7; ++rung) {
    ++attempts;
    Eigen::MatrixXd shifted = m;
    if (jitter > 0.0) shifted.diagonal().array() += jitter;
    Eigen::LLT<Eigen::MatrixXd> llt(shifted);
    if (llt.info() == Eigen::Success) {
      CholPsd out;
      out.lower = llt.matrixL();
      out.jitter = jitter;
      out.attempts = attempts;
      return out;
    }
    jitter = (rung == 0) ? base : jitter * 10.0;
  }

  std::ostringstream msg;
  msg << "chol_psd: factorization failed for " << n << "x" << n
      << " matrix after jitter ladder up to " << base * 1e6;
  throw NotPsdError(msg.str(), base * 1e6, attempts);
}

Eigen::MatrixXd chol_solve(const CholPsd& chol, const Eigen::MatrixXd& rhs) {
  Eigen::MatrixXd y = chol.lower.triangularView<Eigen::Lower>().solve(rhs);
  return chol.lower.transpose().triangularView<Eigen::Upper>().solve(y);
}

Eigen::MatrixXd chol_inverse(const CholPsd& chol) {
  const int n = static_cast<int>(chol.lower.rows());
  return symmetrized(chol_solve(chol, Eigen::MatrixXd::Identity(n, n)));
}

double std_normal_pdf(double x) {
  return std::exp(-0.5 * x * x - kLogSqrt2Pi);
}

double log_std_normal_pdf(double x) {
  return -0.5 * x * x - kLogSqrt2Pi;
}

double std_normal_cdf(double x) {
  return 0.5 * std::erfc(-x * std::numbers::sqrt2 / 2.0);
}

double log_std_normal_cdf(double x) {
  if (x > kTailCut) return std::log(std_normal_cdf(x));
  return log_std_normal_pdf(x) - std::log(-x) + std::log(tail_series(x));
}

double inverse_mills(double x) {
  if (x > kTailCut) return std_normal_pdf(x) / std_normal_cdf(x);
  return -x / tail_series(x);
}

double expected_probit(double mean, double variance) {
  if (variance < 0.0 || !std::isfinite(variance))
    throw std::domain_error("expected_probit: variance must be >= 0");
  return std_normal_cdf(mean / std::sqrt(1.0 + variance));
}

TiltedMoments1D probit_tilted_moments(double mean, double var, double sign) {
  const double t2 = 1.0 + var;
  const double t = std::sqrt(t2);
  const double z = sign * mean / t;
  const double r = inverse_mills(z);
  // z + r cancels catastrophically only deep in the tail; use the series there.
  const double zr = (z > kTailCut) ? (z + r) : (-z * (1.0 - tail_series(z)) / tail_series(z));
  TiltedMoments1D out;
  out.log_z = log_std_normal_cdf(z);
  out.mean = mean + sign * var * r / t;
  out.var = var - var * var * r * zr / t2;
  if (out.var < 0.0) out.var = 0.0;
  return out;
}

bool is_symmetric(const Eigen::MatrixXd& m, double rel_tol) {
  if (m.rows() != m.cols()) return false;
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  return (m - m.transpose()).cwiseAbs().maxCoeff() <= rel_tol * scale;
}

bool all_finite(const Eigen::MatrixXd& m) {
  return m.allFinite();
}

}  // namespace hgp
