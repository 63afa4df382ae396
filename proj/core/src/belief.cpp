#include "hgp/belief.hpp"

#include <stdexcept>

namespace hgp {

GaussianBelief update_with_message(const GaussianBelief& belief,
                                   const GaussianMessage& msg) {
  if (msg.dim() != belief.dim())
    throw std::invalid_argument("update_with_message: dimension mismatch");
  if (msg.is_vacuous()) return belief;

  const int n = belief.dim();
  Eigen::MatrixXd m = Eigen::MatrixXd::Identity(n, n) + belief.cov * msg.precision;
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(m);
  GaussianBelief out;
  out.cov = symmetrized(lu.solve(belief.cov));
  out.mean = lu.solve(belief.mean + belief.cov * msg.shift);
  return out;
}

GaussianBelief divide_message(const GaussianBelief& belief,
                              const GaussianMessage& msg,
                              double base_jitter, JitterStats* stats) {
  if (msg.dim() != belief.dim())
    throw std::invalid_argument("divide_message: dimension mismatch");
  if (msg.is_vacuous()) return belief;

  CholPsd cb = chol_psd(belief.cov, base_jitter);
  if (stats) stats->record(cb);
  Eigen::MatrixXd prec = chol_inverse(cb);
  Eigen::VectorXd shift = prec * belief.mean;

  Eigen::MatrixXd rem_prec = symmetrized(prec - msg.precision);
  Eigen::VectorXd rem_shift = shift - msg.shift;

  CholPsd cr = chol_psd(rem_prec, base_jitter);
  if (stats) stats->record(cr);
  GaussianBelief out;
  out.cov = chol_inverse(cr);
  out.mean = out.cov * rem_shift;
  return out;
}

}  // namespace hgp
