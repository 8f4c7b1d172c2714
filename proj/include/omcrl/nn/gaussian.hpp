#pragma once

// Closed-form diagonal Gaussian quantities, written against Eigen expressions
// so they accept vectors, rows of matrices and blocks alike.

#include <Eigen/Dense>

#include <cmath>
#include <numbers>
#include <random>

namespace omcrl::nn {

template <typename A, typename M, typename S>
typename A::Scalar gaussian_log_prob(const Eigen::MatrixBase<A>& action, const Eigen::MatrixBase<M>& mean,
                                     const Eigen::MatrixBase<S>& log_std) {
  using Scalar = typename A::Scalar;
  const auto z = ((action - mean).array() / log_std.array().exp());
  return Scalar(-0.5) * z.square().sum() - log_std.sum() -
         Scalar(0.5) * Scalar(action.size()) * std::log(Scalar(2) * std::numbers::pi_v<Scalar>);
}

template <typename S>
typename S::Scalar gaussian_entropy(const Eigen::MatrixBase<S>& log_std) {
  using Scalar = typename S::Scalar;
  return log_std.sum() +
         Scalar(0.5) * Scalar(log_std.size()) * (Scalar(1) + std::log(Scalar(2) * std::numbers::pi_v<Scalar>));
}

// D_KL(p || q) for diagonal Gaussians, summed over dimensions.
template <typename MP, typename SP, typename MQ, typename SQ>
typename MP::Scalar kl_diag_gaussian(const Eigen::MatrixBase<MP>& mean_p, const Eigen::MatrixBase<SP>& log_std_p,
                                     const Eigen::MatrixBase<MQ>& mean_q, const Eigen::MatrixBase<SQ>& log_std_q) {
  using Scalar = typename MP::Scalar;
  const auto var_p = (Scalar(2) * log_std_p.array()).exp();
  const auto var_q = (Scalar(2) * log_std_q.array()).exp();
  return ((log_std_q - log_std_p).array() + (var_p + (mean_p - mean_q).array().square()) / (Scalar(2) * var_q) -
          Scalar(0.5))
      .sum();
}

struct GaussianAction {
  Eigen::VectorXd mean;
  Eigen::VectorXd log_std;

  Eigen::VectorXd stddev() const { return log_std.array().exp(); }
  double log_prob(const Eigen::VectorXd& action) const { return gaussian_log_prob(action, mean, log_std); }
  double entropy() const { return gaussian_entropy(log_std); }

  template <typename Rng>
  Eigen::VectorXd sample(Rng& rng) const {
    std::normal_distribution<double> nd(0.0, 1.0);
    Eigen::VectorXd a(mean.size());
    for (Eigen::Index i = 0; i < a.size(); ++i) a[i] = mean[i] + std::exp(log_std[i]) * nd(rng);
    return a;
  }
};

}  // namespace omcrl::nn
