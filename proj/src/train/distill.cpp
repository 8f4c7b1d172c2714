#include "omcrl/train/distill.hpp"

#include "omcrl/error.hpp"

#include <cmath>

namespace omcrl::train {

ad::Var kl_gaussian(const ad::RowMatrix& mean_p, const ad::RowMatrix& log_std_p, const ad::Var& mean_q,
                    const ad::Var& log_std_q) {
  if (mean_p.rows() != mean_q.dim(0) || mean_p.cols() != mean_q.dim(1) || log_std_p.rows() != mean_p.rows() ||
      log_std_p.cols() != mean_p.cols() || log_std_q.shape() != mean_q.shape())
    throw DimensionError("kl_gaussian: teacher " + std::to_string(mean_p.rows()) + "x" +
                         std::to_string(mean_p.cols()) + " vs student " + ad::shape_string(mean_q.shape()));
  ad::Tape& t = mean_q.tape();
  // Per dimension: d + (exp(-2d) - 1) / 2 + (mu_q - mu_p)^2 / (2 sigma_q^2) with
  // d = log sigma_q - log sigma_p; identical distributions give exactly 0.
  const ad::Var d = log_std_q - t.constant(log_std_p);
  const ad::Var diff = mean_q - t.constant(mean_p);
  const ad::Var terms = d + 0.5 * ad::shift(ad::exp(-2.0 * d), -1.0) + 0.5 * ad::square(diff) * ad::exp(-2.0 * log_std_q);
  return ad::sum_last(terms);
}

ad::Var kl_monte_carlo(const ad::RowMatrix& mean_p, const ad::RowMatrix& log_std_p, const ad::Var& mean_q,
                       const ad::Var& log_std_q, int samples, std::mt19937_64& rng) {
  if (samples < 1) throw ConfigError("kl_monte_carlo: samples must be positive");
  ad::Tape& t = mean_q.tape();
  const ad::Index n = mean_p.rows();
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<ad::Var> parts;
  for (int s = 0; s < samples; ++s) {
    ad::RowMatrix a(n, mean_p.cols());
    Eigen::VectorXd log_p(n);
    for (ad::Index i = 0; i < n; ++i) {
      for (ad::Index d = 0; d < a.cols(); ++d) a(i, d) = mean_p(i, d) + std::exp(log_std_p(i, d)) * normal(rng);
      log_p[i] = nn::gaussian_log_prob(a.row(i).transpose(), mean_p.row(i).transpose(),
                                       log_std_p.row(i).transpose());
    }
    parts.push_back(t.constant({n}, log_p) - rl::gaussian_log_prob(mean_q, log_std_q, a));
  }
  ad::Var sum = parts.front();
  for (std::size_t s = 1; s < parts.size(); ++s) sum = sum + parts[s];
  return sum * (1.0 / samples);
}

std::string to_string(DecayKind kind) {
  switch (kind) {
    case DecayKind::linear: return "linear";
    case DecayKind::exponential: return "exp";
    case DecayKind::fixed: return "fixed";
  }
  return "?";
}

DecayKind decay_from_string(const std::string& name) {
  if (name == "linear") return DecayKind::linear;
  if (name == "exp" || name == "exponential") return DecayKind::exponential;
  if (name == "fixed") return DecayKind::fixed;
  throw ConfigError("decay kind '" + name + "' is not one of linear, exp, fixed");
}

void validate(const DecaySchedule& s) {
  if (!(s.alpha0 >= 0 && s.alpha0 <= 1)) throw ConfigError("decay.alpha0 must lie in [0, 1]");
  if (s.horizon < 1) throw ConfigError("decay.horizon must be positive");
  if (!(s.exp_factor > 0 && s.exp_factor <= 1)) throw ConfigError("decay.exp_factor must lie in (0, 1]");
  if (s.exp_interval < 1) throw ConfigError("decay.exp_interval must be positive");
  if (s.beta < 0) throw ConfigError("decay.beta must be non-negative");
}

double alpha(long step, const DecaySchedule& s) {
  if (step < 0) throw ContractError("alpha: negative step " + std::to_string(step));
  switch (s.kind) {
    case DecayKind::linear:
      return s.alpha0 * std::max(0.0, 1.0 - static_cast<double>(step) / static_cast<double>(s.horizon));
    case DecayKind::fixed:
      return s.alpha0;
    case DecayKind::exponential:
      return s.alpha0 * std::pow(s.exp_factor, static_cast<double>(step / s.exp_interval));
  }
  return 0.0;
}

StudentLossTerms student_loss(const ad::Var& rl_loss, const std::optional<ad::Var>& kl_mean, double a, double beta) {
  if (a < 0 || a > 1) throw ContractError("student_loss: alpha " + std::to_string(a) + " outside [0, 1]");
  StudentLossTerms out;
  out.rl = rl_loss.item();
  if (a == 0.0) {
    out.total = rl_loss;
    if (kl_mean) out.kl = kl_mean->item();
    return out;
  }
  if (!kl_mean) throw ContractError("student_loss: alpha > 0 but no teacher parameters in the batch");
  out.kl = kl_mean->item();
  out.total = (1.0 - a) * rl_loss + (a * beta) * *kl_mean;
  return out;
}

}  // namespace omcrl::train
