#pragma once

#include "omcrl/rl/ppo.hpp"

#include <optional>
#include <random>
#include <string>

namespace omcrl::train {

// Row-wise D_KL(p || q) between diagonal Gaussians. The teacher p is a
// constant; gradients reach the student's mean and log-std only.
ad::Var kl_gaussian(const ad::RowMatrix& mean_p, const ad::RowMatrix& log_std_p, const ad::Var& mean_q,
                    const ad::Var& log_std_q);

// Sample estimate E_{a~p}[log p(a) - log q(a)] with `samples` draws per row.
ad::Var kl_monte_carlo(const ad::RowMatrix& mean_p, const ad::RowMatrix& log_std_p, const ad::Var& mean_q,
                       const ad::Var& log_std_q, int samples, std::mt19937_64& rng);

enum class DecayKind { linear, exponential, fixed };

std::string to_string(DecayKind kind);
DecayKind decay_from_string(const std::string& name);

struct DecaySchedule {
  DecayKind kind = DecayKind::linear;
  double alpha0 = 0.95;
  long horizon = 10000;       // linear: steps to reach 0
  double exp_factor = 0.95;   // exponential: factor per interval
  long exp_interval = 1000;
  double beta = 1.0;
};

void validate(const DecaySchedule& s);
double alpha(long step, const DecaySchedule& schedule);

struct StudentLossTerms {
  ad::Var total;
  double rl = 0.0;
  double kl = 0.0;
};

// (1 - alpha) L_rl + alpha beta mean KL. With alpha == 0 the KL term is not
// required; with alpha > 0 a missing KL is a contract violation.
StudentLossTerms student_loss(const ad::Var& rl_loss, const std::optional<ad::Var>& kl_mean, double alpha,
                              double beta);

}  // namespace omcrl::train
