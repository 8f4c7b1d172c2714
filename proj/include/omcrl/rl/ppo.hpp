#pragma once

#include "omcrl/nn/optim.hpp"
#include "omcrl/nn/policy.hpp"

#include <functional>
#include <random>

namespace omcrl::rl {

using ad::Index;
using ad::RowMatrix;

struct PpoHyper {
  double clip = 0.2;
  double lambda = 0.95;
  double gamma = 0.99;
  int horizon = 128;
  int epochs = 3;
  int minibatch = 1024;
  int buffer = 10240;
  double value_coef = 1.0;
  double lr = 3e-4;  // initial value of the linear decay
  bool normalize_advantages = true;
  double max_grad_norm = 0.5;
};

void validate(const PpoHyper& h);

// Step-major rollout storage: entry t * streams + e is step t of stream e.
struct TrajectoryBatch {
  int streams = 1;
  RowMatrix obs;         // [N x D]
  RowMatrix actions;     // [N x A]
  Eigen::VectorXd log_probs;
  Eigen::VectorXd rewards;
  Eigen::VectorXd values;
  std::vector<std::uint8_t> dones;
  // Segment cut by the horizon or the end of the buffer; the GAE chain stops
  // and bootstraps from `bootstrap`.
  std::vector<std::uint8_t> truncated;
  Eigen::VectorXd bootstrap;
  RowMatrix teacher_mean;     // [N x A] when a teacher is active, else empty
  RowMatrix teacher_log_std;  // [N x A]
  Eigen::VectorXd advantages;
  Eigen::VectorXd returns;

  Index size() const { return rewards.size(); }
  bool has_teacher() const { return teacher_mean.rows() == size() && size() > 0; }
  void resize(Index n, Index obs_dim, Index action_dim, bool teacher);
};

// delta_t = r_t + gamma V_{t+1} (1 - done_t) - V_t,
// A_t = delta_t + gamma lambda (1 - done_t) A_{t+1}, V^_t = A_t + V_t,
// per stream; truncated steps bootstrap V_{t+1} and restart the chain.
void compute_gae(TrajectoryBatch& batch, double gamma, double lambda);

// A <- (A - mean) / (std + 1e-8) over the whole batch.
void advantage_normalize(Eigen::VectorXd& advantages);
void advantage_normalize(TrajectoryBatch& batch);

// Row-wise diagonal-Gaussian log density of constant actions.
ad::Var gaussian_log_prob(const ad::Var& mean, const ad::Var& log_std, const RowMatrix& actions);

struct PpoTerms {
  ad::Var total;
  double surrogate = 0.0;   // -E[min(r A, clip(r) A)]
  double value_loss = 0.0;  // E[(V - V^)^2]
  double clip_fraction = 0.0;
};

// Clipped surrogate plus value regression on the rows `idx` of the batch;
// `out` holds the policy outputs for those rows in the same order.
PpoTerms ppo_loss(const nn::PolicyNet::Output& out, const TrajectoryBatch& batch, const std::vector<Index>& idx,
                  double clip, double value_coef);

struct UpdateStats {
  double surrogate = 0.0;
  double value_loss = 0.0;
  double kl = 0.0;
  double total = 0.0;
  double clip_fraction = 0.0;
  long minibatches = 0;
  long samples_seen = 0;
};

// Builds the minibatch loss. `out` is the student/oracle forward pass on the
// minibatch rows; implementations may add terms and record them in stats.
using LossFn = std::function<ad::Var(ad::Tape&, const nn::PolicyNet::Output& out, const std::vector<Index>& idx,
                                     UpdateStats& stats)>;
using ForwardFn = std::function<nn::PolicyNet::Output(ad::Tape&, const std::vector<Index>& idx)>;

// epochs x shuffled minibatches over the whole batch, one Adam step each.
// `visits`, when given, counts how often each transition was used.
UpdateStats ppo_update(const TrajectoryBatch& batch, const PpoHyper& hyper, nn::Adam& optimizer, double lr,
                       std::mt19937_64& rng, const ForwardFn& forward, const LossFn& loss,
                       std::vector<int>* visits = nullptr);

}  // namespace omcrl::rl
