#pragma once

#include "omcrl/nn/gaussian.hpp"
#include "omcrl/nn/layers.hpp"

namespace omcrl::nn {

// layernorm(input) -> Linear -> ReLU -> Linear -> ReLU -> Linear
class Mlp {
 public:
  Mlp() = default;
  Mlp(const std::string& name, ad::Index in, ad::Index hidden, ad::Index out, double out_gain,
      std::mt19937_64& rng);

  Var forward(Tape& tape, const Var& x, bool trainable);
  void collect(ParameterRefs& out);
  ad::Index in_dim() const { return l1_.in_dim(); }

 private:
  LayerNorm in_norm_;
  Linear l1_, l2_, out_;
};

struct PolicyConfig {
  ad::Index input_dim = 0;
  ad::Index hidden = 256;
  ad::Index action_dim = 3;
  double log_std_min = -5.0;
  double log_std_max = 2.0;
  double init_log_std = 0.0;
};

// Diagonal-Gaussian actor with a state-independent log-std vector plus a
// separate critic.
class PolicyNet {
 public:
  struct Output {
    Var mean;     // [N x A]
    Var log_std;  // [N x A], clamped
    Var value;    // [N]
  };

  PolicyNet() = default;
  PolicyNet(const std::string& name, const PolicyConfig& config, std::mt19937_64& rng);

  Output forward(Tape& tape, const Var& obs, bool trainable);
  Var actor_forward(Tape& tape, const Var& obs, bool trainable, Var* log_std_out);
  void collect(ParameterRefs& out);

  // Numeric single-observation evaluation.
  GaussianAction act(const Eigen::VectorXd& obs);
  double value(const Eigen::VectorXd& obs);

  const PolicyConfig& config() const { return config_; }
  Parameter& log_std() { return log_std_; }

 private:
  PolicyConfig config_;
  Mlp actor_;
  Parameter log_std_;
  Mlp critic_;
};

// Evaluates the actor on one observation; throws NumericError when the
// parameters produce non-finite outputs.
GaussianAction policy_forward(PolicyNet& policy, const Eigen::VectorXd& obs);

}  // namespace omcrl::nn
