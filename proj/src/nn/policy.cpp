#include "omcrl/nn/policy.hpp"

#include "omcrl/error.hpp"

#include <cmath>

namespace omcrl::nn {

Mlp::Mlp(const std::string& name, ad::Index in, ad::Index hidden, ad::Index out, double out_gain,
         std::mt19937_64& rng)
    : in_norm_(name + ".in_norm", in),
      l1_(name + ".l1", in, hidden, std::sqrt(2.0), rng),
      l2_(name + ".l2", hidden, hidden, std::sqrt(2.0), rng),
      out_(name + ".out", hidden, out, out_gain, rng) {}

Var Mlp::forward(Tape& tape, const Var& x, bool trainable) {
  Var h = in_norm_.forward(tape, x, trainable);
  h = ad::relu(l1_.forward(tape, h, trainable));
  h = ad::relu(l2_.forward(tape, h, trainable));
  return out_.forward(tape, h, trainable);
}

void Mlp::collect(ParameterRefs& out) {
  in_norm_.collect(out);
  l1_.collect(out);
  l2_.collect(out);
  out_.collect(out);
}

PolicyNet::PolicyNet(const std::string& name, const PolicyConfig& config, std::mt19937_64& rng)
    : config_(config),
      actor_(name + ".actor", config.input_dim, config.hidden, config.action_dim, 0.01, rng),
      log_std_(name + ".log_std", {config.action_dim}),
      critic_(name + ".critic", config.input_dim, config.hidden, 1, 1.0, rng) {
  log_std_.value.setConstant(config.init_log_std);
}

Var PolicyNet::actor_forward(Tape& tape, const Var& obs, bool trainable, Var* log_std_out) {
  Var mean = actor_.forward(tape, obs, trainable);
  if (log_std_out) {
    Var ls = ad::clamp(bind(tape, log_std_, trainable), config_.log_std_min, config_.log_std_max);
    *log_std_out = ad::repeat_rows(ls, obs.dim(0));
  }
  return mean;
}

PolicyNet::Output PolicyNet::forward(Tape& tape, const Var& obs, bool trainable) {
  Output out;
  out.mean = actor_forward(tape, obs, trainable, &out.log_std);
  out.value = ad::reshape(critic_.forward(tape, obs, trainable), {obs.dim(0)});
  return out;
}

void PolicyNet::collect(ParameterRefs& out) {
  actor_.collect(out);
  out.push_back(&log_std_);
  critic_.collect(out);
}

GaussianAction PolicyNet::act(const Eigen::VectorXd& obs) {
  Tape tape;
  Var x = tape.constant({1, obs.size()}, obs);
  Var ls;
  Var mean = actor_forward(tape, x, false, &ls);
  return {Eigen::VectorXd(mean.values()), Eigen::VectorXd(ls.values())};
}

double PolicyNet::value(const Eigen::VectorXd& obs) {
  Tape tape;
  return critic_.forward(tape, tape.constant({1, obs.size()}, obs), false).item();
}

GaussianAction policy_forward(PolicyNet& policy, const Eigen::VectorXd& obs) {
  if (obs.size() != policy.config().input_dim)
    throw DimensionError("policy: observation width " + std::to_string(obs.size()) + " vs " +
                         std::to_string(policy.config().input_dim));
  GaussianAction a = policy.act(obs);
  if (!a.mean.allFinite() || !a.log_std.allFinite())
    throw NumericError("policy: non-finite action distribution (NaN in parameters?)");
  return a;
}

}  // namespace omcrl::nn
