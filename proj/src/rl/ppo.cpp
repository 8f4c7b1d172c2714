#include "omcrl/rl/ppo.hpp"

#include "omcrl/error.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

namespace omcrl::rl {

void validate(const PpoHyper& h) {
  auto require = [](bool ok, const std::string& what) {
    if (!ok) throw ConfigError("rl." + what);
  };
  require(h.clip > 0, "clip must be positive");
  require(h.lambda > 0 && h.lambda <= 1, "lambda must lie in (0, 1]");
  require(h.gamma > 0 && h.gamma <= 1, "gamma must lie in (0, 1]");
  require(h.horizon >= 1, "horizon must be positive");
  require(h.epochs >= 1, "epochs must be positive");
  require(h.minibatch >= 1, "minibatch must be positive");
  require(h.buffer >= h.minibatch, "buffer must hold at least one minibatch");
  require(h.value_coef >= 0, "value_coef must be non-negative");
  require(h.lr > 0, "lr must be positive");
  require(h.max_grad_norm >= 0, "max_grad_norm must be non-negative");
}

void TrajectoryBatch::resize(Index n, Index obs_dim, Index action_dim, bool teacher) {
  obs.resize(n, obs_dim);
  actions.resize(n, action_dim);
  log_probs.resize(n);
  rewards.resize(n);
  values.resize(n);
  dones.assign(static_cast<std::size_t>(n), 0);
  truncated.assign(static_cast<std::size_t>(n), 0);
  bootstrap = Eigen::VectorXd::Zero(n);
  if (teacher) {
    teacher_mean.resize(n, action_dim);
    teacher_log_std.resize(n, action_dim);
  } else {
    teacher_mean.resize(0, 0);
    teacher_log_std.resize(0, 0);
  }
  advantages = Eigen::VectorXd::Zero(n);
  returns = Eigen::VectorXd::Zero(n);
}

void compute_gae(TrajectoryBatch& b, double gamma, double lambda) {
  const Index n = b.size();
  const Index E = b.streams;
  if (E < 1 || n % E != 0) throw DimensionError("compute_gae: batch size not a multiple of the stream count");
  if (b.values.size() != n) throw DimensionError("compute_gae: values and rewards differ in length");
  b.advantages.resize(n);
  b.returns.resize(n);
  for (Index e = 0; e < E; ++e) {
    double next_adv = 0.0;
    double next_value = 0.0;
    bool have_next = false;
    for (Index i = n - E + e; i >= 0; i -= E) {
      const bool done = b.dones[static_cast<std::size_t>(i)];
      const bool cut = !done && (b.truncated[static_cast<std::size_t>(i)] || !have_next);
      double v_next = done ? 0.0 : (cut ? b.bootstrap[i] : next_value);
      const double delta = b.rewards[i] + gamma * v_next - b.values[i];
      const double carry = (done || cut) ? 0.0 : gamma * lambda * next_adv;
      b.advantages[i] = delta + carry;
      b.returns[i] = b.advantages[i] + b.values[i];
      next_adv = b.advantages[i];
      next_value = b.values[i];
      have_next = true;
    }
  }
}

void advantage_normalize(Eigen::VectorXd& a) {
  if (a.size() == 0) return;
  const double mean = a.mean();
  const double var = (a.array() - mean).square().mean();
  a = ((a.array() - mean) / (std::sqrt(var) + 1e-8)).matrix();
}

void advantage_normalize(TrajectoryBatch& b) { advantage_normalize(b.advantages); }

ad::Var gaussian_log_prob(const ad::Var& mean, const ad::Var& log_std, const RowMatrix& actions) {
  ad::Tape& t = mean.tape();
  const ad::Var z = (t.constant(actions) - mean) * ad::exp(-log_std);
  const double c = 0.5 * static_cast<double>(actions.cols()) * std::log(2.0 * std::numbers::pi);
  return ad::sum_last(-0.5 * ad::square(z) - log_std) - c;
}

PpoTerms ppo_loss(const nn::PolicyNet::Output& out, const TrajectoryBatch& b, const std::vector<Index>& idx,
                  double clip, double value_coef) {
  ad::Tape& t = out.mean.tape();
  const Index m = static_cast<Index>(idx.size());
  RowMatrix actions(m, b.actions.cols());
  Eigen::VectorXd old_lp(m), adv(m), ret(m);
  for (Index k = 0; k < m; ++k) {
    const Index i = idx[static_cast<std::size_t>(k)];
    actions.row(k) = b.actions.row(i);
    old_lp[k] = b.log_probs[i];
    adv[k] = b.advantages[i];
    ret[k] = b.returns[i];
  }
  const ad::Var logp = gaussian_log_prob(out.mean, out.log_std, actions);
  const ad::Var ratio = ad::exp(logp - t.constant({m}, old_lp));
  const auto r = ratio.values();
  for (Index k = 0; k < m; ++k)
    if (!std::isfinite(r[k]))
      throw NumericError("ppo_loss: non-finite probability ratio at step " +
                         std::to_string(idx[static_cast<std::size_t>(k)]));
  const ad::Var A = t.constant({m}, adv);
  const ad::Var surr = ad::minimum(ratio * A, ad::clamp(ratio, 1.0 - clip, 1.0 + clip) * A);
  const ad::Var policy_loss = -ad::mean(surr);
  const ad::Var value_loss = ad::mean(ad::square(out.value - t.constant({m}, ret)));

  PpoTerms terms;
  terms.total = policy_loss + value_coef * value_loss;
  terms.surrogate = policy_loss.item();
  terms.value_loss = value_loss.item();
  double clipped = 0;
  for (Index k = 0; k < m; ++k) clipped += std::abs(r[k] - 1.0) > clip;
  terms.clip_fraction = clipped / static_cast<double>(m);
  return terms;
}

UpdateStats ppo_update(const TrajectoryBatch& batch, const PpoHyper& hyper, nn::Adam& optimizer, double lr,
                       std::mt19937_64& rng, const ForwardFn& forward, const LossFn& loss, std::vector<int>* visits) {
  const Index n = batch.size();
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  if (visits) visits->assign(static_cast<std::size_t>(n), 0);
  UpdateStats stats;
  for (int epoch = 0; epoch < hyper.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (Index start = 0; start < n; start += hyper.minibatch) {
      const Index len = std::min<Index>(hyper.minibatch, n - start);
      std::vector<Index> idx(order.begin() + start, order.begin() + start + len);
      if (visits)
        for (Index i : idx) ++(*visits)[static_cast<std::size_t>(i)];
      ad::Tape tape;
      const nn::PolicyNet::Output out = forward(tape, idx);
      const ad::Var total = loss(tape, out, idx, stats);
      const double value = total.item();
      if (!std::isfinite(value)) throw NumericError("ppo_update: non-finite loss in epoch " + std::to_string(epoch));
      stats.total += value;
      tape.backward(total);
      optimizer.step(lr);
      ++stats.minibatches;
      stats.samples_seen += len;
    }
  }
  if (stats.minibatches) {
    const double k = static_cast<double>(stats.minibatches);
    stats.surrogate /= k;
    stats.value_loss /= k;
    stats.kl /= k;
    stats.total /= k;
    stats.clip_fraction /= k;
  }
  return stats;
}

}  // namespace omcrl::rl
