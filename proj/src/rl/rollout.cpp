#include "omcrl/rl/rollout.hpp"

#include "omcrl/error.hpp"

#include <sstream>

namespace omcrl::rl {

EnvPool::EnvPool(const sim::ArenaConfig& config, int count, std::uint64_t seed) {
  if (count < 1) throw ConfigError("env pool needs at least one environment");
  for (int i = 0; i < count; ++i) {
    envs_.emplace_back(config, seed + static_cast<std::uint64_t>(i));
    envs_.back().reset();
  }
  running_return_.assign(static_cast<std::size_t>(count), 0.0);
  running_length_.assign(static_cast<std::size_t>(count), 0);
}

std::vector<const sim::NavEnv*> EnvPool::views() const {
  std::vector<const sim::NavEnv*> out;
  for (const auto& e : envs_) out.push_back(&e);
  return out;
}

void EnvPool::set_outputs(bool rgb, bool depth) {
  for (auto& e : envs_) e.set_outputs(rgb, depth);
}

sim::StepOutcome EnvPool::step(int i, const Eigen::Vector3d& action) {
  const auto k = static_cast<std::size_t>(i);
  sim::StepOutcome o = envs_[k].step(action);
  ++total_steps_;
  running_return_[k] += o.reward;
  ++running_length_[k];
  if (o.terminal) {
    finished_.push_back({total_steps_, running_return_[k], running_length_[k], o.cause});
    running_return_[k] = 0.0;
    running_length_[k] = 0;
    envs_[k].reset();
  }
  return o;
}

std::vector<EpisodeStat> EnvPool::take_finished() {
  std::vector<EpisodeStat> out;
  out.swap(finished_);
  return out;
}

TrajectoryBatch collect_rollouts(EnvPool& pool, const RolloutSources& src, int steps, int horizon,
                                 std::mt19937_64& rng) {
  const int E = pool.size();
  if (steps <= 0 || steps % E != 0)
    throw ConfigError("rollout steps " + std::to_string(steps) + " must be a positive multiple of " +
                      std::to_string(E) + " environments");
  TrajectoryBatch b;
  b.streams = E;
  std::vector<Index> pending(static_cast<std::size_t>(E), -1);
  std::vector<int> segment(static_cast<std::size_t>(E), 0);
  std::normal_distribution<double> normal(0.0, 1.0);
  const int T = steps / E;

  for (int t = 0; t <= T; ++t) {
    const RowMatrix obs = src.observe(pool.views());
    ad::Tape tape;
    const nn::PolicyNet::Output out = src.act(tape, obs);
    const auto value = out.value.values();
    for (int e = 0; e < E; ++e) {
      auto& p = pending[static_cast<std::size_t>(e)];
      if (p >= 0) b.bootstrap[p] = value[e];
      p = -1;
    }
    if (t == T) break;
    if (t == 0) b.resize(steps, obs.cols(), out.mean.dim(1), static_cast<bool>(src.teacher));

    RowMatrix t_mean, t_log_std;
    if (src.teacher) src.teacher(pool.views(), t_mean, t_log_std);
    const RowMatrix mean = out.mean.matrix();
    const RowMatrix log_std = out.log_std.matrix();
    for (int e = 0; e < E; ++e) {
      const Index i = static_cast<Index>(t) * E + e;
      Eigen::VectorXd a(mean.cols());
      for (Index d = 0; d < a.size(); ++d) a[d] = mean(e, d) + std::exp(log_std(e, d)) * normal(rng);
      if (!a.allFinite()) {
        std::ostringstream os;
        os << "rollout: non-finite action in env " << e << " at step " << pool.env(e).state().step
           << ", position (" << pool.env(e).state().position.transpose() << ")";
        throw NumericError(os.str());
      }
      b.obs.row(i) = obs.row(e);
      b.actions.row(i) = a.transpose();
      b.log_probs[i] = nn::gaussian_log_prob(a, mean.row(e).transpose(), log_std.row(e).transpose());
      b.values[i] = value[e];
      if (src.teacher) {
        b.teacher_mean.row(i) = t_mean.row(e);
        b.teacher_log_std.row(i) = t_log_std.row(e);
      }
      const sim::StepOutcome o = pool.step(e, a);
      b.rewards[i] = o.reward;
      b.dones[static_cast<std::size_t>(i)] = o.terminal;
      auto& seg = segment[static_cast<std::size_t>(e)];
      seg = o.terminal ? 0 : seg + 1;
      if (!o.terminal && (seg >= horizon || t == T - 1)) {
        b.truncated[static_cast<std::size_t>(i)] = 1;
        pending[static_cast<std::size_t>(e)] = i;
        seg = 0;
      }
    }
  }
  return b;
}

}  // namespace omcrl::rl
