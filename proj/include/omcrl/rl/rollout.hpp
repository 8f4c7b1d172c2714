#pragma once

#include "omcrl/rl/ppo.hpp"
#include "omcrl/sim/env.hpp"

namespace omcrl::rl {

struct EpisodeStat {
  long env_step = 0;  // pool step counter when the episode ended
  double ret = 0.0;
  int length = 0;
  sim::TerminalCause cause = sim::TerminalCause::none;
};

// N environments stepped in lockstep; instance i is seeded with seed + i.
class EnvPool {
 public:
  EnvPool(const sim::ArenaConfig& config, int count, std::uint64_t seed);

  int size() const { return static_cast<int>(envs_.size()); }
  sim::NavEnv& env(int i) { return envs_[static_cast<std::size_t>(i)]; }
  std::vector<const sim::NavEnv*> views() const;
  long total_steps() const { return total_steps_; }
  void set_outputs(bool rgb, bool depth);

  // Steps env i, books the reward, and resets it when the episode ends.
  sim::StepOutcome step(int i, const Eigen::Vector3d& action);
  std::vector<EpisodeStat> take_finished();

 private:
  std::vector<sim::NavEnv> envs_;
  std::vector<double> running_return_;
  std::vector<int> running_length_;
  std::vector<EpisodeStat> finished_;
  long total_steps_ = 0;
};

using ObserveFn = std::function<RowMatrix(const std::vector<const sim::NavEnv*>&)>;
using TeacherFn = std::function<void(const std::vector<const sim::NavEnv*>&, RowMatrix& mean, RowMatrix& log_std)>;
using ActFn = std::function<nn::PolicyNet::Output(ad::Tape&, const RowMatrix& obs)>;

struct RolloutSources {
  ObserveFn observe;
  ActFn act;
  TeacherFn teacher;  // optional
};

// Collects exactly `steps` transitions (a multiple of the pool size) with
// sampled actions; the last step of every stream and every horizon cut is
// bootstrapped from the critic.
TrajectoryBatch collect_rollouts(EnvPool& pool, const RolloutSources& sources, int steps, int horizon,
                                 std::mt19937_64& rng);

}  // namespace omcrl::rl
