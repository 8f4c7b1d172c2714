#pragma once

#include "omcrl/rl/rollout.hpp"
#include "omcrl/train/distill.hpp"
#include "omcrl/train/policies.hpp"

#include <functional>
#include <string>

namespace omcrl::train {

struct TrainConfig {
  sim::ArenaConfig arena;
  rl::PpoHyper ppo;
  long total_steps = 200000;  // environment steps
  int envs = 16;
  std::uint64_t seed = 0;
};

void validate(const TrainConfig& config);

// One row per PPO update.
struct TrainRow {
  long env_step = 0;
  double alpha = 0.0;
  double ret = 0.0;  // mean return of episodes finished during the rollout; NaN if none
  double l_rl = 0.0;
  double kl = 0.0;
  double total = 0.0;
  double surrogate = 0.0;
  double value_loss = 0.0;
  double clip_fraction = 0.0;
  double lr = 0.0;
  int episodes = 0;
  double success = 0.0;  // fraction of those episodes reaching the goal
};

std::string train_csv_header();
std::string train_csv_row(const TrainRow& row);
void write_train_csv(const std::string& path, const std::vector<TrainRow>& rows);

using UpdateHook = std::function<void(const TrainRow&)>;

std::vector<TrainRow> train_oracle(OraclePolicy& policy, const TrainConfig& config, const UpdateHook& hook = {});

struct StudentConfig {
  TrainConfig train;
  DecaySchedule decay;
  bool use_oracle = true;
  bool monte_carlo_kl = false;
  int kl_samples = 1;
};

// `teacher` may be null only when use_oracle is false. Alpha is read from
// the schedule at the global step where each rollout starts.
std::vector<TrainRow> train_student(StudentPolicy& student, OraclePolicy* teacher, const StudentConfig& config,
                                    const UpdateHook& hook = {});

}  // namespace omcrl::train
