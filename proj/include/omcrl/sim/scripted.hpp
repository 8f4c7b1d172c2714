#pragma once

#include "omcrl/sim/env.hpp"

namespace omcrl::sim {

// Go-to-goal controller with a short-range repulsion from obstacles.
// `avoid` = false gives the pure straight-to-goal controller.
Eigen::Vector3d scripted_action(const NavEnv& env, bool avoid = true);

// Exploration noise: uniform actions resampled every `hold` steps.
class RandomWalk {
 public:
  explicit RandomWalk(int hold = 5) : hold_(hold) {}
  Eigen::Vector3d act(const ArenaConfig& config, std::mt19937_64& rng);

 private:
  int hold_;
  int left_ = 0;
  Eigen::Vector3d current_ = Eigen::Vector3d::Zero();
};

}  // namespace omcrl::sim
