#pragma once

#include "omcrl/sim/arena.hpp"
#include "omcrl/sim/render.hpp"

#include <deque>

namespace omcrl::sim {

// L consecutive frames, oldest first.
struct FrameStack {
  std::vector<Image> frames;
  int episode = -1;
  int timestep = 0;
};

struct PrivilegedState {
  std::vector<Image> depth;  // L depth frames, oldest first
  Eigen::Vector3d velocity = Eigen::Vector3d::Zero();   // (v_x, v_y, 0)
  Eigen::Vector3d angular = Eigen::Vector3d::Zero();    // (0, 0, omega_z)
  Eigen::Vector3d orientation = Eigen::Vector3d::Zero();  // (cos, sin, 0) of heading
  Eigen::Matrix<double, 6, 1> relative = Eigen::Matrix<double, 6, 1>::Zero();  // nearest obstacle, goal; body frame
};

struct ResetResult {
  AgentState state;
  FrameStack stack;
  PrivilegedState privileged;
};

// Deterministic planar navigation environment. Holonomic body-frame
// translation with yaw integration, no inertia.
class NavEnv {
 public:
  NavEnv(ArenaConfig config, std::uint64_t seed);

  ResetResult reset();
  ResetResult reset(std::uint64_t seed);
  // Starts an episode from an explicit layout and state.
  ResetResult load_episode(Arena arena, AgentState state);
  StepOutcome step(const Eigen::Vector3d& action);
  // Disabled outputs are not rendered; their frames stay empty.
  void set_outputs(bool rgb, bool depth);

  const AgentState& state() const { return state_; }
  const Arena& arena() const { return arena_; }
  const ArenaConfig& config() const { return arena_.config; }
  double initial_distance() const { return d_init_; }
  double goal_distance() const;
  bool done() const { return done_; }

  FrameStack rgb_stack() const;
  const Image& last_rgb() const { return rgb_.back(); }
  PrivilegedState privileged() const;
  // Student proprioception: v (3), omega (3), orientation (3), goal vector (3).
  Eigen::VectorXd student_features() const;
  // Oracle non-visual features: v (3), omega (3), relative positions (6).
  Eigen::VectorXd oracle_features() const;

 private:
  void refresh_frames(bool warm_fill);
  Eigen::Vector2d to_body(const Eigen::Vector2d& world) const;

  Arena arena_;
  std::mt19937_64 rng_;
  AgentState state_;
  double d_init_ = 0.0;
  bool done_ = false;
  bool want_rgb_ = true;
  bool want_depth_ = true;
  int episode_ = -1;
  std::deque<Image> rgb_;
  std::deque<Image> depth_;
};

// Samples the per-episode layout and a collision-free start; throws
// ConfigError after 1000 rejected placements.
std::pair<Arena, AgentState> sample_episode(const ArenaConfig& config, std::mt19937_64& rng);

// Advances kinematics by one step (action already clamped).
AgentState integrate(const AgentState& s, const Eigen::Vector3d& action, double dt);

}  // namespace omcrl::sim
