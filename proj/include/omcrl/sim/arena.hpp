#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace omcrl::sim {

struct Obstacle {
  Eigen::Vector2d center = Eigen::Vector2d::Zero();
  double radius = 0.5;
  int hue = 0;
};

struct ArenaConfig {
  double width = 6.0;
  double height = 6.0;
  std::vector<Obstacle> obstacles;  // fixed layout
  int random_obstacles = 0;         // additional obstacles drawn at every reset
  double obstacle_radius_min = 0.3;
  double obstacle_radius_max = 0.6;

  double goal_radius = 0.5;  // success threshold
  double agent_radius = 0.15;
  double beacon_radius = 0.2;
  double min_start_goal = 2.0;
  double spawn_clearance = 0.3;

  int max_steps = 5000;  // episode horizon H_max
  double dt = 0.1;
  Eigen::Vector3d max_action = Eigen::Vector3d(1.0, 1.0, 1.5);  // v_x, v_y, omega_z

  double fov_deg = 82.6;
  int image_height = 36;
  int image_width = 36;
  int depth_height = 16;
  int depth_width = 16;
  int frames = 3;  // frame-stack depth L
  double max_range = 10.0;
  double depth_near = 0.5;
  double wall_scale = 1.0;  // column half-height is H/2 * min(1, wall_scale / distance)
  double camera_height = 0.3;
  double floor_period = 1.0;  // ground texture wavelength
};

// Throws ConfigError naming the offending field.
void validate(const ArenaConfig& config);

// One episode's layout: fixed obstacles plus any sampled ones, and the goal.
struct Arena {
  ArenaConfig config;
  std::vector<Obstacle> obstacles;
  Eigen::Vector2d goal = Eigen::Vector2d::Zero();
};

enum class TerminalCause { none, goal, collision, timeout };
std::string to_string(TerminalCause cause);

struct AgentState {
  Eigen::Vector2d position = Eigen::Vector2d::Zero();
  double heading = 0.0;                               // radians, world frame
  Eigen::Vector2d velocity = Eigen::Vector2d::Zero();  // body frame
  double yaw_rate = 0.0;
  int step = 0;
};

struct StepOutcome {
  double reward = 0.0;
  bool terminal = false;
  TerminalCause cause = TerminalCause::none;
  double d_init = 0.0;
  double d_t = 0.0;
};

// Nearest-surface distance from a point to a circle (negative inside).
double surface_distance(const Eigen::Vector2d& p, const Obstacle& o);
bool in_collision(const Arena& arena, const Eigen::Vector2d& p);

// Reward: 10 on goal, -1 on collision, -1/H_max every step, plus
// 0.1 * (d_init - d_t) every step.
double reward_fn(const AgentState& prev, const AgentState& state, const StepOutcome& outcome, int max_steps);

}  // namespace omcrl::sim
