#include "omcrl/sim/arena.hpp"

#include "omcrl/error.hpp"

#include <cmath>

namespace omcrl::sim {

namespace {

void require(bool ok, const std::string& field, const std::string& why) {
  if (!ok) throw ConfigError("arena." + field + ": " + why);
}

}  // namespace

void validate(const ArenaConfig& c) {
  require(c.width > 0 && c.height > 0, "width/height", "must be positive");
  require(c.random_obstacles >= 0, "random_obstacles", "must be non-negative");
  require(c.obstacle_radius_min > 0 && c.obstacle_radius_max >= c.obstacle_radius_min,
          "obstacle_radius", "need 0 < min <= max");
  require(c.goal_radius > 0, "goal_radius", "must be positive");
  require(c.agent_radius > 0, "agent_radius", "must be positive");
  require(c.beacon_radius > 0, "beacon_radius", "must be positive");
  require(c.min_start_goal >= 0, "min_start_goal", "must be non-negative");
  require(c.max_steps > 0, "max_steps", "must be positive");
  require(c.dt > 0, "dt", "must be positive");
  require((c.max_action.array() > 0).all(), "max_action", "bounds must be positive");
  require(c.fov_deg > 0 && c.fov_deg < 180, "fov_deg", "must lie in (0, 180)");
  require(c.image_height >= 7 && c.image_width >= 7, "image", "at least 7x7 pixels");
  require(c.depth_height >= 7 && c.depth_width >= 7, "depth", "at least 7x7 pixels");
  require(c.frames >= 1, "frames", "must be positive");
  require(c.max_range > 0 && c.depth_near > 0, "max_range/depth_near", "must be positive");
  require(c.wall_scale > 0, "wall_scale", "must be positive");
  require(c.camera_height > 0 && c.floor_period > 0, "camera_height/floor_period", "must be positive");
  for (std::size_t i = 0; i < c.obstacles.size(); ++i) {
    const auto& o = c.obstacles[i];
    const std::string name = "obstacles[" + std::to_string(i) + "]";
    require(o.radius > 0, name, "radius must be positive");
    require(o.center.x() >= 0 && o.center.x() <= c.width && o.center.y() >= 0 &&
                o.center.y() <= c.height,
            name, "center outside the arena");
  }
}

std::string to_string(TerminalCause cause) {
  switch (cause) {
    case TerminalCause::goal: return "goal";
    case TerminalCause::collision: return "collision";
    case TerminalCause::timeout: return "timeout";
    case TerminalCause::none: break;
  }
  return "none";
}

double surface_distance(const Eigen::Vector2d& p, const Obstacle& o) {
  return (p - o.center).norm() - o.radius;
}

bool in_collision(const Arena& arena, const Eigen::Vector2d& p) {
  const auto& c = arena.config;
  const double r = c.agent_radius;
  if (p.x() < r || p.y() < r || p.x() > c.width - r || p.y() > c.height - r) return true;
  for (const auto& o : arena.obstacles)
    if ((p - o.center).norm() < r + o.radius) return true;
  return false;
}

double reward_fn(const AgentState&, const AgentState&, const StepOutcome& outcome, int max_steps) {
  double r = -1.0 / max_steps + 0.1 * (outcome.d_init - outcome.d_t);
  if (outcome.cause == TerminalCause::goal) r += 10.0;
  if (outcome.cause == TerminalCause::collision) r -= 1.0;
  return r;
}

}  // namespace omcrl::sim
