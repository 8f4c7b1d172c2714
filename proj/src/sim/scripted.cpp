#include "omcrl/sim/scripted.hpp"

#include <cmath>
#include <numbers>

namespace omcrl::sim {

namespace {

double wrap(double a) { return std::remainder(a, 2 * std::numbers::pi); }

}  // namespace

Eigen::Vector3d scripted_action(const NavEnv& env, bool avoid) {
  const auto& s = env.state();
  const auto& arena = env.arena();
  const auto& c = arena.config;
  Eigen::Vector2d to_goal = arena.goal - s.position;
  Eigen::Vector2d dir = to_goal.normalized();
  if (avoid) {
    const double influence = 0.6;
    Eigen::Vector2d push = Eigen::Vector2d::Zero();
    for (const auto& o : arena.obstacles) {
      const Eigen::Vector2d away = s.position - o.center;
      const double gap = away.norm() - o.radius - c.agent_radius;
      if (gap < influence) {
        const Eigen::Vector2d n = away.normalized();
        // Tangential slide keeps the agent from stalling in front of an obstacle.
        Eigen::Vector2d t(-n.y(), n.x());
        if (t.dot(dir) < 0) t = -t;
        const double w = (influence - gap) / influence;
        push += w * (1.5 * n + 2.0 * t);
      }
    }
    const double margin = c.agent_radius + influence;
    if (s.position.x() < margin) push.x() += (margin - s.position.x()) / influence;
    if (s.position.y() < margin) push.y() += (margin - s.position.y()) / influence;
    if (s.position.x() > c.width - margin) push.x() -= (s.position.x() - c.width + margin) / influence;
    if (s.position.y() > c.height - margin) push.y() -= (s.position.y() - c.height + margin) / influence;
    dir = (dir + push).normalized();
  }
  const double desired = std::atan2(dir.y(), dir.x());
  const double err = wrap(desired - s.heading);
  const double speed = std::min(1.0, to_goal.norm());
  const double cs = std::cos(s.heading), sn = std::sin(s.heading);
  const Eigen::Vector2d body(cs * dir.x() + sn * dir.y(), -sn * dir.x() + cs * dir.y());
  Eigen::Vector3d u(speed * body.x(), speed * body.y(), 2.0 * err);
  return u.cwiseMax(-c.max_action).cwiseMin(c.max_action);
}

Eigen::Vector3d RandomWalk::act(const ArenaConfig& config, std::mt19937_64& rng) {
  if (left_ <= 0) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int i = 0; i < 3; ++i) current_[i] = u(rng) * config.max_action[i];
    left_ = hold_;
  }
  --left_;
  return current_;
}

}  // namespace omcrl::sim
