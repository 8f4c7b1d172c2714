#include "omcrl/sim/env.hpp"

#include "omcrl/error.hpp"

#include <cmath>
#include <numbers>

namespace omcrl::sim {

namespace {

constexpr int kMaxRejections = 1000;

Eigen::Vector2d uniform_point(const ArenaConfig& c, double margin, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> ux(margin, c.width - margin);
  std::uniform_real_distribution<double> uy(margin, c.height - margin);
  const double x = ux(rng);
  const double y = uy(rng);
  return {x, y};
}

bool clear_of(const std::vector<Obstacle>& obstacles, const Eigen::Vector2d& p, double clearance) {
  for (const auto& o : obstacles)
    if (surface_distance(p, o) < clearance) return false;
  return true;
}

}  // namespace

std::pair<Arena, AgentState> sample_episode(const ArenaConfig& config, std::mt19937_64& rng) {
  Arena arena;
  arena.config = config;
  arena.obstacles = config.obstacles;
  const double clearance = config.agent_radius + config.spawn_clearance;

  std::uniform_real_distribution<double> radius(config.obstacle_radius_min, config.obstacle_radius_max);
  std::uniform_int_distribution<int> hue(0, 5);
  for (int k = 0; k < config.random_obstacles; ++k) {
    bool placed = false;
    for (int attempt = 0; attempt < kMaxRejections && !placed; ++attempt) {
      Obstacle o;
      o.radius = radius(rng);
      o.center = uniform_point(config, o.radius, rng);
      o.hue = hue(rng);
      // Leave a corridor wide enough for the agent between obstacles.
      if (!clear_of(arena.obstacles, o.center, o.radius + 2 * config.agent_radius + 0.1)) continue;
      arena.obstacles.push_back(o);
      placed = true;
    }
    if (!placed) throw ConfigError("arena: cannot place obstacle " + std::to_string(k) + " after 1000 rejections");
  }

  AgentState state;
  bool placed = false;
  for (int attempt = 0; attempt < kMaxRejections && !placed; ++attempt) {
    const Eigen::Vector2d start = uniform_point(config, clearance, rng);
    const Eigen::Vector2d goal = uniform_point(config, clearance, rng);
    if (!clear_of(arena.obstacles, start, clearance) || !clear_of(arena.obstacles, goal, clearance)) continue;
    if ((start - goal).norm() < config.min_start_goal) continue;
    state.position = start;
    arena.goal = goal;
    placed = true;
  }
  if (!placed) throw ConfigError("arena: no valid spawn after 1000 rejections");
  std::uniform_real_distribution<double> heading(-std::numbers::pi, std::numbers::pi);
  state.heading = heading(rng);
  return {arena, state};
}

AgentState integrate(const AgentState& s, const Eigen::Vector3d& u, double dt) {
  AgentState next = s;
  next.heading = s.heading + u.z() * dt;
  const double c = std::cos(next.heading), sn = std::sin(next.heading);
  next.position += dt * Eigen::Vector2d(c * u.x() - sn * u.y(), sn * u.x() + c * u.y());
  next.velocity = u.head<2>();
  next.yaw_rate = u.z();
  next.step = s.step + 1;
  return next;
}

NavEnv::NavEnv(ArenaConfig config, std::uint64_t seed) : rng_(seed) {
  validate(config);
  arena_.config = std::move(config);
}

ResetResult NavEnv::reset(std::uint64_t seed) {
  rng_.seed(seed);
  return reset();
}

ResetResult NavEnv::reset() {
  auto [arena, state] = sample_episode(arena_.config, rng_);
  return load_episode(std::move(arena), state);
}

ResetResult NavEnv::load_episode(Arena arena, AgentState state) {
  validate(arena.config);
  arena_ = std::move(arena);
  state_ = state;
  d_init_ = goal_distance();
  done_ = false;
  ++episode_;
  refresh_frames(true);
  return {state_, rgb_stack(), privileged()};
}

double NavEnv::goal_distance() const { return (state_.position - arena_.goal).norm(); }

StepOutcome NavEnv::step(const Eigen::Vector3d& action) {
  if (!action.allFinite()) throw ContractError("step: non-finite action");
  if (done_) throw ContractError("step: episode already terminated; call reset()");
  const auto& c = arena_.config;
  const Eigen::Vector3d u = action.cwiseMax(-c.max_action).cwiseMin(c.max_action);
  const AgentState prev = state_;
  state_ = integrate(state_, u, c.dt);

  StepOutcome out;
  out.d_init = d_init_;
  out.d_t = goal_distance();
  if (in_collision(arena_, state_.position)) {
    out.cause = TerminalCause::collision;
  } else if (out.d_t <= c.goal_radius) {
    out.cause = TerminalCause::goal;
  } else if (state_.step >= c.max_steps) {
    out.cause = TerminalCause::timeout;
  }
  out.terminal = out.cause != TerminalCause::none;
  out.reward = reward_fn(prev, state_, out, c.max_steps);
  done_ = out.terminal;
  refresh_frames(false);
  return out;
}

void NavEnv::set_outputs(bool rgb, bool depth) {
  want_rgb_ = rgb;
  want_depth_ = depth;
}

void NavEnv::refresh_frames(bool warm_fill) {
  const int L = arena_.config.frames;
  Image rgb = want_rgb_ ? render_rgb(state_, arena_) : Image{};
  Image depth = want_depth_ ? render_depth(state_, arena_) : Image{};
  if (warm_fill) {
    rgb_.assign(static_cast<std::size_t>(L), rgb);
    depth_.assign(static_cast<std::size_t>(L), depth);
    return;
  }
  rgb_.pop_front();
  rgb_.push_back(std::move(rgb));
  depth_.pop_front();
  depth_.push_back(std::move(depth));
}

FrameStack NavEnv::rgb_stack() const {
  return {std::vector<Image>(rgb_.begin(), rgb_.end()), episode_, state_.step};
}

Eigen::Vector2d NavEnv::to_body(const Eigen::Vector2d& w) const {
  const double c = std::cos(state_.heading), s = std::sin(state_.heading);
  return {c * w.x() + s * w.y(), -s * w.x() + c * w.y()};
}

PrivilegedState NavEnv::privileged() const {
  PrivilegedState p;
  p.depth.assign(depth_.begin(), depth_.end());
  p.velocity << state_.velocity, 0.0;
  p.angular << 0.0, 0.0, state_.yaw_rate;
  p.orientation << std::cos(state_.heading), std::sin(state_.heading), 0.0;

  // Nearest obstacle surface, arena walls included.
  const auto& c = arena_.config;
  const Eigen::Vector2d pos = state_.position;
  Eigen::Vector2d nearest(-pos.x(), 0.0);
  auto consider = [&](const Eigen::Vector2d& v) {
    if (v.norm() < nearest.norm()) nearest = v;
  };
  consider({c.width - pos.x(), 0.0});
  consider({0.0, -pos.y()});
  consider({0.0, c.height - pos.y()});
  for (const auto& o : arena_.obstacles) {
    const Eigen::Vector2d to_center = o.center - pos;
    const double n = to_center.norm();
    consider(n > 0 ? Eigen::Vector2d(to_center * (1.0 - o.radius / n)) : Eigen::Vector2d::Zero());
  }
  const Eigen::Vector2d ob = to_body(nearest);
  const Eigen::Vector2d gb = to_body(arena_.goal - pos);
  p.relative << ob.x(), ob.y(), 0.0, gb.x(), gb.y(), 0.0;
  return p;
}

Eigen::VectorXd NavEnv::student_features() const {
  const PrivilegedState p = privileged();
  Eigen::VectorXd f(12);
  f << p.velocity, p.angular, p.orientation, p.relative.tail<3>();
  return f;
}

Eigen::VectorXd NavEnv::oracle_features() const {
  const PrivilegedState p = privileged();
  Eigen::VectorXd f(12);
  f << p.velocity, p.angular, p.relative;
  return f;
}

}  // namespace omcrl::sim
