#include "omcrl/sim/render.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace omcrl::sim {

namespace {

double quantize(double v) { return std::round(std::clamp(v, 0.0, 1.0) * 255.0) / 255.0; }

// Smallest t >= 0 with |origin + t*dir - center| = radius, or -1.
double ray_circle(const Eigen::Vector2d& origin, const Eigen::Vector2d& dir,
                  const Eigen::Vector2d& center, double radius) {
  const Eigen::Vector2d oc = origin - center;
  const double b = oc.dot(dir);
  const double c = oc.squaredNorm() - radius * radius;
  const double disc = b * b - c;
  if (disc < 0) return -1.0;
  const double s = std::sqrt(disc);
  double t = -b - s;
  if (t < 0) t = -b + s;
  return t < 0 ? -1.0 : t;
}

}  // namespace

Eigen::Vector3d obstacle_color(int hue) {
  static const Eigen::Vector3d palette[] = {
      {0.85, 0.20, 0.15}, {0.20, 0.65, 0.25}, {0.20, 0.35, 0.85},
      {0.90, 0.80, 0.15}, {0.15, 0.75, 0.80}, {0.95, 0.55, 0.10},
  };
  const int n = static_cast<int>(std::size(palette));
  return palette[((hue % n) + n) % n];
}

Eigen::Vector3d beacon_color() { return {1.0, 0.0, 1.0}; }
Eigen::Vector3d sky_color() { return {0.55, 0.75, 0.95}; }

Eigen::Vector3d floor_base() { return {0.35, 0.30, 0.25}; }

namespace {

// Ground texture seen through a pinhole camera: a smooth brightness pattern
// over world coordinates, faded with distance to limit aliasing.
double floor_brightness(const AgentState& state, const ArenaConfig& c, int row, int col, int height, int width) {
  const double fov = c.fov_deg * std::numbers::pi / 180.0;
  const double focal = (width / 2.0) / std::tan(fov / 2);
  const double below = row + 0.5 - height / 2.0;
  const double ahead = c.camera_height * focal * (static_cast<double>(height) / width) / below;
  const double rel = column_angle(state, c, col, width) - state.heading;
  const double dist = ahead / std::cos(rel);
  const double a = state.heading + rel;
  const double gx = state.position.x() + dist * std::cos(a);
  const double gy = state.position.y() + dist * std::sin(a);
  const double k = 2.0 * std::numbers::pi / c.floor_period;
  const double pattern = std::sin(k * gx) * std::sin(k * gy);
  return 0.8 + 0.35 * pattern * std::exp(-ahead / 2.5);
}

}  // namespace

double column_angle(const AgentState& state, const ArenaConfig& config, int col, int width) {
  const double fov = config.fov_deg * std::numbers::pi / 180.0;
  return state.heading + fov / 2 - (col + 0.5) * fov / width;
}

RayHit cast_ray(const Arena& arena, const Eigen::Vector2d& origin, double angle, bool include_beacon) {
  const Eigen::Vector2d dir(std::cos(angle), std::sin(angle));
  RayHit hit;
  double best = arena.config.max_range;
  for (std::size_t i = 0; i < arena.obstacles.size(); ++i) {
    const double t = ray_circle(origin, dir, arena.obstacles[i].center, arena.obstacles[i].radius);
    if (t >= 0 && t <= best) {
      best = t;
      hit = {t, static_cast<int>(i), false};
    }
  }
  if (include_beacon) {
    const double t = ray_circle(origin, dir, arena.goal, arena.config.beacon_radius);
    if (t >= 0 && t <= best) hit = {t, -1, true};
  }
  return hit;
}

Image render_rgb(const AgentState& state, const Arena& arena) {
  const auto& c = arena.config;
  const int H = c.image_height, W = c.image_width;
  Image img{3, H, W, std::vector<double>(static_cast<std::size_t>(3 * H * W))};
  const Eigen::Vector3d sky = sky_color();
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x) {
      const Eigen::Vector3d bg = y < H / 2 ? sky : Eigen::Vector3d(floor_base() * floor_brightness(state, c, y, x, H, W));
      for (int ch = 0; ch < 3; ++ch) img.at(ch, y, x) = quantize(bg[ch]);
    }
  for (int x = 0; x < W; ++x) {
    const RayHit hit = cast_ray(arena, state.position, column_angle(state, c, x, W), true);
    if (hit.distance < 0) continue;
    const double half = H / 2.0 * std::min(1.0, c.wall_scale / std::max(hit.distance, 1e-9));
    const int top = std::max(0, static_cast<int>(std::floor(H / 2.0 - half)));
    const int bottom = std::min(H, static_cast<int>(std::ceil(H / 2.0 + half)));
    Eigen::Vector3d color;
    if (hit.beacon) {
      color = beacon_color();
    } else {
      const double shade = 1.0 / (1.0 + 0.1 * hit.distance);
      color = obstacle_color(arena.obstacles[static_cast<std::size_t>(hit.obstacle)].hue) * shade;
    }
    for (int y = top; y < bottom; ++y)
      for (int ch = 0; ch < 3; ++ch) img.at(ch, y, x) = quantize(color[ch]);
  }
  return img;
}

Image render_depth(const AgentState& state, const Arena& arena) {
  const auto& c = arena.config;
  const int H = c.depth_height, W = c.depth_width;
  Image img{1, H, W, std::vector<double>(static_cast<std::size_t>(H * W), 0.0)};
  for (int x = 0; x < W; ++x) {
    const RayHit hit = cast_ray(arena, state.position, column_angle(state, c, x, W), false);
    if (hit.distance < 0) continue;
    const double v = std::clamp(c.depth_near / std::max(hit.distance, 1e-12), 0.0, 1.0);
    for (int y = 0; y < H; ++y) img.at(0, y, x) = v;
  }
  return img;
}

bool is_background_or_beacon(const Image& rgb, int y, int x) {
  const Eigen::Vector3d px(rgb.at(0, y, x), rgb.at(1, y, x), rgb.at(2, y, x));
  auto same = [&](const Eigen::Vector3d& c) {
    for (int ch = 0; ch < 3; ++ch)
      if (px[ch] != quantize(c[ch])) return false;
    return true;
  };
  if (same(beacon_color())) return true;
  if (y < rgb.height / 2) return same(sky_color());
  // Floor pixels are the base color scaled by a brightness factor.
  const Eigen::Vector3d base = floor_base();
  const double k = px.dot(base) / base.squaredNorm();
  return ((px - k * base).cwiseAbs().array() <= 1.0 / 255.0).all();
}

}  // namespace omcrl::sim
