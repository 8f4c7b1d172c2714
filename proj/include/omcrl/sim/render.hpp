#pragma once

#include "omcrl/sim/arena.hpp"

#include <vector>

namespace omcrl::sim {

// Channel-major image with values in [0, 1].
struct Image {
  int channels = 0;
  int height = 0;
  int width = 0;
  std::vector<double> data;

  double at(int c, int y, int x) const { return data[static_cast<std::size_t>((c * height + y) * width + x)]; }
  double& at(int c, int y, int x) { return data[static_cast<std::size_t>((c * height + y) * width + x)]; }
  bool operator==(const Image&) const = default;
};

struct RayHit {
  double distance = -1.0;  // < 0: nothing within range
  int obstacle = -1;       // index into Arena::obstacles, -1 for the beacon
  bool beacon = false;
};

// Ray angle (world frame) of image column `col` out of `width` columns;
// column 0 is the left edge of the field of view.
double column_angle(const AgentState& state, const ArenaConfig& config, int col, int width);
RayHit cast_ray(const Arena& arena, const Eigen::Vector2d& origin, double angle, bool include_beacon);

// Column raycaster: sky above the horizon, a textured ground plane below,
// obstacle columns of
// half-height proportional to 1/distance in the obstacle's hue, and the goal
// beacon in a reserved magenta. Values are quantized to multiples of 1/255.
Image render_rgb(const AgentState& state, const Arena& arena);
// Per-column depth_near / distance clamped to [0, 1] (0 without a hit),
// replicated down the rows. The beacon is not a depth target.
Image render_depth(const AgentState& state, const Arena& arena);

Eigen::Vector3d obstacle_color(int hue);
Eigen::Vector3d beacon_color();
Eigen::Vector3d sky_color();
Eigen::Vector3d floor_base();
bool is_background_or_beacon(const Image& rgb, int y, int x);

}  // namespace omcrl::sim
