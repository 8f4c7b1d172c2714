#pragma once

#include "omcrl/autodiff/tape.hpp"
#include "omcrl/sim/env.hpp"

#include <functional>
#include <optional>
#include <string>

namespace omcrl::eval {

struct EpisodeRecord {
  int episode = 0;
  std::vector<Eigen::Vector2d> trajectory;  // start position first
  Eigen::Vector2d goal = Eigen::Vector2d::Zero();
  double path_length = 0.0;     // d_i, executed
  double optimal_length = 0.0;  // l_i, straight line unless supplied
  sim::TerminalCause cause = sim::TerminalCause::none;
  int steps = 0;
  double min_goal_distance = 0.0;
  double ret = 0.0;

  const Eigen::Vector2d& terminal() const { return trajectory.back(); }
  bool success() const { return cause == sim::TerminalCause::goal; }
};

struct MetricsReport {
  int episodes = 0;
  double ne = 0.0;   // mean terminal distance to goal
  double os = 0.0;   // %
  double sr = 0.0;   // %
  double spl = 0.0;  // [0, 1]
  double cr = 0.0;   // %
  std::optional<double> tts;  // mean steps over successes
  double mean_return = 0.0;
};

double spl(const std::vector<EpisodeRecord>& records);
double oracle_success(const std::vector<EpisodeRecord>& records, double epsilon = 0.5);
double navigation_error(const std::vector<EpisodeRecord>& records);
double success_rate(const std::vector<EpisodeRecord>& records);
double collision_rate(const std::vector<EpisodeRecord>& records);
std::optional<double> time_to_success(const std::vector<EpisodeRecord>& records);

MetricsReport summarize(const std::vector<EpisodeRecord>& records, double epsilon = 0.5);

std::string format_tts(const std::optional<double>& tts);
// Fixed-width table with columns NE, OS, SR, SPL, CR, TTS.
std::string format_table(const std::vector<std::pair<std::string, MetricsReport>>& rows);
std::string format_report_csv(const MetricsReport& report);

// Rows: episode, cause, steps, return, path_length, optimal_length,
// terminal_x, terminal_y, min_goal_distance.
void write_episode_csv(const std::string& path, const std::vector<EpisodeRecord>& records);

using BatchPolicy = std::function<ad::RowMatrix(const std::vector<const sim::NavEnv*>&)>;

struct EvalOptions {
  int episodes = 200;
  std::uint64_t seed = 0;
  int parallel = 16;   // environments stepped together
  bool rgb = true;     // outputs the policy reads
  bool depth = true;
  // Overrides the straight-line optimal length of an episode.
  std::function<double(const sim::Arena&, const sim::AgentState&)> optimal_length;
};

// Episode k is reset with seed + k, so the records do not depend on
// `parallel`. The policy returns one action row per environment.
std::vector<EpisodeRecord> run_episodes(const sim::ArenaConfig& arena, const EvalOptions& options,
                                        const BatchPolicy& policy);

}  // namespace omcrl::eval
