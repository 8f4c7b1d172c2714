#include "omcrl/eval/metrics.hpp"

#include "omcrl/error.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace omcrl::eval {

namespace {

void require_records(const std::vector<EpisodeRecord>& r, const char* what) {
  if (r.empty()) throw ContractError(std::string(what) + ": empty record set");
}

}  // namespace

double spl(const std::vector<EpisodeRecord>& records) {
  require_records(records, "spl");
  double total = 0.0;
  for (const auto& r : records) {
    if (!r.success()) continue;
    if (r.optimal_length <= 0) throw ContractError("spl: optimal length must be positive");
    total += r.optimal_length / std::max(r.path_length, r.optimal_length);
  }
  return total / static_cast<double>(records.size());
}

double oracle_success(const std::vector<EpisodeRecord>& records, double epsilon) {
  require_records(records, "oracle_success");
  long n = 0;
  for (const auto& r : records) n += r.success() || r.min_goal_distance <= epsilon;
  return 100.0 * static_cast<double>(n) / static_cast<double>(records.size());
}

double navigation_error(const std::vector<EpisodeRecord>& records) {
  require_records(records, "navigation_error");
  double total = 0.0;
  for (const auto& r : records) total += (r.terminal() - r.goal).norm();
  return total / static_cast<double>(records.size());
}

double success_rate(const std::vector<EpisodeRecord>& records) {
  require_records(records, "success_rate");
  long n = 0;
  for (const auto& r : records) n += r.success();
  return 100.0 * static_cast<double>(n) / static_cast<double>(records.size());
}

double collision_rate(const std::vector<EpisodeRecord>& records) {
  require_records(records, "collision_rate");
  long n = 0;
  for (const auto& r : records) n += r.cause == sim::TerminalCause::collision;
  return 100.0 * static_cast<double>(n) / static_cast<double>(records.size());
}

std::optional<double> time_to_success(const std::vector<EpisodeRecord>& records) {
  double total = 0.0;
  long n = 0;
  for (const auto& r : records) {
    if (!r.success()) continue;
    total += r.steps;
    ++n;
  }
  if (n == 0) return std::nullopt;
  return total / static_cast<double>(n);
}

MetricsReport summarize(const std::vector<EpisodeRecord>& records, double epsilon) {
  MetricsReport m;
  m.episodes = static_cast<int>(records.size());
  m.ne = navigation_error(records);
  m.os = oracle_success(records, epsilon);
  m.sr = success_rate(records);
  m.spl = spl(records);
  m.cr = collision_rate(records);
  m.tts = time_to_success(records);
  for (const auto& r : records) m.mean_return += r.ret;
  m.mean_return /= static_cast<double>(records.size());
  return m;
}

std::string format_tts(const std::optional<double>& tts) {
  if (!tts) return "--";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f", *tts);
  return buf;
}

std::string format_table(const std::vector<std::pair<std::string, MetricsReport>>& rows) {
  std::size_t name_width = 6;
  for (const auto& [name, _] : rows) name_width = std::max(name_width, name.size());
  std::ostringstream os;
  char buf[160];
  std::snprintf(buf, sizeof buf, "%-*s %8s %7s %7s %6s %7s %8s\n", static_cast<int>(name_width), "method", "NE",
                "OS", "SR", "SPL", "CR", "TTS");
  os << buf;
  for (const auto& [name, m] : rows) {
    std::snprintf(buf, sizeof buf, "%-*s %8.3f %7.1f %7.1f %6.3f %7.1f %8s\n", static_cast<int>(name_width),
                  name.c_str(), m.ne, m.os, m.sr, m.spl, m.cr, format_tts(m.tts).c_str());
    os << buf;
  }
  return os.str();
}

std::string format_report_csv(const MetricsReport& m) {
  std::ostringstream os;
  os.precision(17);
  os << "episodes,ne,os,sr,spl,cr,tts,mean_return\n";
  os << m.episodes << ',' << m.ne << ',' << m.os << ',' << m.sr << ',' << m.spl << ',' << m.cr << ','
     << format_tts(m.tts) << ',' << m.mean_return << '\n';
  return os.str();
}

void write_episode_csv(const std::string& path, const std::vector<EpisodeRecord>& records) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path);
  out.precision(17);
  out << "# omcrl-episodes v1\n";
  out << "episode,cause,steps,return,path_length,optimal_length,terminal_x,terminal_y,min_goal_distance\n";
  for (const auto& r : records)
    out << r.episode << ',' << sim::to_string(r.cause) << ',' << r.steps << ',' << r.ret << ',' << r.path_length
        << ',' << r.optimal_length << ',' << r.terminal().x() << ',' << r.terminal().y() << ','
        << r.min_goal_distance << '\n';
}

std::vector<EpisodeRecord> run_episodes(const sim::ArenaConfig& arena, const EvalOptions& opt,
                                        const BatchPolicy& policy) {
  if (opt.episodes < 1) throw ConfigError("eval.episodes must be positive");
  const int lanes = std::max(1, std::min(opt.parallel, opt.episodes));
  std::vector<sim::NavEnv> envs;
  std::vector<int> current(static_cast<std::size_t>(lanes), -1);
  std::vector<EpisodeRecord> records(static_cast<std::size_t>(opt.episodes));
  int next = 0;

  auto start = [&](int lane) {
    auto& env = envs[static_cast<std::size_t>(lane)];
    if (next >= opt.episodes) {
      current[static_cast<std::size_t>(lane)] = -1;
      return;
    }
    const int k = next++;
    env.reset(opt.seed + static_cast<std::uint64_t>(k));
    EpisodeRecord& r = records[static_cast<std::size_t>(k)];
    r.episode = k;
    r.goal = env.arena().goal;
    r.trajectory = {env.state().position};
    r.optimal_length = opt.optimal_length ? opt.optimal_length(env.arena(), env.state())
                                          : (env.state().position - env.arena().goal).norm();
    r.min_goal_distance = env.goal_distance();
    current[static_cast<std::size_t>(lane)] = k;
  };

  for (int i = 0; i < lanes; ++i) {
    envs.emplace_back(arena, opt.seed);
    envs.back().set_outputs(opt.rgb, opt.depth);
  }
  for (int i = 0; i < lanes; ++i) start(i);

  while (true) {
    std::vector<int> active;
    std::vector<const sim::NavEnv*> views;
    for (int i = 0; i < lanes; ++i)
      if (current[static_cast<std::size_t>(i)] >= 0) {
        active.push_back(i);
        views.push_back(&envs[static_cast<std::size_t>(i)]);
      }
    if (active.empty()) break;
    const ad::RowMatrix actions = policy(views);
    if (actions.rows() != static_cast<ad::Index>(active.size()) || actions.cols() != 3)
      throw DimensionError("evaluation policy returned " + std::to_string(actions.rows()) + "x" +
                           std::to_string(actions.cols()) + " actions for " + std::to_string(active.size()) +
                           " environments");
    for (std::size_t j = 0; j < active.size(); ++j) {
      const int lane = active[j];
      auto& env = envs[static_cast<std::size_t>(lane)];
      EpisodeRecord& r = records[static_cast<std::size_t>(current[static_cast<std::size_t>(lane)])];
      const Eigen::Vector2d before = env.state().position;
      const sim::StepOutcome o = env.step(actions.row(static_cast<ad::Index>(j)).transpose());
      r.path_length += (env.state().position - before).norm();
      r.trajectory.push_back(env.state().position);
      r.min_goal_distance = std::min(r.min_goal_distance, o.d_t);
      r.ret += o.reward;
      ++r.steps;
      if (o.terminal) {
        r.cause = o.cause;
        start(lane);
      }
    }
  }
  return records;
}

}  // namespace omcrl::eval
