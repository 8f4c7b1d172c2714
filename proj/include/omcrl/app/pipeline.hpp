#pragma once

#include "omcrl/eval/metrics.hpp"
#include "omcrl/io/config.hpp"
#include "omcrl/train/trainer.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace omcrl::app {

// Command-line overrides applied on top of the config file.
struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<double> mask_prob;
  std::optional<std::string> decay;
  bool no_oracle = false;
  bool no_projection = false;
  bool curl_mode = false;
  std::optional<std::string> out;
};

io::RunConfig resolve_config(const std::string& path, const Overrides& overrides);
void apply(io::RunConfig& config, const Overrides& overrides);

// Stage directories under out_dir. Ablation settings get their own upstream
// and student directories so a sweep can share one output directory, e.g.
// upstream-mask0.1, student-curl, student-no-oracle-fixed.
struct Layout {
  std::filesystem::path root;
  std::filesystem::path corpus;
  std::filesystem::path upstream;
  std::filesystem::path oracle;
  std::filesystem::path student;
  std::filesystem::path plots;
};

std::string upstream_suffix(const io::RunConfig& config);
Layout layout(const io::RunConfig& config);

void collect(const io::RunConfig& config);

struct PretrainEval {
  long step = 0;
  double loss = 0.0;
  double retrieval = 0.0;
  double drift = 0.0;
};

std::vector<PretrainEval> pretrain(const io::RunConfig& config);

struct StageResult {
  std::vector<train::TrainRow> log;
  eval::MetricsReport report;
};

StageResult teach(const io::RunConfig& config);
StageResult distill(const io::RunConfig& config, bool force);

// Re-evaluates a saved "oracle" or "student" checkpoint.
eval::MetricsReport evaluate(const io::RunConfig& config, const std::string& target, bool force);

// Renders every CSV found under out_dir; returns the SVG paths written.
std::vector<std::filesystem::path> plot(const io::RunConfig& config);

}  // namespace omcrl::app
