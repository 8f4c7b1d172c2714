#pragma once

#include "omcrl/contrastive/corpus.hpp"
#include "omcrl/contrastive/pretrain.hpp"
#include "omcrl/train/trainer.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <variant>
#include <vector>

namespace omcrl::io {

// Scalar TOML value.
using TomlValue = std::variant<bool, std::int64_t, double, std::string>;

// Parses the TOML subset used by run configs: [table] and [a.b] headers,
// bare or quoted keys (dotted allowed), strings, integers, floats, booleans,
// comments. Keys come back fully qualified, e.g. "rl.gamma". Duplicate keys
// and malformed lines raise ConfigError with the line number.
std::map<std::string, TomlValue> parse_toml(const std::string& text, const std::string& origin);

struct UpstreamRun {
  contrastive::PretrainConfig model;
  int eval_every = 500;    // steps between held-out evaluations
  int eval_batches = 16;
};

struct OracleRun {
  train::OracleNetConfig net;
  long steps = 500000;
  int envs = 16;
};

struct StudentRun {
  train::StudentNetConfig net;
  long steps = 300000;
  int envs = 16;
  bool use_oracle = true;
  std::string kl_estimator = "closed";  // closed | monte_carlo
  int kl_samples = 1;
  std::string encoder_hash;  // optional pin of the frozen encoder
};

struct EvalRun {
  int episodes = 200;
  double epsilon = 0.5;
  std::uint64_t seed = 1000003;
  int parallel = 16;
};

struct RunConfig {
  std::uint64_t seed = 0;
  std::string out_dir = "runs/default";
  sim::ArenaConfig arena;
  contrastive::CorpusConfig corpus;
  UpstreamRun upstream;
  rl::PpoHyper rl;
  OracleRun oracle;
  StudentRun student;
  train::DecaySchedule decay;
  EvalRun eval;

  RunConfig();
};

RunConfig load_config(const std::string& path);
RunConfig config_from_toml(const std::string& text, const std::string& origin);
void validate(const RunConfig& config);

// Canonical TOML of every field, sorted by section; round-trips through
// config_from_toml.
std::string dump_config(const RunConfig& config);

// Hash over the sections a component depends on. Seed and output directory
// are excluded so stages can be rerun into other directories.
std::uint64_t component_hash(const RunConfig& config, const std::string& component);

}  // namespace omcrl::io
