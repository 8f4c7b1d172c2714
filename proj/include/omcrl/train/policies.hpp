#pragma once

#include "omcrl/nn/encoder.hpp"
#include "omcrl/nn/policy.hpp"
#include "omcrl/sim/env.hpp"

namespace omcrl::train {

using ad::Index;
using ad::RowMatrix;
using EnvViews = std::vector<const sim::NavEnv*>;

struct OracleNetConfig {
  int latent_dim = 64;
  int conv_channels = 32;
  int hidden = 256;
  double init_log_std = 0.0;
};

// Teacher on privileged state: depth stack encoder fused with velocities,
// yaw rate and body-frame obstacle / goal offsets.
class OraclePolicy {
 public:
  OraclePolicy() = default;
  OraclePolicy(const sim::ArenaConfig& arena, const OracleNetConfig& config, std::mt19937_64& rng);

  // One row per env: L depth frames (flattened) followed by 12 features.
  RowMatrix observe(const EnvViews& envs) const;
  Index obs_dim() const { return depth_size_ + 12; }

  nn::PolicyNet::Output forward(ad::Tape& tape, const RowMatrix& obs, bool trainable);
  // Policy means for deterministic evaluation.
  RowMatrix act_mean(const EnvViews& envs);
  void collect(nn::ParameterRefs& out);

  const OracleNetConfig& config() const { return config_; }
  nn::Encoder& encoder() { return encoder_; }
  nn::PolicyNet& head() { return head_; }

 private:
  OracleNetConfig config_;
  Index frames_ = 0, height_ = 0, width_ = 0, depth_size_ = 0;
  nn::Encoder encoder_;
  nn::PolicyNet head_;
};

struct StudentNetConfig {
  int hidden = 256;
  double init_log_std = 0.0;
};

// Frozen upstream encoder + projection feeding an actor-critic over
// [z ; proprioception ; goal vector]. The observation row already holds z,
// so updates never touch the encoder.
class StudentPolicy {
 public:
  StudentPolicy() = default;
  StudentPolicy(nn::Encoder encoder, nn::Projection projection, int crop, const StudentNetConfig& config,
                std::mt19937_64& rng);

  RowMatrix observe(const EnvViews& envs) const;
  Index obs_dim() const;
  // Latents of a batch of RGB stacks, center-cropped.
  RowMatrix embed(const EnvViews& envs) const;

  nn::PolicyNet::Output forward(ad::Tape& tape, const RowMatrix& obs, bool trainable);
  RowMatrix act_mean(const EnvViews& envs);
  void collect(nn::ParameterRefs& out);
  // Frozen parameters (encoder then projection).
  nn::ParameterRefs frozen_parameters();

  int crop() const { return crop_; }
  nn::Encoder& encoder() { return encoder_; }
  nn::Projection& projection() { return projection_; }
  nn::PolicyNet& head() { return head_; }
  const StudentNetConfig& config() const { return config_; }

 private:
  StudentNetConfig config_;
  int crop_ = 0;
  mutable nn::Encoder encoder_;
  mutable nn::Projection projection_;
  nn::PolicyNet head_;
};

}  // namespace omcrl::train
