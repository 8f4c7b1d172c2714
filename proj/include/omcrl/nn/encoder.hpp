#pragma once

#include "omcrl/nn/layers.hpp"

namespace omcrl::nn {

struct EncoderConfig {
  ad::Index in_channels = 9;  // 3 * frames for RGB, 1 * frames for depth
  ad::Index height = 64;
  ad::Index width = 64;
  ad::Index latent_dim = 64;
  ad::Index conv_channels = 32;
};

// Frame-stack encoder: conv3x3/2 -> ReLU -> conv3x3/1 -> ReLU -> flatten ->
// fully connected -> layernorm -> tanh. Output lies in (-1, 1)^d.
class Encoder {
 public:
  Encoder() = default;
  Encoder(const EncoderConfig& config, std::mt19937_64& rng);

  // x: [N x C x H x W] -> [N x d]
  Var forward(Tape& tape, const Var& x, bool trainable);
  void collect(ParameterRefs& out);

  const EncoderConfig& config() const { return config_; }
  ad::Index flat_dim() const { return flat_dim_; }

 private:
  EncoderConfig config_;
  ad::Index flat_dim_ = 0;
  Parameter conv1_w_, conv1_b_, conv2_w_, conv2_b_;
  Linear fc_;
  LayerNorm norm_;
};

// Two-layer projection head W2 relu(W1 z + b1) + b2; disabled heads are the
// identity map.
class Projection {
 public:
  Projection() = default;
  Projection(ad::Index dim, ad::Index hidden, bool enabled, std::mt19937_64& rng);

  Var forward(Tape& tape, const Var& z, bool trainable);
  void collect(ParameterRefs& out);
  bool enabled() const { return enabled_; }

  Linear first;
  Linear second;

 private:
  bool enabled_ = true;
};

}  // namespace omcrl::nn
