#include "omcrl/nn/encoder.hpp"

#include "omcrl/error.hpp"
#include "omcrl/nn/init.hpp"

#include <cmath>

namespace omcrl::nn {

Encoder::Encoder(const EncoderConfig& config, std::mt19937_64& rng) : config_(config) {
  const ad::Index c = config.conv_channels;
  const ad::Index h1 = (config.height - 3) / 2 + 1, w1 = (config.width - 3) / 2 + 1;
  const ad::Index h2 = h1 - 2, w2 = w1 - 2;
  if (config.height < 3 || config.width < 3 || h2 < 1 || w2 < 1)
    throw DimensionError("encoder: image " + std::to_string(config.height) + "x" + std::to_string(config.width) +
                         " is smaller than the receptive field (7x7)");
  flat_dim_ = c * h2 * w2;
  const double relu_gain = std::sqrt(2.0);
  conv1_w_ = Parameter("encoder.conv1.weight", {c, config.in_channels, 3, 3});
  conv1_b_ = Parameter("encoder.conv1.bias", {c});
  conv2_w_ = Parameter("encoder.conv2.weight", {c, c, 3, 3});
  conv2_b_ = Parameter("encoder.conv2.bias", {c});
  orthogonal_init(conv1_w_, c, config.in_channels * 9, relu_gain, rng);
  orthogonal_init(conv2_w_, c, c * 9, relu_gain, rng);
  fc_ = Linear("encoder.fc", flat_dim_, config.latent_dim, 1.0, rng);
  norm_ = LayerNorm("encoder.norm", config.latent_dim);
}

Var Encoder::forward(Tape& tape, const Var& x, bool trainable) {
  if (x.rank() != 4 || x.dim(1) != config_.in_channels || x.dim(2) != config_.height ||
      x.dim(3) != config_.width)
    throw DimensionError("encoder: expected [N x " + std::to_string(config_.in_channels) + " x " +
                         std::to_string(config_.height) + " x " + std::to_string(config_.width) + "], got " +
                         ad::shape_string(x.shape()));
  Var h = ad::relu(ad::conv2d(x, bind(tape, conv1_w_, trainable), bind(tape, conv1_b_, trainable), 2));
  h = ad::relu(ad::conv2d(h, bind(tape, conv2_w_, trainable), bind(tape, conv2_b_, trainable), 1));
  h = ad::reshape(h, {x.dim(0), flat_dim_});
  return ad::tanh(norm_.forward(tape, fc_.forward(tape, h, trainable), trainable));
}

void Encoder::collect(ParameterRefs& out) {
  out.push_back(&conv1_w_);
  out.push_back(&conv1_b_);
  out.push_back(&conv2_w_);
  out.push_back(&conv2_b_);
  fc_.collect(out);
  norm_.collect(out);
}

Projection::Projection(ad::Index dim, ad::Index hidden, bool enabled, std::mt19937_64& rng) : enabled_(enabled) {
  if (!enabled) return;
  first = Linear("projection.first", dim, hidden, std::sqrt(2.0), rng);
  second = Linear("projection.second", hidden, dim, 1.0, rng);
}

Var Projection::forward(Tape& tape, const Var& z, bool trainable) {
  if (!enabled_) return z;
  if (z.rank() != 2 || z.dim(1) != first.in_dim())
    throw DimensionError("projection: expected width " + std::to_string(first.in_dim()) + ", got " +
                         ad::shape_string(z.shape()));
  return second.forward(tape, ad::relu(first.forward(tape, z, trainable)), trainable);
}

void Projection::collect(ParameterRefs& out) {
  if (!enabled_) return;
  first.collect(out);
  second.collect(out);
}

}  // namespace omcrl::nn
