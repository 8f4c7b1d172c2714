#include "omcrl/nn/layers.hpp"

#include "omcrl/nn/init.hpp"

namespace omcrl::nn {

Linear::Linear(const std::string& name, ad::Index in, ad::Index out, double gain, std::mt19937_64& rng)
    : weight(name + ".weight", {in, out}), bias(name + ".bias", {out}) {
  orthogonal_init(weight, in, out, gain, rng);
}

Var Linear::forward(Tape& tape, const Var& x, bool trainable) {
  return ad::linear(x, bind(tape, weight, trainable), bind(tape, bias, trainable));
}

LayerNorm::LayerNorm(const std::string& name, ad::Index dim)
    : gain(name + ".gain", {dim}), bias(name + ".bias", {dim}) {
  gain.value.setOnes();
}

Var LayerNorm::forward(Tape& tape, const Var& x, bool trainable) {
  return ad::layernorm(x, bind(tape, gain, trainable), bind(tape, bias, trainable));
}

}  // namespace omcrl::nn
