#pragma once

#include "omcrl/autodiff/ops.hpp"

#include <random>
#include <string>
#include <vector>

namespace omcrl::nn {

using ad::Parameter;
using ad::Tape;
using ad::Var;
using ParameterRefs = std::vector<Parameter*>;

// Binds a parameter as trainable (gradient flows) or frozen (read-only).
inline Var bind(Tape& tape, Parameter& p, bool trainable) {
  return trainable ? tape.param(p) : tape.frozen(p);
}

// y = x W + b with W stored as [in x out].
struct Linear {
  Linear() = default;
  Linear(const std::string& name, ad::Index in, ad::Index out, double gain, std::mt19937_64& rng);

  Var forward(Tape& tape, const Var& x, bool trainable);
  void collect(ParameterRefs& out) { out.push_back(&weight); out.push_back(&bias); }

  ad::Index in_dim() const { return weight.shape.at(0); }
  ad::Index out_dim() const { return weight.shape.at(1); }

  Parameter weight;
  Parameter bias;
};

struct LayerNorm {
  LayerNorm() = default;
  LayerNorm(const std::string& name, ad::Index dim);

  Var forward(Tape& tape, const Var& x, bool trainable);
  void collect(ParameterRefs& out) { out.push_back(&gain); out.push_back(&bias); }

  Parameter gain;
  Parameter bias;
};

}  // namespace omcrl::nn
