#pragma once

#include "omcrl/nn/layers.hpp"

namespace omcrl::nn {

struct TransformerConfig {
  ad::Index dim = 64;
  ad::Index ffn_dim = 256;
  int blocks = 2;
  bool positional = true;
};

// Single-head pre-norm encoder block:
//   x <- x + Attn(LN1(x)),  x <- x + FFN(LN2(x)).
struct TransformerBlock {
  TransformerBlock() = default;
  TransformerBlock(const std::string& name, ad::Index dim, ad::Index ffn_dim, std::mt19937_64& rng);
  void collect(ParameterRefs& out);

  LayerNorm norm1;
  Parameter wq, wk, wv;  // [d x d]
  LayerNorm norm2;
  Linear ffn1;  // d -> d_ff
  Linear ffn2;  // d_ff -> d
};

// Tokens are laid out as [batch * T x d], one sequence after another.
// Residual attention sublayer. When weights is non-null it receives one
// [T x T] attention matrix per sequence.
Var attention_block(Tape& tape, TransformerBlock& block, const Var& tokens, ad::Index batch,
                    bool trainable, std::vector<ad::RowMatrix>* weights = nullptr);
// Residual feed-forward sublayer.
Var ffn_block(Tape& tape, TransformerBlock& block, const Var& tokens, bool trainable);

class Transformer {
 public:
  Transformer() = default;
  Transformer(const TransformerConfig& config, std::mt19937_64& rng);

  Var forward(Tape& tape, const Var& tokens, ad::Index batch, bool trainable,
              std::vector<ad::RowMatrix>* weights = nullptr);
  void collect(ParameterRefs& out);

  const TransformerConfig& config() const { return config_; }
  std::vector<TransformerBlock>& blocks() { return blocks_; }

 private:
  TransformerConfig config_;
  std::vector<TransformerBlock> blocks_;
};

}  // namespace omcrl::nn
