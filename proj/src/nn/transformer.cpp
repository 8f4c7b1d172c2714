#include "omcrl/nn/transformer.hpp"

#include "omcrl/error.hpp"
#include "omcrl/nn/init.hpp"
#include "omcrl/nn/positional.hpp"

#include <cmath>

namespace omcrl::nn {

TransformerBlock::TransformerBlock(const std::string& name, ad::Index dim, ad::Index ffn_dim,
                                   std::mt19937_64& rng)
    : norm1(name + ".norm1", dim),
      wq(name + ".wq", {dim, dim}),
      wk(name + ".wk", {dim, dim}),
      wv(name + ".wv", {dim, dim}),
      norm2(name + ".norm2", dim) {
  orthogonal_init(wq, dim, dim, 1.0, rng);
  orthogonal_init(wk, dim, dim, 1.0, rng);
  orthogonal_init(wv, dim, dim, 1.0, rng);
  ffn1 = Linear(name + ".ffn1", dim, ffn_dim, std::sqrt(2.0), rng);
  ffn2 = Linear(name + ".ffn2", ffn_dim, dim, 1.0, rng);
}

void TransformerBlock::collect(ParameterRefs& out) {
  norm1.collect(out);
  out.push_back(&wq);
  out.push_back(&wk);
  out.push_back(&wv);
  norm2.collect(out);
  ffn1.collect(out);
  ffn2.collect(out);
}

Var attention_block(Tape& tape, TransformerBlock& block, const Var& tokens, ad::Index batch, bool trainable,
                    std::vector<ad::RowMatrix>* weights) {
  if (tokens.rank() != 2 || batch < 1 || tokens.dim(0) % batch != 0)
    throw DimensionError("attention: " + ad::shape_string(tokens.shape()) + " is not " + std::to_string(batch) +
                         " equal-length sequences");
  const ad::Index len = tokens.dim(0) / batch;
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(tokens.dim(1)));
  Var h = block.norm1.forward(tape, tokens, trainable);
  Var q = ad::matmul(h, bind(tape, block.wq, trainable));
  Var k = ad::matmul(h, bind(tape, block.wk, trainable));
  Var v = ad::matmul(h, bind(tape, block.wv, trainable));
  std::vector<Var> outs;
  outs.reserve(static_cast<std::size_t>(batch));
  for (ad::Index b = 0; b < batch; ++b) {
    Var qb = ad::slice_rows(q, b * len, len);
    Var kb = ad::slice_rows(k, b * len, len);
    Var vb = ad::slice_rows(v, b * len, len);
    Var alpha = ad::softmax(ad::scale(ad::matmul_nt(qb, kb), inv_sqrt_d), -1);
    if (weights) weights->emplace_back(alpha.matrix());
    outs.push_back(ad::matmul(alpha, vb));
  }
  Var attended = batch == 1 ? outs.front() : ad::concat_rows(outs);
  return ad::add(tokens, attended);
}

Var ffn_block(Tape& tape, TransformerBlock& block, const Var& tokens, bool trainable) {
  Var h = block.norm2.forward(tape, tokens, trainable);
  Var f = block.ffn2.forward(tape, ad::relu(block.ffn1.forward(tape, h, trainable)), trainable);
  return ad::add(tokens, f);
}

Transformer::Transformer(const TransformerConfig& config, std::mt19937_64& rng) : config_(config) {
  if (config.positional && config.dim % 2 != 0)
    throw ConfigError("transformer width must be even for sinusoidal positions");
  for (int i = 0; i < config.blocks; ++i)
    blocks_.emplace_back("transformer.block" + std::to_string(i), config.dim, config.ffn_dim, rng);
}

Var Transformer::forward(Tape& tape, const Var& tokens, ad::Index batch, bool trainable,
                         std::vector<ad::RowMatrix>* weights) {
  if (tokens.rank() != 2 || tokens.dim(1) != config_.dim || batch < 1 || tokens.dim(0) % batch != 0)
    throw DimensionError("transformer: tokens " + ad::shape_string(tokens.shape()) + " for width " +
                         std::to_string(config_.dim) + " and batch " + std::to_string(batch));
  Var x = tokens;
  if (config_.positional) {
    const ad::Index len = tokens.dim(0) / batch;
    ad::RowMatrix pe = positional_encoding(len, config_.dim).replicate(batch, 1);
    x = ad::add(x, tape.constant(pe));
  }
  for (auto& block : blocks_) {
    x = attention_block(tape, block, x, batch, trainable, weights);
    x = ffn_block(tape, block, x, trainable);
  }
  return x;
}

void Transformer::collect(ParameterRefs& out) {
  for (auto& b : blocks_) b.collect(out);
}

}  // namespace omcrl::nn
