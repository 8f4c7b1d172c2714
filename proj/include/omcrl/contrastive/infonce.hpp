#pragma once

#include "omcrl/nn/layers.hpp"

#include <optional>

namespace omcrl::contrastive {

using ad::RowMatrix;

enum class Similarity { cosine, bilinear };

// Queries are the Transformer outputs (rows of a Var); keys are constants
// from the momentum branch. Rows are grouped into sequences of `length`
// consecutive positions; each query is contrasted with the keys of its own
// sequence.
struct ContrastiveBatch {
  RowMatrix keys;
  std::vector<std::uint8_t> mask;
  int length = 0;
  double tau = 0.07;
};

// Mean over masked positions of -log softmax_j(sim(q_i, k_j) / tau)[i].
// Returns a zero constant when no position is masked. `bilinear` supplies W
// for sim = q^T W k.
ad::Var masked_infonce(ad::Tape& tape, const ad::Var& queries, const ContrastiveBatch& batch,
                       Similarity sim = Similarity::cosine, const ad::Var* bilinear = nullptr);

RowMatrix similarity_matrix(const RowMatrix& q, const RowMatrix& k, Similarity sim,
                            const RowMatrix* bilinear = nullptr);

// Fraction of masked positions whose own key has the highest similarity in
// its sequence; nullopt without masked positions.
std::optional<double> retrieval_accuracy(const RowMatrix& queries, const ContrastiveBatch& batch,
                                         Similarity sim = Similarity::cosine,
                                         const RowMatrix* bilinear = nullptr);

// Mean Euclidean distance between reconstructions and clean embeddings over
// masked positions; nullopt without masked positions.
std::optional<double> representation_drift(const RowMatrix& z, const RowMatrix& z_clean,
                                           const std::vector<std::uint8_t>& mask);

// key <- m * query + (1 - m) * key for each parameter pair.
void momentum_update(const nn::ParameterRefs& query, const nn::ParameterRefs& key, double m);

}  // namespace omcrl::contrastive
