#include "omcrl/contrastive/infonce.hpp"

#include "omcrl/error.hpp"

#include <cmath>

namespace omcrl::contrastive {

namespace {

void check_batch(const ContrastiveBatch& b, ad::Index rows, ad::Index dim) {
  if (b.length <= 0) throw ContractError("contrastive batch: sequence length must be positive");
  if (b.keys.rows() != rows || b.keys.cols() != dim)
    throw DimensionError("contrastive batch: keys " + std::to_string(b.keys.rows()) + "x" +
                         std::to_string(b.keys.cols()) + " vs queries " + std::to_string(rows) + "x" +
                         std::to_string(dim));
  if (static_cast<ad::Index>(b.mask.size()) != rows) throw DimensionError("contrastive batch: mask length mismatch");
  if (rows % b.length != 0) throw DimensionError("contrastive batch: rows not a multiple of the sequence length");
  if (!(b.tau > 0)) throw DomainError("contrastive batch: temperature must be positive");
}

RowMatrix normalized_rows(const RowMatrix& m, const char* what) {
  RowMatrix out = m;
  for (ad::Index i = 0; i < m.rows(); ++i) {
    const double n = m.row(i).norm();
    if (!(n > 0) || !std::isfinite(n))
      throw NumericError(std::string(what) + " row " + std::to_string(i) + " has zero or non-finite norm");
    out.row(i) /= n;
  }
  return out;
}

}  // namespace

ad::Var masked_infonce(ad::Tape& tape, const ad::Var& queries, const ContrastiveBatch& batch, Similarity sim,
                       const ad::Var* bilinear) {
  const ad::Index n = queries.dim(0), d = queries.dim(1);
  check_batch(batch, n, d);
  double count = 0;
  for (auto m : batch.mask) count += m;
  if (count == 0) return tape.scalar(0.0);

  ad::Var logits;
  if (sim == Similarity::cosine) {
    const RowMatrix k = normalized_rows(batch.keys, "key");
    logits = ad::matmul_nt(ad::l2_normalize_rows(queries), tape.constant(k));
  } else {
    if (!bilinear) throw ContractError("masked_infonce: bilinear similarity needs a weight matrix");
    logits = ad::matmul_nt(ad::matmul(queries, *bilinear), tape.constant(batch.keys));
  }
  logits = logits * (1.0 / batch.tau);

  // Keys outside a query's own sequence are excluded from its softmax.
  // A finite sentinel keeps 0 * entry well defined in the weighted sum.
  const double off = -1e300;
  RowMatrix block = RowMatrix::Constant(n, n, off);
  Eigen::VectorXd weights = Eigen::VectorXd::Zero(n * n);
  const ad::Index T = batch.length;
  for (ad::Index s = 0; s < n; s += T) block.block(s, s, T, T).setZero();
  for (ad::Index i = 0; i < n; ++i)
    if (batch.mask[static_cast<std::size_t>(i)]) weights[i * n + i] = -1.0 / count;
  const ad::Var lsm = ad::log_softmax(logits + tape.constant(block));
  return ad::weighted_sum(lsm, weights);
}

RowMatrix similarity_matrix(const RowMatrix& q, const RowMatrix& k, Similarity sim, const RowMatrix* bilinear) {
  if (sim == Similarity::cosine) return normalized_rows(q, "query") * normalized_rows(k, "key").transpose();
  if (!bilinear) throw ContractError("similarity_matrix: bilinear similarity needs a weight matrix");
  return q * (*bilinear) * k.transpose();
}

std::optional<double> retrieval_accuracy(const RowMatrix& queries, const ContrastiveBatch& batch, Similarity sim,
                                         const RowMatrix* bilinear) {
  check_batch(batch, queries.rows(), queries.cols());
  const ad::Index T = batch.length;
  long masked = 0, hits = 0;
  for (ad::Index s = 0; s < queries.rows(); s += T) {
    const RowMatrix S = similarity_matrix(queries.middleRows(s, T), batch.keys.middleRows(s, T), sim, bilinear);
    for (ad::Index i = 0; i < T; ++i) {
      if (!batch.mask[static_cast<std::size_t>(s + i)]) continue;
      ++masked;
      ad::Index best = 0;
      S.row(i).maxCoeff(&best);
      hits += best == i;
    }
  }
  if (masked == 0) return std::nullopt;
  return static_cast<double>(hits) / static_cast<double>(masked);
}

std::optional<double> representation_drift(const RowMatrix& z, const RowMatrix& z_clean,
                                           const std::vector<std::uint8_t>& mask) {
  if (z.rows() != z_clean.rows() || z.cols() != z_clean.cols() || static_cast<ad::Index>(mask.size()) != z.rows())
    throw DimensionError("representation_drift: shape mismatch");
  double total = 0;
  long n = 0;
  for (ad::Index i = 0; i < z.rows(); ++i) {
    if (!mask[static_cast<std::size_t>(i)]) continue;
    total += (z.row(i) - z_clean.row(i)).norm();
    ++n;
  }
  if (n == 0) return std::nullopt;
  return total / static_cast<double>(n);
}

void momentum_update(const nn::ParameterRefs& query, const nn::ParameterRefs& key, double m) {
  if (query.size() != key.size())
    throw DimensionError("momentum_update: " + std::to_string(query.size()) + " query vs " +
                         std::to_string(key.size()) + " key parameters");
  for (std::size_t i = 0; i < query.size(); ++i)
    if (query[i]->shape != key[i]->shape)
      throw DimensionError("momentum_update: '" + query[i]->name + "' " + ad::shape_string(query[i]->shape) +
                           " vs '" + key[i]->name + "' " + ad::shape_string(key[i]->shape));
  for (std::size_t i = 0; i < query.size(); ++i) key[i]->value = m * query[i]->value + (1.0 - m) * key[i]->value;
}

}  // namespace omcrl::contrastive
