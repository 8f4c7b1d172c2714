#include "omcrl/nn/init.hpp"

#include "omcrl/error.hpp"

namespace omcrl::nn {

void orthogonal_init(ad::Parameter& p, ad::Index rows, ad::Index cols, double gain, std::mt19937_64& rng) {
  if (rows * cols != p.value.size())
    throw DimensionError("orthogonal_init: " + std::to_string(rows) + "x" + std::to_string(cols) +
                         " does not cover parameter '" + p.name + "'");
  const ad::Index big = std::max(rows, cols), small = std::min(rows, cols);
  std::normal_distribution<double> nd(0.0, 1.0);
  Eigen::MatrixXd a(big, small);
  for (ad::Index j = 0; j < small; ++j)
    for (ad::Index i = 0; i < big; ++i) a(i, j) = nd(rng);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
  Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(big, small);
  // Sign fix makes the draw uniform over the orthogonal group.
  Eigen::VectorXd d = qr.matrixQR().diagonal();
  for (ad::Index j = 0; j < small; ++j)
    if (d[j] < 0) q.col(j) = -q.col(j);
  ad::RowMatrix w = rows >= cols ? ad::RowMatrix(q) : ad::RowMatrix(q.transpose());
  p.value = gain * Eigen::Map<Eigen::VectorXd>(w.data(), w.size());
  p.grad = Eigen::VectorXd::Zero(p.value.size());
}

}  // namespace omcrl::nn
