#pragma once

#include "omcrl/error.hpp"

#include <Eigen/Dense>

#include <cmath>

namespace omcrl::nn {

// Sinusoidal encoding: row i holds sin(i / 10000^(2k/d)) at column 2k and
// cos(i / 10000^(2k/d)) at column 2k+1.
template <typename Scalar = double>
Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> positional_encoding(
    Eigen::Index length, Eigen::Index dim) {
  if (dim % 2 != 0) throw ConfigError("positional encoding needs an even width, got " + std::to_string(dim));
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> p(length, dim);
  for (Eigen::Index i = 0; i < length; ++i)
    for (Eigen::Index k = 0; k < dim / 2; ++k) {
      const Scalar angle = Scalar(i) / std::pow(Scalar(10000), Scalar(2 * k) / Scalar(dim));
      p(i, 2 * k) = std::sin(angle);
      p(i, 2 * k + 1) = std::cos(angle);
    }
  return p;
}

}  // namespace omcrl::nn
