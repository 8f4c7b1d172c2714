#pragma once

// Differentiable operations on Var. Binary elementwise ops require equal
// shapes; an operand with a single element acts as a scalar. There is no
// other broadcasting: row-wise bias and row replication are explicit ops.

#include "omcrl/autodiff/tape.hpp"

#include <vector>

namespace omcrl::ad {

// [m x k] . [k x n]
Var matmul(const Var& a, const Var& b);
// a . b^T for a [m x k], b [n x k]
Var matmul_nt(const Var& a, const Var& b);
// x [N x in] . w [in x out] + b [out]
Var linear(const Var& x, const Var& w, const Var& b);
Var linear(const Var& x, const Var& w);

// Valid cross-correlation. x is [C x H x W] or [N x C x H x W];
// w is [C_out x C_in x kh x kw]; optional bias is [C_out].
Var conv2d(const Var& x, const Var& w, int stride);
Var conv2d(const Var& x, const Var& w, const Var& bias, int stride);

enum class Elementwise { relu, tanh, exp, log, add, mul, sub, div };
Var elementwise(Elementwise op, const Var& a);
Var elementwise(Elementwise op, const Var& a, const Var& b);

Var relu(const Var& x);
Var tanh(const Var& x);
Var exp(const Var& x);
Var log(const Var& x);
Var square(const Var& x);
Var neg(const Var& x);
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var div(const Var& a, const Var& b);
Var scale(const Var& x, double c);
Var shift(const Var& x, double c);
// Gradient passes only where lo <= x <= hi.
Var clamp(const Var& x, double lo, double hi);
Var minimum(const Var& a, const Var& b);

Var sum(const Var& x);
Var mean(const Var& x);
// Sums over the last axis: [... x n] -> [...].
Var sum_last(const Var& x);
// sum_i weights_i * x_i with constant weights.
Var weighted_sum(const Var& x, const Eigen::VectorXd& weights);

Var softmax(const Var& x, int axis = -1);
Var log_softmax(const Var& x);
Var layernorm(const Var& x, const Var& gain, const Var& bias, double eps = 1e-5);

Var reshape(const Var& x, Shape shape);
Var transpose(const Var& x);
Var slice_rows(const Var& x, Index begin, Index count);
// out[i] = x[rows[i]]; rows may repeat.
Var gather_rows(const Var& x, const std::vector<Index>& rows);
Var concat_rows(const std::vector<Var>& parts);
// Concatenates 2-D operands with equal row counts along columns.
Var concat_cols(const std::vector<Var>& parts);
// v [d] -> [n x d]
Var repeat_rows(const Var& v, Index n);
// Row-wise x / ||x||; throws NumericError on a zero-norm row.
Var l2_normalize_rows(const Var& x);

inline Var operator+(const Var& a, const Var& b) { return add(a, b); }
inline Var operator-(const Var& a, const Var& b) { return sub(a, b); }
inline Var operator*(const Var& a, const Var& b) { return mul(a, b); }
inline Var operator/(const Var& a, const Var& b) { return div(a, b); }
inline Var operator-(const Var& a) { return neg(a); }
inline Var operator*(double c, const Var& x) { return scale(x, c); }
inline Var operator*(const Var& x, double c) { return scale(x, c); }
inline Var operator+(const Var& x, double c) { return shift(x, c); }
inline Var operator-(const Var& x, double c) { return shift(x, -c); }

}  // namespace omcrl::ad
