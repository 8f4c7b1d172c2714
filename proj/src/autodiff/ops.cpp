#include "omcrl/autodiff/ops.hpp"

#include "omcrl/error.hpp"

#include <cmath>
#include <limits>
#include <memory>

namespace omcrl::ad {
namespace {

using Eigen::VectorXd;

void require_rank(const Var& x, int rank, const char* op) {
  if (x.rank() != rank)
    throw DimensionError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got " +
                         shape_string(x.shape()));
}

MatrixMap as_matrix(VectorXd& v, Index rows, Index cols) { return {v.data(), rows, cols}; }

struct Broadcast {
  Shape shape;
  bool a_scalar = false;
  bool b_scalar = false;
};

Broadcast binary_shape(const Var& a, const Var& b, const char* op) {
  if (a.shape() == b.shape()) return {a.shape(), false, false};
  if (b.size() == 1) return {a.shape(), false, true};
  if (a.size() == 1) return {b.shape(), true, false};
  throw DimensionError(std::string(op) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                       shape_string(b.shape()));
}

// Accumulate g into the sink of x, reducing to a scalar when x was broadcast.
void accumulate(Tape& t, const Var& x, bool was_scalar, const VectorXd& g) {
  if (VectorXd* s = t.grad_sink(x)) {
    if (was_scalar)
      (*s)[0] += g.sum();
    else
      *s += g;
  }
}

VectorXd expand(const Var& x, bool scalar, Index n) {
  if (scalar) return VectorXd::Constant(n, x.values()[0]);
  return x.values();
}

Var unary(const Var& x, VectorXd out, std::function<VectorXd(const VectorXd& g)> local) {
  Shape s = x.shape();
  return x.tape().record(std::move(s), std::move(out), {x},
                         [x, local = std::move(local)](Tape& t, const VectorXd& g) {
                           if (VectorXd* sink = t.grad_sink(x)) *sink += local(g);
                         });
}

}  // namespace

Var matmul(const Var& a, const Var& b) {
  require_rank(a, 2, "matmul");
  require_rank(b, 2, "matmul");
  if (a.dim(1) != b.dim(0))
    throw DimensionError("matmul: inner extents disagree " + shape_string(a.shape()) + " x " +
                         shape_string(b.shape()));
  const Index m = a.dim(0), n = b.dim(1);
  VectorXd out(m * n);
  as_matrix(out, m, n).noalias() = a.matrix() * b.matrix();
  return a.tape().record({m, n}, std::move(out), {a, b}, [a, b, m, n](Tape& t, const VectorXd& g) {
    ConstMatrixMap G(g.data(), m, n);
    if (VectorXd* s = t.grad_sink(a)) as_matrix(*s, m, a.dim(1)).noalias() += G * b.matrix().transpose();
    if (VectorXd* s = t.grad_sink(b)) as_matrix(*s, b.dim(0), n).noalias() += a.matrix().transpose() * G;
  });
}

Var matmul_nt(const Var& a, const Var& b) {
  require_rank(a, 2, "matmul_nt");
  require_rank(b, 2, "matmul_nt");
  if (a.dim(1) != b.dim(1))
    throw DimensionError("matmul_nt: inner extents disagree " + shape_string(a.shape()) + " x " +
                         shape_string(b.shape()) + "^T");
  const Index m = a.dim(0), n = b.dim(0), k = a.dim(1);
  VectorXd out(m * n);
  as_matrix(out, m, n).noalias() = a.matrix() * b.matrix().transpose();
  return a.tape().record({m, n}, std::move(out), {a, b}, [a, b, m, n, k](Tape& t, const VectorXd& g) {
    ConstMatrixMap G(g.data(), m, n);
    if (VectorXd* s = t.grad_sink(a)) as_matrix(*s, m, k).noalias() += G * b.matrix();
    if (VectorXd* s = t.grad_sink(b)) as_matrix(*s, n, k).noalias() += G.transpose() * a.matrix();
  });
}

Var linear(const Var& x, const Var& w) { return matmul(x, w); }

Var linear(const Var& x, const Var& w, const Var& b) {
  require_rank(x, 2, "linear");
  require_rank(w, 2, "linear");
  if (x.dim(1) != w.dim(0))
    throw DimensionError("linear: input " + shape_string(x.shape()) + " vs weight " +
                         shape_string(w.shape()));
  const Index n = x.dim(0), out_dim = w.dim(1);
  if (b.size() != out_dim)
    throw DimensionError("linear: bias " + shape_string(b.shape()) + " vs weight " +
                         shape_string(w.shape()));
  VectorXd out(n * out_dim);
  MatrixMap O = as_matrix(out, n, out_dim);
  O.noalias() = x.matrix() * w.matrix();
  O.rowwise() += b.values().transpose();
  return x.tape().record({n, out_dim}, std::move(out), {x, w, b},
                         [x, w, b, n, out_dim](Tape& t, const VectorXd& g) {
                           ConstMatrixMap G(g.data(), n, out_dim);
                           if (VectorXd* s = t.grad_sink(x))
                             as_matrix(*s, n, x.dim(1)).noalias() += G * w.matrix().transpose();
                           if (VectorXd* s = t.grad_sink(w))
                             as_matrix(*s, w.dim(0), out_dim).noalias() += x.matrix().transpose() * G;
                           if (VectorXd* s = t.grad_sink(b)) *s += G.colwise().sum().transpose();
                         });
}

namespace {

struct ConvGeometry {
  Index n, c, h, w, co, kh, kw, ho, wo, stride;
  Index k() const { return c * kh * kw; }
  Index p() const { return n * ho * wo; }
};

// cols [C*kh*kw x N*ho*wo]
void im2col(const double* x, const ConvGeometry& g, RowMatrix& cols) {
  cols.resize(g.k(), g.p());
  for (Index ci = 0; ci < g.c; ++ci)
    for (Index ki = 0; ki < g.kh; ++ki)
      for (Index kj = 0; kj < g.kw; ++kj) {
        double* row = cols.row((ci * g.kh + ki) * g.kw + kj).data();
        for (Index ni = 0; ni < g.n; ++ni) {
          const double* plane = x + (ni * g.c + ci) * g.h * g.w;
          double* dst = row + ni * g.ho * g.wo;
          for (Index oy = 0; oy < g.ho; ++oy) {
            const double* src = plane + (oy * g.stride + ki) * g.w + kj;
            for (Index ox = 0; ox < g.wo; ++ox) dst[oy * g.wo + ox] = src[ox * g.stride];
          }
        }
      }
}

void col2im(const RowMatrix& cols, const ConvGeometry& g, double* dx) {
  for (Index ci = 0; ci < g.c; ++ci)
    for (Index ki = 0; ki < g.kh; ++ki)
      for (Index kj = 0; kj < g.kw; ++kj) {
        const double* row = cols.row((ci * g.kh + ki) * g.kw + kj).data();
        for (Index ni = 0; ni < g.n; ++ni) {
          double* plane = dx + (ni * g.c + ci) * g.h * g.w;
          const double* src = row + ni * g.ho * g.wo;
          for (Index oy = 0; oy < g.ho; ++oy) {
            double* dst = plane + (oy * g.stride + ki) * g.w + kj;
            for (Index ox = 0; ox < g.wo; ++ox) dst[ox * g.stride] += src[oy * g.wo + ox];
          }
        }
      }
}

Var conv2d_impl(const Var& x, const Var& w, const Var* bias, int stride) {
  if (stride < 1) throw ContractError("conv2d: stride must be positive");
  const bool batched = x.rank() == 4;
  if (!batched && x.rank() != 3)
    throw DimensionError("conv2d: input must be [C x H x W] or [N x C x H x W], got " +
                         shape_string(x.shape()));
  require_rank(w, 4, "conv2d");
  ConvGeometry g{};
  g.n = batched ? x.dim(0) : 1;
  g.c = x.dim(-3);
  g.h = x.dim(-2);
  g.w = x.dim(-1);
  g.co = w.dim(0);
  g.kh = w.dim(2);
  g.kw = w.dim(3);
  g.stride = stride;
  if (w.dim(1) != g.c)
    throw DimensionError("conv2d: kernel " + shape_string(w.shape()) + " vs input " +
                         shape_string(x.shape()));
  if (g.kh > g.h || g.kw > g.w)
    throw DimensionError("conv2d: kernel " + shape_string(w.shape()) + " larger than input " +
                         shape_string(x.shape()));
  if (bias && bias->size() != g.co)
    throw DimensionError("conv2d: bias " + shape_string(bias->shape()) + " vs kernel " +
                         shape_string(w.shape()));
  g.ho = (g.h - g.kh) / stride + 1;
  g.wo = (g.w - g.kw) / stride + 1;

  auto cols = std::make_shared<RowMatrix>();
  im2col(x.values().data(), g, *cols);
  ConstMatrixMap W(w.values().data(), g.co, g.k());
  RowMatrix prod = W * (*cols);  // [co x N*hw]
  const Index hw = g.ho * g.wo;
  VectorXd out(g.n * g.co * hw);
  for (Index ni = 0; ni < g.n; ++ni)
    for (Index oc = 0; oc < g.co; ++oc) {
      double* dst = out.data() + (ni * g.co + oc) * hw;
      const double* src = prod.row(oc).data() + ni * hw;
      const double b = bias ? bias->values()[oc] : 0.0;
      for (Index p = 0; p < hw; ++p) dst[p] = src[p] + b;
    }

  Shape shape = batched ? Shape{g.n, g.co, g.ho, g.wo} : Shape{g.co, g.ho, g.wo};
  const bool needs_cols = w.requires_grad();
  if (!needs_cols && !x.requires_grad() && !(bias && bias->requires_grad())) cols.reset();
  Var b = bias ? *bias : Var();
  auto fn = [x, w, b, g, cols, hw](Tape& t, const VectorXd& gout) {
    RowMatrix G(g.co, g.p());
    for (Index ni = 0; ni < g.n; ++ni)
      for (Index oc = 0; oc < g.co; ++oc)
        std::copy_n(gout.data() + (ni * g.co + oc) * hw, hw, G.row(oc).data() + ni * hw);
    if (b.valid())
      if (VectorXd* s = t.grad_sink(b)) *s += G.rowwise().sum();
    if (VectorXd* s = t.grad_sink(w)) as_matrix(*s, g.co, g.k()).noalias() += G * cols->transpose();
    if (VectorXd* s = t.grad_sink(x)) {
      ConstMatrixMap W(w.values().data(), g.co, g.k());
      RowMatrix dcols = W.transpose() * G;
      col2im(dcols, g, s->data());
    }
  };
  if (bias) return x.tape().record(std::move(shape), std::move(out), {x, w, *bias}, fn);
  return x.tape().record(std::move(shape), std::move(out), {x, w}, fn);
}

}  // namespace

Var conv2d(const Var& x, const Var& w, int stride) { return conv2d_impl(x, w, nullptr, stride); }
Var conv2d(const Var& x, const Var& w, const Var& bias, int stride) {
  return conv2d_impl(x, w, &bias, stride);
}

Var relu(const Var& x) {
  VectorXd out = x.values().cwiseMax(0.0);
  return unary(x, std::move(out), [x](const VectorXd& g) {
    return VectorXd((x.values().array() > 0.0).select(g, 0.0));
  });
}

Var tanh(const Var& x) {
  VectorXd out = x.values().array().tanh();
  Shape s = x.shape();
  Var y = x.tape().record(std::move(s), out, {x}, [x, out](Tape& t, const VectorXd& g) {
    if (VectorXd* sink = t.grad_sink(x)) *sink += (g.array() * (1.0 - out.array().square())).matrix();
  });
  return y;
}

Var exp(const Var& x) {
  VectorXd out = x.values().array().exp();
  Shape s = x.shape();
  return x.tape().record(std::move(s), out, {x}, [x, out](Tape& t, const VectorXd& g) {
    if (VectorXd* sink = t.grad_sink(x)) *sink += g.cwiseProduct(out);
  });
}

Var log(const Var& x) {
  const auto v = x.values();
  for (Index i = 0; i < v.size(); ++i)
    if (!(v[i] > 0.0)) throw DomainError("log: non-positive argument " + std::to_string(v[i]));
  VectorXd out = v.array().log();
  return unary(x, std::move(out), [x](const VectorXd& g) { return VectorXd(g.cwiseQuotient(x.values())); });
}

Var square(const Var& x) {
  VectorXd out = x.values().array().square();
  return unary(x, std::move(out),
               [x](const VectorXd& g) { return VectorXd(2.0 * g.cwiseProduct(x.values())); });
}

Var neg(const Var& x) { return scale(x, -1.0); }

Var scale(const Var& x, double c) {
  VectorXd out = c * x.values();
  return unary(x, std::move(out), [c](const VectorXd& g) { return VectorXd(c * g); });
}

Var shift(const Var& x, double c) {
  VectorXd out = x.values().array() + c;
  return unary(x, std::move(out), [](const VectorXd& g) { return g; });
}

Var clamp(const Var& x, double lo, double hi) {
  VectorXd out = x.values().cwiseMax(lo).cwiseMin(hi);
  return unary(x, std::move(out), [x, lo, hi](const VectorXd& g) {
    const auto v = x.values().array();
    return VectorXd(((v >= lo) && (v <= hi)).select(g, 0.0));
  });
}

Var add(const Var& a, const Var& b) {
  auto bc = binary_shape(a, b, "add");
  const Index n = numel(bc.shape);
  VectorXd out = expand(a, bc.a_scalar, n) + expand(b, bc.b_scalar, n);
  return a.tape().record(bc.shape, std::move(out), {a, b}, [a, b, bc](Tape& t, const VectorXd& g) {
    accumulate(t, a, bc.a_scalar, g);
    accumulate(t, b, bc.b_scalar, g);
  });
}

Var sub(const Var& a, const Var& b) {
  auto bc = binary_shape(a, b, "sub");
  const Index n = numel(bc.shape);
  VectorXd out = expand(a, bc.a_scalar, n) - expand(b, bc.b_scalar, n);
  return a.tape().record(bc.shape, std::move(out), {a, b}, [a, b, bc](Tape& t, const VectorXd& g) {
    accumulate(t, a, bc.a_scalar, g);
    accumulate(t, b, bc.b_scalar, -g);
  });
}

Var mul(const Var& a, const Var& b) {
  auto bc = binary_shape(a, b, "mul");
  const Index n = numel(bc.shape);
  VectorXd out = expand(a, bc.a_scalar, n).cwiseProduct(expand(b, bc.b_scalar, n));
  return a.tape().record(bc.shape, std::move(out), {a, b}, [a, b, bc, n](Tape& t, const VectorXd& g) {
    accumulate(t, a, bc.a_scalar, g.cwiseProduct(expand(b, bc.b_scalar, n)));
    accumulate(t, b, bc.b_scalar, g.cwiseProduct(expand(a, bc.a_scalar, n)));
  });
}

Var div(const Var& a, const Var& b) {
  auto bc = binary_shape(a, b, "div");
  const Index n = numel(bc.shape);
  VectorXd den = expand(b, bc.b_scalar, n);
  for (Index i = 0; i < den.size(); ++i)
    if (den[i] == 0.0) throw DomainError("div: division by zero");
  VectorXd out = expand(a, bc.a_scalar, n).cwiseQuotient(den);
  return a.tape().record(bc.shape, out, {a, b}, [a, b, bc, den, out](Tape& t, const VectorXd& g) {
    accumulate(t, a, bc.a_scalar, g.cwiseQuotient(den));
    accumulate(t, b, bc.b_scalar, -g.cwiseProduct(out).cwiseQuotient(den));
  });
}

Var minimum(const Var& a, const Var& b) {
  auto bc = binary_shape(a, b, "minimum");
  const Index n = numel(bc.shape);
  VectorXd av = expand(a, bc.a_scalar, n), bv = expand(b, bc.b_scalar, n);
  VectorXd out = av.cwiseMin(bv);
  // Ties route the gradient to the first operand.
  Eigen::Array<bool, Eigen::Dynamic, 1> pick_a = av.array() <= bv.array();
  return a.tape().record(bc.shape, std::move(out), {a, b}, [a, b, bc, pick_a](Tape& t, const VectorXd& g) {
    accumulate(t, a, bc.a_scalar, pick_a.select(g, 0.0));
    accumulate(t, b, bc.b_scalar, pick_a.select(0.0, g.array()).matrix());
  });
}

Var elementwise(Elementwise op, const Var& a) {
  switch (op) {
    case Elementwise::relu: return relu(a);
    case Elementwise::tanh: return tanh(a);
    case Elementwise::exp: return exp(a);
    case Elementwise::log: return log(a);
    default: throw ContractError("elementwise: binary op given one operand");
  }
}

Var elementwise(Elementwise op, const Var& a, const Var& b) {
  switch (op) {
    case Elementwise::add: return add(a, b);
    case Elementwise::mul: return mul(a, b);
    case Elementwise::sub: return sub(a, b);
    case Elementwise::div: return div(a, b);
    default: throw ContractError("elementwise: unary op given two operands");
  }
}

Var sum(const Var& x) {
  VectorXd out = VectorXd::Constant(1, x.values().sum());
  const Index n = x.size();
  return x.tape().record({}, std::move(out), {x}, [x, n](Tape& t, const VectorXd& g) {
    if (VectorXd* s = t.grad_sink(x)) s->array() += g[0];
    (void)n;
  });
}

Var mean(const Var& x) { return scale(sum(x), 1.0 / static_cast<double>(x.size())); }

Var sum_last(const Var& x) {
  if (x.rank() == 0) return x;
  const Index cols = x.shape().back();
  const Index rows = x.size() / cols;
  Shape s(x.shape().begin(), x.shape().end() - 1);
  VectorXd out = x.matrix().rowwise().sum();
  return x.tape().record(std::move(s), std::move(out), {x}, [x, rows, cols](Tape& t, const VectorXd& g) {
    if (VectorXd* s = t.grad_sink(x)) as_matrix(*s, rows, cols).colwise() += g;
  });
}

Var weighted_sum(const Var& x, const VectorXd& weights) {
  if (weights.size() != x.size())
    throw DimensionError("weighted_sum: " + std::to_string(weights.size()) + " weights for " +
                         shape_string(x.shape()));
  VectorXd out = VectorXd::Constant(1, x.values().dot(weights));
  return x.tape().record({}, std::move(out), {x}, [x, weights](Tape& t, const VectorXd& g) {
    if (VectorXd* s = t.grad_sink(x)) *s += g[0] * weights;
  });
}

Var softmax(const Var& x, int axis) {
  const int r = x.rank();
  if (r == 0) throw DimensionError("softmax: scalar input");
  if (axis < 0) axis += r;
  if (axis < 0 || axis >= r) throw DimensionError("softmax: axis out of range");
  const auto v = x.values();
  for (Index i = 0; i < v.size(); ++i)
    if (std::isnan(v[i])) throw NumericError("softmax: NaN input");
  Index outer = 1, inner = 1;
  const Index n = x.dim(axis);
  for (int i = 0; i < axis; ++i) outer *= x.dim(i);
  for (int i = axis + 1; i < r; ++i) inner *= x.dim(i);
  VectorXd out(v.size());
  for (Index o = 0; o < outer; ++o)
    for (Index in = 0; in < inner; ++in) {
      const Index base = o * n * inner + in;
      double mx = -std::numeric_limits<double>::infinity();
      for (Index k = 0; k < n; ++k) mx = std::max(mx, v[base + k * inner]);
      double z = 0.0;
      for (Index k = 0; k < n; ++k) z += out[base + k * inner] = std::exp(v[base + k * inner] - mx);
      for (Index k = 0; k < n; ++k) out[base + k * inner] /= z;
    }
  Shape s = x.shape();
  return x.tape().record(std::move(s), out, {x}, [x, out, outer, inner, n](Tape& t, const VectorXd& g) {
    VectorXd* sink = t.grad_sink(x);
    if (!sink) return;
    for (Index o = 0; o < outer; ++o)
      for (Index in = 0; in < inner; ++in) {
        const Index base = o * n * inner + in;
        double dot = 0.0;
        for (Index k = 0; k < n; ++k) dot += g[base + k * inner] * out[base + k * inner];
        for (Index k = 0; k < n; ++k)
          (*sink)[base + k * inner] += out[base + k * inner] * (g[base + k * inner] - dot);
      }
  });
}

Var log_softmax(const Var& x) {
  if (x.rank() == 0) throw DimensionError("log_softmax: scalar input");
  const Index cols = x.shape().back();
  const Index rows = x.size() / cols;
  ConstMatrixMap X = x.matrix();
  if (X.hasNaN()) throw NumericError("log_softmax: NaN input");
  RowMatrix out(rows, cols);
  for (Index i = 0; i < rows; ++i) {
    const double mx = X.row(i).maxCoeff();
    const double lse = mx + std::log((X.row(i).array() - mx).exp().sum());
    out.row(i) = X.row(i).array() - lse;
  }
  VectorXd flat = Eigen::Map<VectorXd>(out.data(), out.size());
  Shape s = x.shape();
  return x.tape().record(std::move(s), flat, {x}, [x, flat, rows, cols](Tape& t, const VectorXd& g) {
    VectorXd* sink = t.grad_sink(x);
    if (!sink) return;
    ConstMatrixMap G(g.data(), rows, cols);
    ConstMatrixMap L(flat.data(), rows, cols);
    MatrixMap S = as_matrix(*sink, rows, cols);
    RowMatrix P = L.array().exp();
    S += G - (P.array().colwise() * G.rowwise().sum().array()).matrix();
  });
}

Var layernorm(const Var& x, const Var& gain, const Var& bias, double eps) {
  if (x.rank() == 0) throw DimensionError("layernorm: scalar input");
  const Index d = x.shape().back();
  if (d < 2) throw DimensionError("layernorm: feature width must be >= 2");
  if (gain.size() != d || bias.size() != d)
    throw DimensionError("layernorm: gain/bias " + shape_string(gain.shape()) + " vs width " +
                         std::to_string(d));
  const Index rows = x.size() / d;
  ConstMatrixMap X = x.matrix();
  RowMatrix xhat(rows, d);
  VectorXd inv_std(rows);
  for (Index i = 0; i < rows; ++i) {
    const double mu = X.row(i).mean();
    const double var = (X.row(i).array() - mu).square().mean();
    inv_std[i] = 1.0 / std::sqrt(var + eps);
    xhat.row(i) = (X.row(i).array() - mu) * inv_std[i];
  }
  RowMatrix y = (xhat.array().rowwise() * gain.values().transpose().array()).rowwise() +
                bias.values().transpose().array();
  VectorXd out = Eigen::Map<VectorXd>(y.data(), y.size());
  Shape s = x.shape();
  return x.tape().record(
      std::move(s), std::move(out), {x, gain, bias},
      [x, gain, bias, xhat, inv_std, rows, d](Tape& t, const VectorXd& g) {
        ConstMatrixMap G(g.data(), rows, d);
        if (VectorXd* s = t.grad_sink(gain)) *s += (G.array() * xhat.array()).colwise().sum().transpose().matrix();
        if (VectorXd* s = t.grad_sink(bias)) *s += G.colwise().sum().transpose();
        if (VectorXd* s = t.grad_sink(x)) {
          MatrixMap S = as_matrix(*s, rows, d);
          RowMatrix gh = G.array().rowwise() * gain.values().transpose().array();
          for (Index i = 0; i < rows; ++i) {
            const double m1 = gh.row(i).mean();
            const double m2 = (gh.row(i).array() * xhat.row(i).array()).mean();
            S.row(i).array() += inv_std[i] * (gh.row(i).array() - m1 - xhat.row(i).array() * m2);
          }
        }
      });
}

Var reshape(const Var& x, Shape shape) {
  if (numel(shape) != x.size())
    throw DimensionError("reshape: " + shape_string(x.shape()) + " -> " + shape_string(shape));
  VectorXd out = x.values();
  return x.tape().record(std::move(shape), std::move(out), {x}, [x](Tape& t, const VectorXd& g) {
    if (VectorXd* s = t.grad_sink(x)) *s += g;
  });
}

Var transpose(const Var& x) {
  require_rank(x, 2, "transpose");
  const Index r = x.dim(0), c = x.dim(1);
  VectorXd out(r * c);
  as_matrix(out, c, r) = x.matrix().transpose();
  return x.tape().record({c, r}, std::move(out), {x}, [x, r, c](Tape& t, const VectorXd& g) {
    if (VectorXd* s = t.grad_sink(x)) as_matrix(*s, r, c) += ConstMatrixMap(g.data(), c, r).transpose();
  });
}

Var slice_rows(const Var& x, Index begin, Index count) {
  require_rank(x, 2, "slice_rows");
  if (begin < 0 || count < 1 || begin + count > x.dim(0))
    throw DimensionError("slice_rows: rows [" + std::to_string(begin) + ", " +
                         std::to_string(begin + count) + ") of " + shape_string(x.shape()));
  const Index c = x.dim(1);
  VectorXd out = x.values().segment(begin * c, count * c);
  return x.tape().record({count, c}, std::move(out), {x}, [x, begin, count, c](Tape& t, const VectorXd& g) {
    if (VectorXd* s = t.grad_sink(x)) s->segment(begin * c, count * c) += g;
  });
}

Var gather_rows(const Var& x, const std::vector<Index>& rows) {
  require_rank(x, 2, "gather_rows");
  const Index r = x.dim(0), c = x.dim(1);
  const Index n = static_cast<Index>(rows.size());
  if (n == 0) throw DimensionError("gather_rows: empty index list");
  VectorXd out(n * c);
  for (Index i = 0; i < n; ++i) {
    const Index k = rows[static_cast<std::size_t>(i)];
    if (k < 0 || k >= r)
      throw DimensionError("gather_rows: row " + std::to_string(k) + " of " + shape_string(x.shape()));
    out.segment(i * c, c) = x.values().segment(k * c, c);
  }
  return x.tape().record({n, c}, std::move(out), {x}, [x, rows, c](Tape& t, const VectorXd& g) {
    VectorXd* s = t.grad_sink(x);
    if (!s) return;
    for (std::size_t i = 0; i < rows.size(); ++i)
      s->segment(rows[i] * c, c) += g.segment(static_cast<Index>(i) * c, c);
  });
}

Var concat_rows(const std::vector<Var>& parts) {
  if (parts.empty()) throw ContractError("concat_rows: no operands");
  const Index c = parts[0].dim(1);
  Index rows = 0;
  for (const Var& p : parts) {
    require_rank(p, 2, "concat_rows");
    if (p.dim(1) != c) throw DimensionError("concat_rows: column mismatch " + shape_string(p.shape()));
    rows += p.dim(0);
  }
  VectorXd out(rows * c);
  Index off = 0;
  for (const Var& p : parts) {
    out.segment(off, p.size()) = p.values();
    off += p.size();
  }
  Tape& tape = parts[0].tape();
  auto fn = [parts](Tape& t, const VectorXd& g) {
    Index o = 0;
    for (const Var& p : parts) {
      if (VectorXd* s = t.grad_sink(p)) *s += g.segment(o, p.size());
      o += p.size();
    }
  };
  return tape.record({rows, c}, std::move(out), parts, fn);
}

Var concat_cols(const std::vector<Var>& parts) {
  if (parts.empty()) throw ContractError("concat_cols: no operands");
  const Index r = parts[0].rank() == 1 ? 1 : parts[0].dim(0);
  Index cols = 0;
  for (const Var& p : parts) {
    const Index pr = p.rank() == 1 ? 1 : p.dim(0);
    if (p.rank() > 2 || pr != r)
      throw DimensionError("concat_cols: row mismatch " + shape_string(p.shape()));
    cols += p.size() / r;
  }
  RowMatrix out(r, cols);
  Index off = 0;
  for (const Var& p : parts) {
    const Index pc = p.size() / r;
    out.middleCols(off, pc) = p.matrix();
    off += pc;
  }
  VectorXd flat = Eigen::Map<VectorXd>(out.data(), out.size());
  auto fn = [parts, r, cols](Tape& t, const VectorXd& g) {
    ConstMatrixMap G(g.data(), r, cols);
    Index o = 0;
    for (const Var& p : parts) {
      const Index pc = p.size() / r;
      if (VectorXd* s = t.grad_sink(p)) as_matrix(*s, r, pc) += G.middleCols(o, pc);
      o += pc;
    }
  };
  return parts[0].tape().record({r, cols}, std::move(flat), parts, fn);
}

Var repeat_rows(const Var& v, Index n) {
  const Index d = v.size();
  RowMatrix out = v.values().transpose().replicate(n, 1);
  VectorXd flat = Eigen::Map<VectorXd>(out.data(), out.size());
  return v.tape().record({n, d}, std::move(flat), {v}, [v, n, d](Tape& t, const VectorXd& g) {
    if (VectorXd* s = t.grad_sink(v)) *s += ConstMatrixMap(g.data(), n, d).colwise().sum().transpose();
  });
}

Var l2_normalize_rows(const Var& x) {
  ConstMatrixMap X = x.matrix();
  const Index rows = X.rows(), cols = X.cols();
  VectorXd norms = X.rowwise().norm();
  for (Index i = 0; i < rows; ++i)
    if (!(norms[i] > 0.0) || !std::isfinite(norms[i]))
      throw NumericError("l2_normalize_rows: zero-norm or non-finite row " + std::to_string(i));
  RowMatrix y = X.array().colwise() / norms.array();
  VectorXd flat = Eigen::Map<VectorXd>(y.data(), y.size());
  Shape s = x.shape();
  return x.tape().record(std::move(s), flat, {x}, [x, flat, norms, rows, cols](Tape& t, const VectorXd& g) {
    VectorXd* sink = t.grad_sink(x);
    if (!sink) return;
    ConstMatrixMap G(g.data(), rows, cols);
    ConstMatrixMap Y(flat.data(), rows, cols);
    MatrixMap S = as_matrix(*sink, rows, cols);
    VectorXd dots = (G.array() * Y.array()).rowwise().sum();
    S += ((G - (Y.array().colwise() * dots.array()).matrix()).array().colwise() / norms.array()).matrix();
  });
}

}  // namespace omcrl::ad
