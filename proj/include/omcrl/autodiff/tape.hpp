#pragma once

// Define-by-run reverse-mode differentiation over dense row-major arrays.
//
// A Tape records every operation as it is evaluated. Var is a lightweight
// handle (tape pointer + node id) to one recorded value. Learnable weights
// live outside the tape in Parameter objects; binding a Parameter to a tape
// with Tape::param() makes backward() accumulate into Parameter::grad.

#include <Eigen/Dense>

#include <functional>
#include <string>
#include <vector>

namespace omcrl::ad {

using Index = Eigen::Index;
using Shape = std::vector<Index>;
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixMap = Eigen::Map<RowMatrix>;
using ConstMatrixMap = Eigen::Map<const RowMatrix>;

Index numel(const Shape& shape);
std::string shape_string(const Shape& shape);

struct Parameter {
  Parameter() = default;
  Parameter(std::string name, Shape shape);

  std::string name;
  Shape shape;
  Eigen::VectorXd value;
  Eigen::VectorXd grad;

  void zero_grad() { grad.setZero(); }
  Index size() const { return value.size(); }
};

class Tape;

// DiffTensor handle. Cheap to copy; valid as long as its tape is alive.
class Var {
 public:
  Var() = default;

  bool valid() const { return tape_ != nullptr; }
  Tape& tape() const { return *tape_; }
  int id() const { return id_; }

  const Shape& shape() const;
  Index size() const;
  Index dim(int axis) const;
  int rank() const;
  bool requires_grad() const;

  Eigen::Map<const Eigen::VectorXd> values() const;
  // 2-D view; rank-1 tensors are seen as a single row.
  ConstMatrixMap matrix() const;
  double item() const;

  // Gradient accumulated into this node by the most recent backward() for
  // interior nodes, or the running accumulation for leaves.
  Eigen::VectorXd grad() const;

 private:
  friend class Tape;
  Var(Tape* tape, int id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  int id_ = -1;
};

using BackwardFn = std::function<void(Tape&, const Eigen::VectorXd& grad_out)>;

class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Shape shape, Eigen::VectorXd values);
  Var constant(const RowMatrix& m);
  Var scalar(double v);
  // Leaf that accumulates its own gradient across backward() calls.
  Var variable(Shape shape, Eigen::VectorXd values);
  // Leaf reading Parameter::value; backward() adds into Parameter::grad.
  Var param(Parameter& p);
  // Leaf reading Parameter::value without gradient flow.
  Var frozen(const Parameter& p);

  void backward(const Var& root);

  // Parameters bound through param(), in binding order.
  std::vector<const Parameter*> trainable_parameters() const;
  bool binds_trainable(const Parameter& p) const;

  std::size_t size() const { return nodes_.size(); }

  // Op-author interface.
  Var record(Shape shape, Eigen::VectorXd values, std::initializer_list<Var> inputs,
             BackwardFn backward);
  Var record(Shape shape, Eigen::VectorXd values, const std::vector<Var>& inputs,
             BackwardFn backward);
  // Scratch gradient buffer of an input during backward(); nullptr when the
  // input does not require a gradient.
  Eigen::VectorXd* grad_sink(const Var& v);

 private:
  friend class Var;

  struct Node {
    Shape shape;
    Eigen::VectorXd owned;
    const Parameter* source = nullptr;
    Parameter* trainable = nullptr;
    bool requires_grad = false;
    bool is_leaf = false;
    Eigen::VectorXd scratch;
    Eigen::VectorXd leaf_grad;
    BackwardFn backward;

    const double* data() const { return source ? source->value.data() : owned.data(); }
  };

  Var push(Node node);

  std::vector<Node> nodes_;
};

}  // namespace omcrl::ad
