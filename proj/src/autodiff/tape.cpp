#include "omcrl/autodiff/tape.hpp"

#include "omcrl/error.hpp"

#include <sstream>

namespace omcrl::ad {

Index numel(const Shape& shape) {
  Index n = 1;
  for (Index e : shape) n *= e;
  return n;
}

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

Parameter::Parameter(std::string name_, Shape shape_)
    : name(std::move(name_)), shape(std::move(shape_)) {
  value = Eigen::VectorXd::Zero(numel(shape));
  grad = Eigen::VectorXd::Zero(numel(shape));
}

const Shape& Var::shape() const { return tape_->nodes_[id_].shape; }
Index Var::size() const { return numel(shape()); }
int Var::rank() const { return static_cast<int>(shape().size()); }
bool Var::requires_grad() const { return tape_->nodes_[id_].requires_grad; }

Index Var::dim(int axis) const {
  const auto& s = shape();
  if (axis < 0) axis += static_cast<int>(s.size());
  return s.at(static_cast<std::size_t>(axis));
}

Eigen::Map<const Eigen::VectorXd> Var::values() const {
  const auto& n = tape_->nodes_[id_];
  return {n.data(), numel(n.shape)};
}

ConstMatrixMap Var::matrix() const {
  const auto& n = tape_->nodes_[id_];
  const auto& s = n.shape;
  if (s.size() == 2) return {n.data(), s[0], s[1]};
  if (s.size() <= 1) return {n.data(), 1, numel(s)};
  Index cols = s.back();
  return {n.data(), numel(s) / cols, cols};
}

double Var::item() const {
  if (size() != 1) throw ContractError("item() on non-scalar " + shape_string(shape()));
  return values()[0];
}

Eigen::VectorXd Var::grad() const {
  const auto& n = tape_->nodes_[id_];
  if (n.trainable) return n.trainable->grad;
  if (n.is_leaf) {
    if (n.leaf_grad.size()) return n.leaf_grad;
  } else if (n.scratch.size()) {
    return n.scratch;
  }
  return Eigen::VectorXd::Zero(numel(n.shape));
}

Var Tape::push(Node node) {
  nodes_.push_back(std::move(node));
  return Var(this, static_cast<int>(nodes_.size() - 1));
}

Var Tape::constant(Shape shape, Eigen::VectorXd values) {
  if (values.size() != numel(shape))
    throw DimensionError("constant: " + std::to_string(values.size()) + " values for shape " +
                         shape_string(shape));
  Node n;
  n.shape = std::move(shape);
  n.owned = std::move(values);
  n.is_leaf = true;
  return push(std::move(n));
}

Var Tape::constant(const RowMatrix& m) {
  Eigen::VectorXd v = Eigen::Map<const Eigen::VectorXd>(m.data(), m.size());
  return constant({m.rows(), m.cols()}, std::move(v));
}

Var Tape::scalar(double v) { return constant({}, Eigen::VectorXd::Constant(1, v)); }

Var Tape::variable(Shape shape, Eigen::VectorXd values) {
  Var v = constant(std::move(shape), std::move(values));
  nodes_[v.id()].requires_grad = true;
  return v;
}

Var Tape::param(Parameter& p) {
  if (p.value.size() != numel(p.shape))
    throw DimensionError("parameter '" + p.name + "' storage does not match " +
                         shape_string(p.shape));
  if (p.grad.size() != p.value.size()) p.grad = Eigen::VectorXd::Zero(p.value.size());
  Node n;
  n.shape = p.shape;
  n.source = &p;
  n.trainable = &p;
  n.requires_grad = true;
  n.is_leaf = true;
  return push(std::move(n));
}

Var Tape::frozen(const Parameter& p) {
  Node n;
  n.shape = p.shape;
  n.source = &p;
  n.is_leaf = true;
  return push(std::move(n));
}

Var Tape::record(Shape shape, Eigen::VectorXd values, std::initializer_list<Var> inputs,
                 BackwardFn backward) {
  return record(std::move(shape), std::move(values), std::vector<Var>(inputs), std::move(backward));
}

Var Tape::record(Shape shape, Eigen::VectorXd values, const std::vector<Var>& inputs,
                 BackwardFn backward) {
  Node n;
  n.shape = std::move(shape);
  n.owned = std::move(values);
  for (const Var& in : inputs) {
    if (&in.tape() != this) throw ContractError("operands recorded on different tapes");
    n.requires_grad = n.requires_grad || nodes_[in.id()].requires_grad;
  }
  if (n.requires_grad) n.backward = std::move(backward);
  return push(std::move(n));
}

Eigen::VectorXd* Tape::grad_sink(const Var& v) {
  Node& n = nodes_[v.id()];
  if (!n.requires_grad) return nullptr;
  if (n.scratch.size() == 0) n.scratch = Eigen::VectorXd::Zero(numel(n.shape));
  return &n.scratch;
}

void Tape::backward(const Var& root) {
  if (&root.tape() != this) throw ContractError("backward: root belongs to another tape");
  if (root.size() != 1)
    throw ContractError("backward: root must be scalar, got " + shape_string(root.shape()));
  for (auto& n : nodes_) n.scratch.resize(0);
  Node& r = nodes_[root.id()];
  if (!r.requires_grad) return;
  r.scratch = Eigen::VectorXd::Ones(1);

  for (int i = root.id(); i >= 0; --i) {
    Node& n = nodes_[static_cast<std::size_t>(i)];
    if (!n.requires_grad || n.scratch.size() == 0) continue;
    if (n.is_leaf) {
      if (n.trainable) {
        n.trainable->grad += n.scratch;
      } else {
        if (n.leaf_grad.size() == 0) n.leaf_grad = Eigen::VectorXd::Zero(n.scratch.size());
        n.leaf_grad += n.scratch;
      }
      continue;
    }
    // The closure only touches scratch buffers of earlier nodes.
    Eigen::VectorXd g = std::move(n.scratch);
    n.backward(*this, g);
    n.scratch = std::move(g);
  }
}

std::vector<const Parameter*> Tape::trainable_parameters() const {
  std::vector<const Parameter*> out;
  for (const auto& n : nodes_)
    if (n.trainable) out.push_back(n.trainable);
  return out;
}

bool Tape::binds_trainable(const Parameter& p) const {
  for (const auto& n : nodes_)
    if (n.trainable == &p) return true;
  return false;
}

}  // namespace omcrl::ad
