#include "omcrl/nn/optim.hpp"

#include "omcrl/error.hpp"

#include <cmath>

namespace omcrl::nn {

Adam::Adam(ParameterRefs params, AdamOptions options) : params_(std::move(params)), opt_(options) {
  for (Parameter* p : params_) {
    m_.push_back(Eigen::VectorXd::Zero(p->size()));
    v_.push_back(Eigen::VectorXd::Zero(p->size()));
  }
}

double grad_norm(const ParameterRefs& params) {
  double sq = 0.0;
  for (const Parameter* p : params) sq += p->grad.squaredNorm();
  return std::sqrt(sq);
}

void Adam::step(double lr) {
  for (const Parameter* p : params_)
    if (!p->grad.allFinite()) throw NumericError("adam: non-finite gradient in '" + p->name + "'");
  double clip = 1.0;
  if (opt_.max_grad_norm > 0.0) {
    const double norm = grad_norm(params_);
    if (norm > opt_.max_grad_norm) clip = opt_.max_grad_norm / norm;
  }
  ++t_;
  const double c1 = 1.0 - std::pow(opt_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(opt_.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Parameter& p = *params_[i];
    const Eigen::VectorXd g = clip * p.grad;
    m_[i] = opt_.beta1 * m_[i] + (1.0 - opt_.beta1) * g;
    v_[i] = opt_.beta2 * v_[i] + (1.0 - opt_.beta2) * g.cwiseAbs2();
    p.value.array() -= lr * (m_[i].array() / c1) / ((v_[i].array() / c2).sqrt() + opt_.eps);
  }
  zero_grad();
}

void Adam::zero_grad() {
  for (Parameter* p : params_) p->zero_grad();
}

}  // namespace omcrl::nn
