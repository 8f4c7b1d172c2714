#pragma once

#include "omcrl/nn/layers.hpp"

namespace omcrl::nn {

struct AdamOptions {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  // Global gradient-norm clip; <= 0 disables.
  double max_grad_norm = 0.0;
};

// Adam with bias correction. step() applies one update and zeroes gradients.
class Adam {
 public:
  Adam() = default;
  Adam(ParameterRefs params, AdamOptions options = {});

  void step(double lr);
  void zero_grad();
  long steps() const { return t_; }
  const ParameterRefs& parameters() const { return params_; }

 private:
  ParameterRefs params_;
  AdamOptions opt_;
  std::vector<Eigen::VectorXd> m_, v_;
  long t_ = 0;
};

double grad_norm(const ParameterRefs& params);

}  // namespace omcrl::nn
