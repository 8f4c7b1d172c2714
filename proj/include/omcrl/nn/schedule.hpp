#pragma once

#include "omcrl/error.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace omcrl::nn {

enum class LrKind { warmup_inv_sqrt, linear_decay, constant };

struct LrSchedule {
  LrKind kind = LrKind::constant;
  double base = 1e-3;       // peak for warmup_inv_sqrt, initial for linear_decay
  long warmup = 6000;
  long total_steps = 1;
};

inline double learning_rate(const LrSchedule& s, long step) {
  if (step < 0) throw ContractError("learning_rate: negative step " + std::to_string(step));
  switch (s.kind) {
    case LrKind::constant:
      return s.base;
    case LrKind::linear_decay:
      return s.base * std::max(0.0, 1.0 - static_cast<double>(step) / static_cast<double>(s.total_steps));
    case LrKind::warmup_inv_sqrt:
      if (step == 0) return 0.0;
      return s.base * std::min(static_cast<double>(step) / static_cast<double>(s.warmup),
                               std::sqrt(static_cast<double>(s.warmup) / static_cast<double>(step)));
  }
  return s.base;
}

}  // namespace omcrl::nn
