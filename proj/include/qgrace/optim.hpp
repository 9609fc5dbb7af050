#pragma once

#include <cstddef>
#include <vector>

#include "qgrace/matrix.hpp"

namespace qgrace::optim {

struct AdamConfig {
  double lr = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Adaptive-moment optimizer over a fixed list of parameter blocks.
class Adam {
 public:
  explicit Adam(AdamConfig config = {}) : config_(config) {}

  /// One bias-corrected update. Block shapes must stay the same across calls.
  void step(const std::vector<Matrix*>& params, const std::vector<const Matrix*>& grads);

  long steps_taken() const { return t_; }

 private:
  AdamConfig config_;
  std::vector<Matrix> m_;
  std::vector<Matrix> v_;
  long t_ = 0;
};

}  // namespace qgrace::optim
