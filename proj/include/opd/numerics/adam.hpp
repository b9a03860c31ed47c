#pragma once

#include <cstdint>
#include <vector>

#include "opd/numerics/tensor.hpp"

namespace opd::num {

struct AdamOptions {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double max_grad_norm = 0.0;  // 0 disables global-norm clipping
};

/// Adaptive moment estimation over a fixed parameter list.
class Adam {
 public:
  Adam(std::vector<Tensor> params, AdamOptions options);

  void zero_grad();
  /// Applies one update from the accumulated gradients. Returns the global
  /// gradient norm before clipping.
  double step();

  const AdamOptions& options() const { return options_; }
  void set_learning_rate(double lr) { options_.learning_rate = lr; }
  std::int64_t steps() const { return t_; }

 private:
  std::vector<Tensor> params_;
  std::vector<std::vector<double>> m_, v_;
  AdamOptions options_;
  std::int64_t t_ = 0;
};

}  // namespace opd::num
