#pragma once

#include <vector>

#include "mvproto/tensor.hpp"

namespace mvproto {

/// Adaptive moment estimation with bias correction; the de facto default for
/// prototype-network training.
struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

class AdamOptimizer {
 public:
  explicit AdamOptimizer(std::vector<TensorPtr> parameters, AdamConfig config = {});

  /// One bias-corrected update from the accumulated gradients, which are
  /// zeroed afterwards.
  void step();
  void zero_grad();

  long step_count() const { return steps_; }
  const AdamConfig& config() const { return config_; }

 private:
  std::vector<TensorPtr> parameters_;
  std::vector<Eigen::ArrayXd> first_moment_;
  std::vector<Eigen::ArrayXd> second_moment_;
  AdamConfig config_;
  long steps_ = 0;
};

}  // namespace mvproto
