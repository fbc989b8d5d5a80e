#include "mvproto/optimizer.hpp"

#include <cmath>

#include "mvproto/errors.hpp"

namespace mvproto {

AdamOptimizer::AdamOptimizer(std::vector<TensorPtr> parameters, AdamConfig config)
    : parameters_(std::move(parameters)), config_(config) {
  for (const auto& p : parameters_) {
    if (!p || !p->requires_grad())
      throw ContractError("optimizer: every parameter must carry a gradient slot");
    first_moment_.push_back(Eigen::ArrayXd::Zero(p->size()));
    second_moment_.push_back(Eigen::ArrayXd::Zero(p->size()));
  }
}

void AdamOptimizer::step() {
  ++steps_;
  const double b1 = config_.beta1, b2 = config_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(steps_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(steps_));
  for (std::size_t i = 0; i < parameters_.size(); ++i) {
    Tensor& p = *parameters_[i];
    const Eigen::ArrayXd& g = p.grad();
    first_moment_[i] = b1 * first_moment_[i] + (1.0 - b1) * g;
    second_moment_[i] = b2 * second_moment_[i] + (1.0 - b2) * g.square();
    p.values() -= config_.learning_rate * (first_moment_[i] / c1) /
                  ((second_moment_[i] / c2).sqrt() + config_.epsilon);
    p.zero_grad();
  }
}

void AdamOptimizer::zero_grad() {
  for (const auto& p : parameters_) p->zero_grad();
}

}  // namespace mvproto
