#include "rtn/optimizer.hpp"

#include <algorithm>
#include <cmath>

#include "rtn/error.hpp"

namespace rtn {

double lr_at(double progress, double base_lr, double alpha, double beta) {
  if (!(progress >= 0.0 && progress <= 1.0)) {
    throw ParameterError("lr_at: progress must lie in [0, 1], got " + std::to_string(progress));
  }
  if (!(base_lr > 0.0) || !(alpha >= 0.0) || !(beta >= 0.0)) {
    throw ParameterError("lr_at: need base_lr > 0, alpha >= 0, beta >= 0");
  }
  return base_lr / std::pow(1.0 + alpha * progress, beta);
}

SgdState::SgdState(LrSchedule schedule, double momentum, std::size_t total_steps, double weight_decay)
    : schedule_(schedule), momentum_(momentum), weight_decay_(weight_decay), total_steps_(total_steps) {
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ParameterError("momentum must lie in [0, 1)");
  if (!(weight_decay >= 0.0)) throw ParameterError("weight_decay must be >= 0");
  lr_at(0.0, schedule_);  // validates the schedule constants
}

double SgdState::progress() const {
  if (total_steps_ == 0) return 0.0;
  return std::min(1.0, static_cast<double>(step_) / static_cast<double>(total_steps_));
}

void SgdState::step(Network& net) {
  if (!net.grads_ready()) throw StateError("optimizer step without gradients from a backward pass");
  auto params = net.parameters();
  if (velocity_.empty()) {
    for (const auto& p : params) velocity_.emplace_back(p.value->shape());
  }
  if (velocity_.size() != params.size()) throw StateError("optimizer state does not match the network");
  const double lr = current_lr();
  last_rates_.assign(params.size(), 0.0);
  for (std::size_t k = 0; k < params.size(); ++k) {
    Tensor& v = velocity_[k];
    Tensor& theta = *params[k].value;
    const Tensor& g = *params[k].grad;
    if (v.shape() != theta.shape()) throw StateError("velocity shape mismatch for " + params[k].name);
    const double rate = params[k].lr_multiplier * lr;
    last_rates_[k] = rate;
    const bool decay = weight_decay_ > 0.0 && theta.rank() == 2;
    for (std::size_t i = 0; i < theta.size(); ++i) {
      const double gi = decay ? g[i] + weight_decay_ * theta[i] : g[i];
      v[i] = momentum_ * v[i] - rate * gi;
      theta[i] += v[i];
    }
  }
  net.consume_grads();
  ++step_;
}

}  // namespace rtn
