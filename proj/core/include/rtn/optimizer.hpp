#pragma once

#include <cstddef>
#include <vector>

#include "rtn/network.hpp"
#include "rtn/tensor.hpp"

namespace rtn {

struct LrSchedule {
  double base_lr = 0.01;  // eta_0
  double alpha = 10.0;
  double beta = 0.75;
};

/// eta_0 / (1 + alpha p)^beta for training progress p in [0, 1].
double lr_at(double progress, double base_lr, double alpha, double beta);
inline double lr_at(double progress, const LrSchedule& s) { return lr_at(progress, s.base_lr, s.alpha, s.beta); }

/// Heavy-ball momentum SGD with the annealed learning rate:
///   v <- mu v - m eta_p grad,  theta <- theta + v
/// where m is the layer's learning-rate multiplier and p = step / total_steps.
/// The multiplier scales the gradient term only. A positive weight_decay adds
/// weight_decay * theta to the gradient of every weight matrix (not biases).
class SgdState {
 public:
  SgdState(LrSchedule schedule, double momentum, std::size_t total_steps, double weight_decay = 0.0);

  double momentum() const { return momentum_; }
  double weight_decay() const { return weight_decay_; }
  const LrSchedule& schedule() const { return schedule_; }
  std::size_t step_count() const { return step_; }
  std::size_t total_steps() const { return total_steps_; }
  double progress() const;
  double current_lr() const { return lr_at(progress(), schedule_); }

  /// Applies one update from the gradients populated by the last backward
  /// pass, then clears them. Throws StateError if no gradients are pending.
  void step(Network& net);

  /// m * eta_p per parameter for the most recent step, in parameters() order.
  const std::vector<double>& last_effective_rates() const { return last_rates_; }
  const std::vector<Tensor>& velocities() const { return velocity_; }

 private:
  LrSchedule schedule_;
  double momentum_;
  double weight_decay_;
  std::size_t total_steps_;
  std::size_t step_ = 0;
  std::vector<Tensor> velocity_;
  std::vector<double> last_rates_;
};

}  // namespace rtn
