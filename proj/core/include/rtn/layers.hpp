#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "rtn/rng.hpp"
#include "rtn/tensor.hpp"

namespace rtn {

enum class LayerKind { linear, relu, softmax };

const char* to_string(LayerKind kind);

/// One differentiable layer with a hand-written backward pass.
///
/// Linear layers compute y = x W + b with W stored [in x out]. Gradients are
/// accumulated into grad_weight / grad_bias, which always mirror the
/// parameter shapes. Parameter-free kinds leave all four tensors empty.
struct Layer {
  std::string name;
  LayerKind kind = LayerKind::linear;
  Tensor weight;
  Tensor bias;
  Tensor grad_weight;
  Tensor grad_bias;
  double lr_multiplier = 1.0;

  static Layer linear(std::string name, std::size_t in, std::size_t out, double lr_multiplier = 1.0);
  static Layer relu(std::string name);
  static Layer softmax(std::string name);

  bool has_params() const { return kind == LayerKind::linear; }
  std::size_t in_features() const { return weight.rows(); }
  std::size_t out_features() const { return weight.cols(); }

  /// Uniform fan-in/fan-out scaling, +-sqrt(6 / (in + out)); bias zeroed.
  void init_uniform(Rng& rng);
  void zero_params();
  void zero_grad();

  Tensor forward(const Tensor& x) const;
  /// `x` is the input given to forward, `y` the output it produced. Adds
  /// parameter gradients and returns the gradient with respect to `x`.
  Tensor backward(const Tensor& x, const Tensor& y, const Tensor& dy);
};

/// Row-wise softmax, shifted by the row maximum.
Tensor softmax_rows(const Tensor& logits);
/// Chains a gradient w.r.t. softmax probabilities back to the logits.
Tensor softmax_backward(const Tensor& probs, const Tensor& dprobs);

Tensor relu(const Tensor& x);

/// Probabilities are clamped at this floor before taking logs.
inline constexpr double kProbFloor = 1e-12;

/// Mean over the batch of -log probs[i][labels[i]].
double cross_entropy(const Tensor& probs, std::span<const std::size_t> labels);
/// Gradient of cross_entropy w.r.t. probs.
Tensor cross_entropy_grad(const Tensor& probs, std::span<const std::size_t> labels);

/// Row-wise argmax; ties go to the lowest index.
std::vector<std::size_t> argmax_rows(const Tensor& scores);

}  // namespace rtn
