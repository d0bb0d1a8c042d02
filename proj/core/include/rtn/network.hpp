#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "rtn/layers.hpp"
#include "rtn/rng.hpp"
#include "rtn/tensor.hpp"

namespace rtn {

/// Which adaptation mechanisms a network/objective uses.
struct VariantFlags {
  bool use_mmd = true;
  bool use_entropy = true;
  bool use_residual = true;

  friend bool operator==(const VariantFlags&, const VariantFlags&) = default;
};

struct NetworkShape {
  std::size_t input_dim = 10;
  /// Widths of the shared feature stack; each is a linear layer plus ReLU.
  std::vector<std::size_t> feature_widths = {32};
  std::size_t bottleneck_dim = 16;
  std::size_t num_classes = 4;
  double feature_lr_multiplier = 1.0;
  double new_layer_lr_multiplier = 10.0;

  friend bool operator==(const NetworkShape&, const NetworkShape&) = default;
};

/// Everything the head produces for one batch. Logits are pre-softmax.
struct HeadOutputs {
  Tensor f_T;        // target classifier logits (fcc output)
  Tensor delta_f;    // residual perturbation
  Tensor f_S;        // source classifier logits, f_T + delta_f
  Tensor f_t;        // softmax(f_T)
  Tensor f_s;        // softmax(f_S)
  Tensor fcb_feats;  // bottleneck activations after ReLU
};

/// Gradients of a scalar objective w.r.t. HeadOutputs. Empty tensors mean
/// "no contribution".
struct HeadGradients {
  Tensor d_f_s;
  Tensor d_f_t;
  Tensor d_f_S;
  Tensor d_f_T;
  Tensor d_fcb_feats;
};

/// Mutable view of one parameter tensor and its gradient.
struct ParameterRef {
  std::string name;
  Tensor* value;
  Tensor* grad;
  double lr_multiplier;
};

/// Feature stack -> fcb (+ReLU) -> fcc = f_T, with the residual block
/// delta_f = res2(relu(res1(f_T))) and f_S = f_T + delta_f.
///
/// forward() caches the intermediates that backward() consumes; each
/// backward() needs a fresh forward(). evaluate() is a const pass that leaves
/// the caches alone, so a frozen network can be evaluated concurrently.
class Network {
 public:
  /// Random initialization: feature layers, fcb, fcc and res1 get uniform
  /// fan-in scaling; res2 starts at zero so delta_f = 0 initially.
  static Network create(const NetworkShape& shape, VariantFlags variant, Rng& rng);

  const NetworkShape& shape() const { return shape_; }
  VariantFlags variant() const { return variant_; }
  void set_variant(VariantFlags v) { variant_ = v; }

  HeadOutputs forward(const Tensor& x);
  HeadOutputs evaluate(const Tensor& x) const;

  /// Accumulates parameter gradients and returns d objective / d x.
  Tensor backward(const HeadGradients& upstream);

  /// Class indices from argmax over f_t.
  std::vector<std::size_t> predict(const Tensor& x) const;

  std::vector<ParameterRef> parameters();
  void zero_grad();
  bool grads_ready() const { return grads_ready_; }
  /// Called by the optimizer once gradients have been applied.
  void consume_grads();

  std::vector<Layer>& feature_layers() { return features_; }
  const std::vector<Layer>& feature_layers() const { return features_; }
  Layer& fcb() { return fcb_; }
  Layer& fcc() { return fcc_; }
  Layer& res1() { return res1_; }
  Layer& res2() { return res2_; }
  const Layer& fcb() const { return fcb_; }
  const Layer& fcc() const { return fcc_; }
  const Layer& res1() const { return res1_; }
  const Layer& res2() const { return res2_; }

  /// Linear layers in a fixed order: features, fcb, fcc, res1, res2.
  std::vector<const Layer*> linear_layers() const;

  friend bool operator==(const Network& a, const Network& b);

 private:
  struct Cache {
    std::vector<Tensor> feature_inputs;  // input of each feature layer
    Tensor feature_out;
    Tensor fcb_pre;
    HeadOutputs head;
    Tensor res_hidden_pre;
    Tensor res_hidden;
  };

  HeadOutputs run(const Tensor& x, Cache* cache) const;

  NetworkShape shape_;
  VariantFlags variant_;
  std::vector<Layer> features_;
  Layer fcb_;
  Layer fcb_relu_;
  Layer fcc_;
  Layer res1_;
  Layer res_relu_;
  Layer res2_;
  std::optional<Cache> cache_;
  bool grads_ready_ = false;
};

/// Writes a self-describing JSON checkpoint. Doubles round-trip bit-exactly.
void save_checkpoint(const Network& net, const std::filesystem::path& path);
Network load_checkpoint(const std::filesystem::path& path);

}  // namespace rtn
