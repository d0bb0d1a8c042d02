#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "rtn/config.hpp"
#include "rtn/losses.hpp"
#include "rtn/network.hpp"
#include "rtn/tensor.hpp"

namespace rtn {

/// Source rows with labels plus target rows, equal in count.
struct BatchView {
  const Tensor& source_x;
  std::span<const std::size_t> source_y;
  const Tensor& target_x;
};

struct ObjectiveOptions {
  /// Overrides the kernel policy: entry k is the bandwidth of the k-th MMD
  /// term (see ObjectiveTerms::bandwidths). The gradient checker pins
  /// bandwidths this way, since the analytic gradient treats them as constants.
  std::vector<double> bandwidths;
  /// Projects fused features before the MMD when set.
  const CountSketch* sketch = nullptr;
  /// false: forward only, gradients untouched.
  bool compute_gradients = true;
};

struct ObjectiveTerms {
  double total = 0.0;
  double source_ce = 0.0;
  double mmd = 0.0;      // unweighted MMD^2 (sum of per-layer terms for multi_mmd)
  double entropy = 0.0;  // unweighted mean target entropy
  /// Bandwidth per MMD term: one for fused MMD, one per layer for multi_mmd.
  std::vector<double> bandwidths;
  bool bandwidth_fell_back = false;
};

/// Source cross-entropy on f_s + gamma * target entropy of f_t + lambda *
/// MMD^2 between fused (fcb (x) fcc) source and target features. Terms are
/// gated by cfg.variant; a multi_mmd variant dispatches to
/// objective_multi_mmd. With compute_gradients, the network's gradients are
/// zeroed and repopulated.
ObjectiveTerms objective(Network& net, const BatchView& batch, const TrainConfig& cfg,
                         const ObjectiveOptions& opts = {});

/// Baseline: replaces the fused MMD with one MMD^2 per adapted layer, each
/// with its own bandwidth, summed and weighted by lambda.
ObjectiveTerms objective_multi_mmd(Network& net, const BatchView& batch, const TrainConfig& cfg,
                                   const ObjectiveOptions& opts = {});

}  // namespace rtn
