#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "rtn/rng.hpp"
#include "rtn/tensor.hpp"

namespace rtn {

// All feature matrices below are [samples x features], one sample per row.

/// Row-wise vectorized tensor product of per-layer features.
///
/// Row i of the result is vec(x1_i (x) x2_i (x) ...), flattened row-major,
/// so the last layer's index varies fastest. A single layer passes through
/// unchanged.
Tensor fuse(std::span<const Tensor> per_layer);
/// Splits a gradient w.r.t. fused rows back onto each participating layer.
std::vector<Tensor> fuse_backward(std::span<const Tensor> per_layer, const Tensor& d_fused);

/// exp(-||a - b||^2 / bandwidth).
double gaussian_kernel(std::span<const double> a, std::span<const double> b, double bandwidth);

/// Median over all distinct pairwise squared distances between rows. Throws
/// InsufficientDataError with fewer than two rows and DegenerateDataError when
/// the median is zero.
double median_heuristic(const Tensor& rows);

enum class BandwidthPolicy { median_per_batch, fixed };

struct KernelConfig {
  BandwidthPolicy policy = BandwidthPolicy::median_per_batch;
  /// Used directly under `fixed`, and as the fallback when the median
  /// heuristic degenerates.
  double bandwidth = 1.0;
};

struct BandwidthChoice {
  double bandwidth = 1.0;
  bool fell_back = false;  // median was degenerate; `bandwidth` is the fixed fallback
};

/// Applies the policy to the combined source + target rows.
BandwidthChoice resolve_bandwidth(const KernelConfig& cfg, const Tensor& zs, const Tensor& zt);

enum class MmdEstimator { quadratic, linear };

/// Biased quadratic-time estimate (V-statistic) of squared MMD.
double mmd2_quadratic(const Tensor& zs, const Tensor& zt, double bandwidth);
/// Linear-time estimate over consecutive quadruples. Needs equal, even sample
/// counts. Unbiased, so it may be negative.
double mmd2_linear(const Tensor& zs, const Tensor& zt, double bandwidth);
double mmd2(const Tensor& zs, const Tensor& zt, double bandwidth, MmdEstimator estimator);

struct MmdGradient {
  Tensor d_zs;
  Tensor d_zt;
};

/// Gradient of the chosen estimator w.r.t. every entry of zs and zt, with the
/// bandwidth held constant.
MmdGradient mmd2_grad(const Tensor& zs, const Tensor& zt, double bandwidth,
                      MmdEstimator estimator = MmdEstimator::quadratic);

/// Mean Shannon entropy of probability rows, clamping p at kProbFloor.
double entropy_penalty(const Tensor& probs);
/// Gradient of entropy_penalty w.r.t. the probabilities.
Tensor entropy_grad(const Tensor& probs);

/// Count sketch: input coordinate i goes to bucket[i] with sign[i].
/// Inner products are preserved in expectation over the random hashes.
class CountSketch {
 public:
  static CountSketch random(std::size_t input_dim, std::size_t output_dim, Rng& rng);
  /// bucket[i] = i, sign[i] = +1.
  static CountSketch identity(std::size_t dim);
  /// The sketch a tensor sketch of (a, b) applies to vec(a (x) b): bucket
  /// (ha(i) + hb(j)) mod out, sign sa(i) * sb(j).
  static CountSketch composed(const CountSketch& a, const CountSketch& b);

  std::size_t input_dim() const { return bucket_.size(); }
  std::size_t output_dim() const { return output_dim_; }

  Tensor apply(const Tensor& rows) const;
  /// Adjoint of apply(); maps gradients on the sketch back to the input.
  Tensor apply_transpose(const Tensor& d_rows) const;

 private:
  std::vector<std::size_t> bucket_;
  std::vector<double> sign_;
  std::size_t output_dim_ = 0;
};

/// Count-sketch projection of fused features to `target_dim` columns.
Tensor sketch_compress(const Tensor& fused, std::size_t target_dim, Rng& rng);

/// Tensor sketch of the row-wise product a (x) b, computed without forming
/// it: circular convolution of the two count sketches (which must share an
/// output dimension).
Tensor tensor_sketch(const Tensor& a, const Tensor& b, const CountSketch& sa, const CountSketch& sb);

}  // namespace rtn
