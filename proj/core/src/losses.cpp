#include "rtn/losses.hpp"

#include <algorithm>
#include <cmath>

#include "rtn/error.hpp"
#include "rtn/layers.hpp"

namespace rtn {

namespace {

Tensor fuse_pair(const Tensor& a, const Tensor& b) {
  const std::size_t n = a.rows(), m = a.cols(), k = b.cols();
  Tensor z({n, m * k});
  for (std::size_t r = 0; r < n; ++r) {
    auto ar = a.row(r);
    auto br = b.row(r);
    auto zr = z.row(r);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < k; ++j) zr[i * k + j] = ar[i] * br[j];
  }
  return z;
}

void check_nonempty_sets(const Tensor& zs, const Tensor& zt) {
  if (zs.empty() || zt.empty()) throw InsufficientDataError("mmd2: both sample sets must be non-empty");
  if (zs.rank() != 2 || zt.rank() != 2 || zs.cols() != zt.cols()) {
    throw ShapeError("mmd2: feature dimension mismatch " + shape_to_string(zs.shape()) + " vs " +
                     shape_to_string(zt.shape()));
  }
}

void check_bandwidth(double bandwidth) {
  if (!(bandwidth > 0.0)) throw ParameterError("kernel bandwidth must be positive, got " + std::to_string(bandwidth));
}

void check_linear_sizes(const Tensor& zs, const Tensor& zt) {
  if (zs.rows() != zt.rows() || zs.rows() % 2 != 0) {
    throw ShapeError("mmd2_linear: needs equal, even sample counts, got " + std::to_string(zs.rows()) + " and " +
                     std::to_string(zt.rows()));
  }
}

/// Adds scale * d k(a, b) / d a to `ga` and the matching term to `gb`.
void add_kernel_grad(std::span<const double> a, std::span<const double> b, double k, double scale,
                     double bandwidth, std::span<double> ga, std::span<double> gb) {
  const double coef = -2.0 * k * scale / bandwidth;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = coef * (a[i] - b[i]);
    ga[i] += d;
    gb[i] -= d;
  }
}

}  // namespace

Tensor fuse(std::span<const Tensor> per_layer) {
  if (per_layer.empty()) throw ShapeError("fuse: no layers given");
  const std::size_t n = per_layer[0].rows();
  for (const auto& t : per_layer) {
    if (t.rows() != n) {
      throw ShapeError("fuse: batch size mismatch " + shape_to_string(per_layer[0].shape()) + " vs " +
                       shape_to_string(t.shape()));
    }
  }
  Tensor z = per_layer[0];
  for (std::size_t l = 1; l < per_layer.size(); ++l) z = fuse_pair(z, per_layer[l]);
  return z;
}

std::vector<Tensor> fuse_backward(std::span<const Tensor> per_layer, const Tensor& d_fused) {
  if (per_layer.empty()) throw ShapeError("fuse_backward: no layers given");
  const std::size_t L = per_layer.size();
  // prefix[l] = fuse(per_layer[0..l]).
  std::vector<Tensor> prefix{per_layer[0]};
  for (std::size_t l = 1; l < L; ++l) prefix.push_back(fuse_pair(prefix.back(), per_layer[l]));
  if (d_fused.shape() != prefix.back().shape()) {
    throw ShapeError("fuse_backward: gradient shape " + shape_to_string(d_fused.shape()) + " vs fused " +
                     shape_to_string(prefix.back().shape()));
  }
  std::vector<Tensor> grads(L);
  Tensor d = d_fused;
  for (std::size_t l = L; l-- > 1;) {
    const Tensor& a = prefix[l - 1];
    const Tensor& b = per_layer[l];
    const std::size_t n = a.rows(), m = a.cols(), k = b.cols();
    Tensor da({n, m}), db({n, k});
    for (std::size_t r = 0; r < n; ++r) {
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < k; ++j) {
          const double g = d(r, i * k + j);
          da(r, i) += g * b(r, j);
          db(r, j) += g * a(r, i);
        }
    }
    grads[l] = std::move(db);
    d = std::move(da);
  }
  grads[0] = std::move(d);
  return grads;
}

double gaussian_kernel(std::span<const double> a, std::span<const double> b, double bandwidth) {
  check_bandwidth(bandwidth);
  return std::exp(-sq_dist(a, b) / bandwidth);
}

double median_heuristic(const Tensor& rows) {
  if (rows.empty() || rows.rows() < 2) throw InsufficientDataError("median_heuristic: need at least 2 rows");
  const std::size_t n = rows.rows();
  std::vector<double> d;
  d.reserve(n * (n - 1) / 2);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) d.push_back(sq_dist(rows.row(i), rows.row(j)));
  const std::size_t mid = d.size() / 2;
  std::nth_element(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(mid), d.end());
  double median = d[mid];
  if (d.size() % 2 == 0) {
    const double lower = *std::max_element(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(mid));
    median = 0.5 * (lower + median);
  }
  if (!(median > 0.0)) throw DegenerateDataError("median_heuristic: median pairwise squared distance is zero");
  return median;
}

BandwidthChoice resolve_bandwidth(const KernelConfig& cfg, const Tensor& zs, const Tensor& zt) {
  check_bandwidth(cfg.bandwidth);
  if (cfg.policy == BandwidthPolicy::fixed) return {cfg.bandwidth, false};
  try {
    return {median_heuristic(concat_rows(zs, zt)), false};
  } catch (const DegenerateDataError&) {
    return {cfg.bandwidth, true};
  }
}

double mmd2_quadratic(const Tensor& zs, const Tensor& zt, double bandwidth) {
  check_nonempty_sets(zs, zt);
  check_bandwidth(bandwidth);
  const std::size_t ns = zs.rows(), nt = zt.rows();
  // Diagonal kernels are exactly 1; off-diagonal pairs are counted twice.
  double ss = static_cast<double>(ns), tt = static_cast<double>(nt), st = 0.0;
  double ss_off = 0.0, tt_off = 0.0;
  for (std::size_t i = 0; i < ns; ++i)
    for (std::size_t j = i + 1; j < ns; ++j) ss_off += gaussian_kernel(zs.row(i), zs.row(j), bandwidth);
  for (std::size_t i = 0; i < nt; ++i)
    for (std::size_t j = i + 1; j < nt; ++j) tt_off += gaussian_kernel(zt.row(i), zt.row(j), bandwidth);
  for (std::size_t i = 0; i < ns; ++i)
    for (std::size_t j = 0; j < nt; ++j) st += gaussian_kernel(zs.row(i), zt.row(j), bandwidth);
  ss += 2.0 * ss_off;
  tt += 2.0 * tt_off;
  const double fs = static_cast<double>(ns), ft = static_cast<double>(nt);
  return ss / (fs * fs) + tt / (ft * ft) - 2.0 * st / (fs * ft);
}

double mmd2_linear(const Tensor& zs, const Tensor& zt, double bandwidth) {
  check_nonempty_sets(zs, zt);
  check_linear_sizes(zs, zt);
  check_bandwidth(bandwidth);
  const std::size_t quads = zs.rows() / 2;
  double sum = 0.0;
  for (std::size_t q = 0; q < quads; ++q) {
    auto s1 = zs.row(2 * q), s2 = zs.row(2 * q + 1);
    auto t1 = zt.row(2 * q), t2 = zt.row(2 * q + 1);
    sum += gaussian_kernel(s1, s2, bandwidth) + gaussian_kernel(t1, t2, bandwidth) -
           gaussian_kernel(s1, t2, bandwidth) - gaussian_kernel(s2, t1, bandwidth);
  }
  return sum / static_cast<double>(quads);
}

double mmd2(const Tensor& zs, const Tensor& zt, double bandwidth, MmdEstimator estimator) {
  return estimator == MmdEstimator::quadratic ? mmd2_quadratic(zs, zt, bandwidth) : mmd2_linear(zs, zt, bandwidth);
}

MmdGradient mmd2_grad(const Tensor& zs, const Tensor& zt, double bandwidth, MmdEstimator estimator) {
  check_nonempty_sets(zs, zt);
  check_bandwidth(bandwidth);
  MmdGradient g{Tensor(zs.shape()), Tensor(zt.shape())};
  if (estimator == MmdEstimator::quadratic) {
    const std::size_t ns = zs.rows(), nt = zt.rows();
    const double fs = static_cast<double>(ns), ft = static_cast<double>(nt);
    // Each unordered within-set pair appears twice in the double sum.
    const double w_ss = 2.0 / (fs * fs), w_tt = 2.0 / (ft * ft), w_st = -2.0 / (fs * ft);
    for (std::size_t i = 0; i < ns; ++i)
      for (std::size_t j = i + 1; j < ns; ++j) {
        const double k = gaussian_kernel(zs.row(i), zs.row(j), bandwidth);
        add_kernel_grad(zs.row(i), zs.row(j), k, w_ss, bandwidth, g.d_zs.row(i), g.d_zs.row(j));
      }
    for (std::size_t i = 0; i < nt; ++i)
      for (std::size_t j = i + 1; j < nt; ++j) {
        const double k = gaussian_kernel(zt.row(i), zt.row(j), bandwidth);
        add_kernel_grad(zt.row(i), zt.row(j), k, w_tt, bandwidth, g.d_zt.row(i), g.d_zt.row(j));
      }
    for (std::size_t i = 0; i < ns; ++i)
      for (std::size_t j = 0; j < nt; ++j) {
        const double k = gaussian_kernel(zs.row(i), zt.row(j), bandwidth);
        add_kernel_grad(zs.row(i), zt.row(j), k, w_st, bandwidth, g.d_zs.row(i), g.d_zt.row(j));
      }
    return g;
  }
  check_linear_sizes(zs, zt);
  const std::size_t quads = zs.rows() / 2;
  const double w = 1.0 / static_cast<double>(quads);
  for (std::size_t q = 0; q < quads; ++q) {
    const std::size_t a = 2 * q, b = 2 * q + 1;
    auto pair = [&](const Tensor& x, std::size_t i, Tensor& gx, const Tensor& y, std::size_t j, Tensor& gy,
                    double sign) {
      const double k = gaussian_kernel(x.row(i), y.row(j), bandwidth);
      add_kernel_grad(x.row(i), y.row(j), k, sign * w, bandwidth, gx.row(i), gy.row(j));
    };
    pair(zs, a, g.d_zs, zs, b, g.d_zs, 1.0);
    pair(zt, a, g.d_zt, zt, b, g.d_zt, 1.0);
    pair(zs, a, g.d_zs, zt, b, g.d_zt, -1.0);
    pair(zs, b, g.d_zs, zt, a, g.d_zt, -1.0);
  }
  return g;
}

namespace {

void check_simplex_rows(const Tensor& probs) {
  if (probs.rank() != 2) throw ShapeError("entropy_penalty: expected a matrix of probability rows");
  for (std::size_t i = 0; i < probs.rows(); ++i) {
    double s = 0.0;
    for (double p : probs.row(i)) {
      if (p < 0.0) throw ValidationError("entropy_penalty: negative probability in row " + std::to_string(i));
      s += p;
    }
    if (std::abs(s - 1.0) > 1e-6) {
      throw ValidationError("entropy_penalty: row " + std::to_string(i) + " sums to " + std::to_string(s));
    }
  }
}

}  // namespace

double entropy_penalty(const Tensor& probs) {
  check_simplex_rows(probs);
  double h = 0.0;
  for (double p : probs.data()) h -= p * std::log(std::max(p, kProbFloor));
  return h / static_cast<double>(probs.rows());
}

Tensor entropy_grad(const Tensor& probs) {
  check_simplex_rows(probs);
  Tensor g(probs.shape());
  const double n = static_cast<double>(probs.rows());
  for (std::size_t i = 0; i < probs.size(); ++i) {
    const double p = probs[i];
    g[i] = (p > kProbFloor ? -(std::log(p) + 1.0) : -std::log(kProbFloor)) / n;
  }
  return g;
}

CountSketch CountSketch::random(std::size_t input_dim, std::size_t output_dim, Rng& rng) {
  if (output_dim < 1) throw ParameterError("count sketch output dimension must be at least 1");
  CountSketch s;
  s.output_dim_ = output_dim;
  s.bucket_.resize(input_dim);
  s.sign_.resize(input_dim);
  for (std::size_t i = 0; i < input_dim; ++i) {
    s.bucket_[i] = rng.uniform_index(output_dim);
    s.sign_[i] = rng.sign();
  }
  return s;
}

CountSketch CountSketch::identity(std::size_t dim) {
  CountSketch s;
  s.output_dim_ = dim;
  s.bucket_.resize(dim);
  for (std::size_t i = 0; i < dim; ++i) s.bucket_[i] = i;
  s.sign_.assign(dim, 1.0);
  return s;
}

CountSketch CountSketch::composed(const CountSketch& a, const CountSketch& b) {
  if (a.output_dim_ != b.output_dim_) throw ParameterError("composed sketches need equal output dimensions");
  CountSketch s;
  s.output_dim_ = a.output_dim_;
  const std::size_t m = a.input_dim(), k = b.input_dim();
  s.bucket_.resize(m * k);
  s.sign_.resize(m * k);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < k; ++j) {
      s.bucket_[i * k + j] = (a.bucket_[i] + b.bucket_[j]) % s.output_dim_;
      s.sign_[i * k + j] = a.sign_[i] * b.sign_[j];
    }
  return s;
}

Tensor CountSketch::apply(const Tensor& rows) const {
  if (rows.cols() != input_dim()) {
    throw ShapeError("count sketch expects " + std::to_string(input_dim()) + " columns, got " +
                     shape_to_string(rows.shape()));
  }
  Tensor out({rows.rows(), output_dim_});
  for (std::size_t r = 0; r < rows.rows(); ++r) {
    auto in = rows.row(r);
    auto o = out.row(r);
    for (std::size_t i = 0; i < in.size(); ++i) o[bucket_[i]] += sign_[i] * in[i];
  }
  return out;
}

Tensor CountSketch::apply_transpose(const Tensor& d_rows) const {
  if (d_rows.cols() != output_dim_) throw ShapeError("count sketch adjoint: wrong gradient width");
  Tensor out({d_rows.rows(), input_dim()});
  for (std::size_t r = 0; r < d_rows.rows(); ++r) {
    auto g = d_rows.row(r);
    auto o = out.row(r);
    for (std::size_t i = 0; i < o.size(); ++i) o[i] = sign_[i] * g[bucket_[i]];
  }
  return out;
}

Tensor sketch_compress(const Tensor& fused, std::size_t target_dim, Rng& rng) {
  if (target_dim < 1) throw ParameterError("sketch_compress: target_dim must be at least 1");
  return CountSketch::random(fused.cols(), target_dim, rng).apply(fused);
}

Tensor tensor_sketch(const Tensor& a, const Tensor& b, const CountSketch& sa, const CountSketch& sb) {
  if (sa.output_dim() != sb.output_dim()) throw ParameterError("tensor_sketch: sketches need equal output dims");
  if (a.rows() != b.rows()) throw ShapeError("tensor_sketch: batch size mismatch");
  const std::size_t D = sa.output_dim();
  Tensor ca = sa.apply(a), cb = sb.apply(b);
  Tensor out({a.rows(), D});
  for (std::size_t r = 0; r < a.rows(); ++r) {
    auto x = ca.row(r), y = cb.row(r);
    auto o = out.row(r);
    for (std::size_t i = 0; i < D; ++i) {
      if (x[i] == 0.0) continue;
      for (std::size_t j = 0; j < D; ++j) o[(i + j) % D] += x[i] * y[j];
    }
  }
  return out;
}

}  // namespace rtn
