#include "rtn/objective.hpp"

#include <cmath>

#include "rtn/error.hpp"

namespace rtn {

namespace {

void check_batch(const BatchView& b) {
  if (b.source_x.rows() != b.target_x.rows()) {
    throw ShapeError("objective: source and target batches differ in size (" + std::to_string(b.source_x.rows()) +
                     " vs " + std::to_string(b.target_x.rows()) + ")");
  }
  if (b.source_y.size() != b.source_x.rows()) throw ShapeError("objective: source label count mismatch");
}

void check_finite(double v, const char* term) {
  if (!std::isfinite(v)) throw NumericalError(std::string("non-finite ") + term + " term");
}

/// Writes `rows` into `dst` starting at row `offset`, scaled.
void scatter_rows(Tensor& dst, std::size_t offset, const Tensor& rows, double scale) {
  for (std::size_t i = 0; i < rows.rows(); ++i) {
    auto in = rows.row(i);
    auto out = dst.row(offset + i);
    for (std::size_t j = 0; j < in.size(); ++j) out[j] += scale * in[j];
  }
}

std::vector<Tensor> adapted_features(const HeadOutputs& out, const AdaptedLayers& adapted) {
  std::vector<Tensor> layers;
  if (adapted.fcb) layers.push_back(out.fcb_feats);
  if (adapted.fcc) layers.push_back(out.f_T);
  return layers;
}

struct Shared {
  HeadOutputs out;
  std::size_t n = 0;
  HeadGradients grads;
  ObjectiveTerms terms;
};

/// Forward pass plus the cross-entropy and entropy terms common to both
/// objectives.
Shared forward_common(Network& net, const BatchView& batch, const TrainConfig& cfg, const ObjectiveOptions& opts) {
  check_batch(batch);
  Shared s;
  s.n = batch.source_x.rows();
  const Tensor x = concat_rows(batch.source_x, batch.target_x);
  s.out = opts.compute_gradients ? net.forward(x) : net.evaluate(x);

  const Tensor fs_src = s.out.f_s.slice_rows(0, s.n);
  s.terms.source_ce = cross_entropy(fs_src, batch.source_y);
  check_finite(s.terms.source_ce, "source cross-entropy");
  s.terms.total = s.terms.source_ce;

  // The entropy value is always reported; it only enters the loss when enabled.
  const Tensor ft_tgt = s.out.f_t.slice_rows(s.n, 2 * s.n);
  s.terms.entropy = entropy_penalty(ft_tgt);
  check_finite(s.terms.entropy, "entropy");
  if (flags_for(cfg.variant).use_entropy) {
    const double gamma = cfg.effective_gamma();
    s.terms.total += gamma * s.terms.entropy;
    if (opts.compute_gradients) {
      s.grads.d_f_t = Tensor(s.out.f_t.shape());
      scatter_rows(s.grads.d_f_t, s.n, entropy_grad(ft_tgt), gamma);
    }
  }
  if (opts.compute_gradients) {
    s.grads.d_f_s = Tensor(s.out.f_s.shape());
    scatter_rows(s.grads.d_f_s, 0, cross_entropy_grad(fs_src, batch.source_y), 1.0);
  }
  return s;
}

double pick_bandwidth(const TrainConfig& cfg, const ObjectiveOptions& opts, const Tensor& zs, const Tensor& zt,
                      ObjectiveTerms& terms) {
  double b = 0.0;
  const std::size_t k = terms.bandwidths.size();
  if (!opts.bandwidths.empty()) {
    if (k >= opts.bandwidths.size()) throw ParameterError("objective: too few pinned bandwidths");
    b = opts.bandwidths[k];
  } else {
    const auto choice = resolve_bandwidth(cfg.kernel, zs, zt);
    terms.bandwidth_fell_back = terms.bandwidth_fell_back || choice.fell_back;
    b = choice.bandwidth;
  }
  terms.bandwidths.push_back(b);
  return b;
}

void finish(Network& net, Shared& s, const ObjectiveOptions& opts) {
  check_finite(s.terms.total, "total objective");
  if (!opts.compute_gradients) return;
  net.zero_grad();
  net.backward(s.grads);
}

}  // namespace

ObjectiveTerms objective(Network& net, const BatchView& batch, const TrainConfig& cfg, const ObjectiveOptions& opts) {
  if (cfg.variant == Variant::multi_mmd) return objective_multi_mmd(net, batch, cfg, opts);
  Shared s = forward_common(net, batch, cfg, opts);

  if (flags_for(cfg.variant).use_mmd) {
    const double lambda = cfg.effective_lambda();
    const auto layers = adapted_features(s.out, cfg.adapted);
    const Tensor fused = fuse(layers);
    const Tensor z = opts.sketch ? opts.sketch->apply(fused) : fused;
    const Tensor zs = z.slice_rows(0, s.n), zt = z.slice_rows(s.n, 2 * s.n);
    const double b = pick_bandwidth(cfg, opts, zs, zt, s.terms);
    s.terms.mmd = mmd2(zs, zt, b, cfg.estimator);
    check_finite(s.terms.mmd, "MMD");
    s.terms.total += lambda * s.terms.mmd;

    if (opts.compute_gradients) {
      const MmdGradient g = mmd2_grad(zs, zt, b, cfg.estimator);
      Tensor dz(z.shape());
      scatter_rows(dz, 0, g.d_zs, lambda);
      scatter_rows(dz, s.n, g.d_zt, lambda);
      const Tensor d_fused = opts.sketch ? opts.sketch->apply_transpose(dz) : dz;
      auto per_layer = fuse_backward(layers, d_fused);
      std::size_t k = 0;
      if (cfg.adapted.fcb) s.grads.d_fcb_feats = std::move(per_layer[k++]);
      if (cfg.adapted.fcc) s.grads.d_f_T = std::move(per_layer[k++]);
    }
  }
  finish(net, s, opts);
  return s.terms;
}

ObjectiveTerms objective_multi_mmd(Network& net, const BatchView& batch, const TrainConfig& cfg,
                                   const ObjectiveOptions& opts) {
  Shared s = forward_common(net, batch, cfg, opts);
  const double lambda = cfg.effective_lambda();

  auto add_layer = [&](const Tensor& feats, Tensor& grad_slot) {
    const Tensor zs = feats.slice_rows(0, s.n), zt = feats.slice_rows(s.n, 2 * s.n);
    const double b = pick_bandwidth(cfg, opts, zs, zt, s.terms);
    const double m = mmd2(zs, zt, b, cfg.estimator);
    check_finite(m, "MMD");
    s.terms.mmd += m;
    if (opts.compute_gradients) {
      const MmdGradient g = mmd2_grad(zs, zt, b, cfg.estimator);
      grad_slot = Tensor(feats.shape());
      scatter_rows(grad_slot, 0, g.d_zs, lambda);
      scatter_rows(grad_slot, s.n, g.d_zt, lambda);
    }
  };
  if (cfg.adapted.fcb) add_layer(s.out.fcb_feats, s.grads.d_fcb_feats);
  if (cfg.adapted.fcc) add_layer(s.out.f_T, s.grads.d_f_T);
  s.terms.total += lambda * s.terms.mmd;
  finish(net, s, opts);
  return s.terms;
}

}  // namespace rtn
