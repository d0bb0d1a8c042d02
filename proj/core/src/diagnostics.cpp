#include "rtn/diagnostics.hpp"

#include <algorithm>
#include <cmath>

#include "rtn/error.hpp"
#include "rtn/objective.hpp"

namespace rtn {

LayerResponse layer_response_report(const Network& net, const Tensor& target_x) {
  if (!net.variant().use_residual) throw ConfigError("layer response report needs a network with the residual path");
  return head_response(net, target_x);
}

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ShapeError("cosine_similarity: length mismatch");
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) throw DegenerateDataError("cosine_similarity: zero vector");
  return dot / std::sqrt(na * nb);
}

SoftmaxHead fit_softmax_head(const Tensor& features, std::span<const std::size_t> labels, std::size_t num_classes,
                             const HeadFitOptions& opts) {
  const std::size_t n = features.rows(), d = features.cols();
  if (labels.size() != n) throw ShapeError("fit_softmax_head: label count mismatch");
  Layer head = Layer::linear("head", d, num_classes);
  for (std::size_t it = 0; it < opts.iterations; ++it) {
    const Tensor logits = head.forward(features);
    const Tensor probs = softmax_rows(logits);
    Tensor dlogits = probs;
    for (std::size_t i = 0; i < n; ++i) dlogits(i, labels[i]) -= 1.0;
    for (double& v : dlogits.data()) v /= static_cast<double>(n);
    head.zero_grad();
    head.backward(features, logits, dlogits);
    for (std::size_t k = 0; k < head.weight.size(); ++k) {
      head.weight[k] -= opts.learning_rate * (head.grad_weight[k] + opts.l2 * head.weight[k]);
    }
    for (std::size_t k = 0; k < head.bias.size(); ++k) head.bias[k] -= opts.learning_rate * head.grad_bias[k];
  }
  return {std::move(head.weight), std::move(head.bias)};
}

namespace {

double frobenius_diff(const Tensor& a, const Tensor& b) { return std::sqrt(sq_dist(a, b)); }

std::vector<double> column(const Tensor& w, std::size_t j) {
  std::vector<double> c(w.rows());
  for (std::size_t i = 0; i < w.rows(); ++i) c[i] = w(i, j);
  return c;
}

}  // namespace

ClassifierShiftReport classifier_shift_report(const DomainDataset& ds, const TrainConfig& cfg,
                                              const HeadFitOptions& head_opts) {
  if (!ds.has_eval_labels()) throw ConfigError("classifier shift report needs target evaluation labels");
  TrainConfig src_cfg = cfg;
  src_cfg.variant = Variant::source_only;
  const TrainResult base = train(ds, src_cfg);

  const Tensor fs = base.net.evaluate(ds.source_x()).fcb_feats;
  const Tensor ft = base.net.evaluate(ds.target_x()).fcb_feats;
  const std::size_t c = ds.num_classes();

  ClassifierShiftReport r;
  r.source_head = fit_softmax_head(fs, ds.source_y(), c, head_opts);
  r.target_head = fit_softmax_head(ft, ds.target_eval_labels(), c, head_opts);
  r.frobenius_diff = frobenius_diff(r.source_head.weight, r.target_head.weight);
  for (std::size_t j = 0; j < c; ++j) {
    r.cosine_per_class.push_back(cosine_similarity(column(r.source_head.weight, j), column(r.target_head.weight, j)));
  }

  // Split the source domain in two at a seeded permutation.
  Rng rng = Rng(cfg.seed).fork(7);
  const auto perm = rng.permutation(ds.source_size());
  const std::size_t half = ds.source_size() / 2;
  std::vector<std::size_t> ia(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(half));
  std::vector<std::size_t> ib(perm.begin() + static_cast<std::ptrdiff_t>(half), perm.end());
  auto labels_of = [&ds](const std::vector<std::size_t>& idx) {
    std::vector<std::size_t> y;
    for (auto i : idx) y.push_back(ds.source_y()[i]);
    return y;
  };
  const SoftmaxHead ha = fit_softmax_head(fs.gather_rows(ia), labels_of(ia), c, head_opts);
  const SoftmaxHead hb = fit_softmax_head(fs.gather_rows(ib), labels_of(ib), c, head_opts);
  r.same_domain_baseline = frobenius_diff(ha.weight, hb.weight);
  return r;
}

double median(std::vector<double> v) {
  if (v.empty()) throw InsufficientDataError("median of an empty list");
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

ShiftDiagnostic run_shift_diagnostic(const ShiftSpec& base, double high_severity, std::span<const std::uint64_t> seeds,
                                     const TrainConfig& cfg, const HeadFitOptions& head_opts) {
  if (seeds.empty()) throw ConfigError("shift diagnostic needs at least one seed");
  ShiftDiagnostic d;
  d.seeds.assign(seeds.begin(), seeds.end());
  for (auto seed : seeds) {
    ShiftSpec spec = base;
    spec.family = ShiftFamily::conditional_boundary;
    spec.seed = seed;
    TrainConfig run_cfg = cfg;
    run_cfg.seed = seed;
    spec.severity = 0.0;
    d.null_divergence.push_back(classifier_shift_report(gen_conditional_shift(spec), run_cfg, head_opts).frobenius_diff);
    spec.severity = high_severity;
    d.shifted_divergence.push_back(
        classifier_shift_report(gen_conditional_shift(spec), run_cfg, head_opts).frobenius_diff);
  }
  d.null_median = median(d.null_divergence);
  d.shifted_median = median(d.shifted_divergence);
  d.ratio = d.null_median > 0.0 ? d.shifted_median / d.null_median : INFINITY;
  return d;
}

GradcheckResult run_gradcheck(const TrainConfig& cfg, const GradcheckOptions& opts) {
  GradcheckResult result;
  for (Variant v : opts.variants) {
    Rng rng = Rng(cfg.seed).fork(100 + static_cast<std::uint64_t>(v));
    TrainConfig vcfg = cfg;
    vcfg.variant = v;
    vcfg.batch_size = opts.batch;
    vcfg.network = opts.shape;

    Network net = Network::create(opts.shape, flags_for(v), rng);
    // Give the residual block non-zero weights so every path carries gradient.
    net.res2().init_uniform(rng);
    for (auto& l : net.feature_layers())
      if (l.has_params())
        for (double& b : l.bias.data()) b = rng.uniform(-0.1, 0.1);
    for (Layer* l : {&net.fcb(), &net.fcc(), &net.res1(), &net.res2()})
      for (double& b : l->bias.data()) b = rng.uniform(-0.1, 0.1);

    Tensor xs({opts.batch, opts.shape.input_dim}), xt({opts.batch, opts.shape.input_dim});
    for (double& x : xs.data()) x = rng.normal();
    for (double& x : xt.data()) x = rng.normal(0.5, 1.0);
    std::vector<std::size_t> ys(opts.batch);
    for (auto& y : ys) y = rng.uniform_index(opts.shape.num_classes);
    const BatchView batch{xs, ys, xt};

    ObjectiveOptions probe;
    probe.compute_gradients = false;
    const ObjectiveTerms base_terms = objective(net, batch, vcfg, probe);

    ObjectiveOptions eval_opts;
    eval_opts.compute_gradients = false;
    eval_opts.bandwidths = base_terms.bandwidths;
    ObjectiveOptions grad_opts;
    grad_opts.bandwidths = base_terms.bandwidths;
    objective(net, batch, vcfg, grad_opts);
    if (opts.corrupt_gradients) opts.corrupt_gradients(net);

    for (const ParameterRef& p : net.parameters()) {
      GradcheckEntry e{v, p.name, 0.0, true};
      for (std::size_t i = 0; i < p.value->size(); ++i) {
        const double theta = (*p.value)[i];
        const double h = 1e-5 * std::max(1.0, std::abs(theta));
        (*p.value)[i] = theta + h;
        const double up = objective(net, batch, vcfg, eval_opts).total;
        (*p.value)[i] = theta - h;
        const double down = objective(net, batch, vcfg, eval_opts).total;
        (*p.value)[i] = theta;
        const double numeric = (up - down) / (2.0 * h);
        const double analytic = (*p.grad)[i];
        const double denom = std::max({std::abs(analytic), std::abs(numeric), opts.relative_floor});
        e.max_rel_err = std::max(e.max_rel_err, std::abs(analytic - numeric) / denom);
      }
      e.passed = e.max_rel_err <= opts.tolerance;
      result.passed = result.passed && e.passed;
      result.max_rel_err = std::max(result.max_rel_err, e.max_rel_err);
      result.entries.push_back(std::move(e));
    }
  }
  return result;
}

}  // namespace rtn
