#include "rtn/train.hpp"

#include <chrono>
#include <cmath>
#include <future>
#include <iostream>

#include "rtn/error.hpp"
#include "rtn/objective.hpp"
#include "rtn/optimizer.hpp"

namespace rtn {

double accuracy(std::span<const std::size_t> predicted, std::span<const std::size_t> truth) {
  if (predicted.size() != truth.size() || truth.empty()) throw ShapeError("accuracy: size mismatch or empty input");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) hits += predicted[i] == truth[i];
  return static_cast<double>(hits) / static_cast<double>(truth.size());
}

std::vector<std::vector<std::size_t>> confusion_matrix(std::span<const std::size_t> predicted,
                                                       std::span<const std::size_t> truth, std::size_t num_classes) {
  if (predicted.size() != truth.size()) throw ShapeError("confusion_matrix: size mismatch");
  std::vector<std::vector<std::size_t>> m(num_classes, std::vector<std::size_t>(num_classes, 0));
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] >= num_classes || predicted[i] >= num_classes) throw IndexError("confusion_matrix: class out of range");
    ++m[truth[i]][predicted[i]];
  }
  return m;
}

double accuracy_from_confusion(const std::vector<std::vector<std::size_t>>& confusion) {
  std::size_t trace = 0, total = 0;
  for (std::size_t i = 0; i < confusion.size(); ++i) {
    for (std::size_t j = 0; j < confusion[i].size(); ++j) total += confusion[i][j];
    trace += confusion[i][i];
  }
  if (total == 0) throw InsufficientDataError("accuracy_from_confusion: empty matrix");
  return static_cast<double>(trace) / static_cast<double>(total);
}

LayerResponse head_response(const Network& net, const Tensor& x) {
  const HeadOutputs out = net.evaluate(x);
  auto abs_stats = [](const Tensor& t) {
    std::vector<double> a(t.size());
    for (std::size_t i = 0; i < t.size(); ++i) a[i] = std::abs(t[i]);
    return reduce_stats(a);
  };
  return {abs_stats(out.f_T), abs_stats(out.delta_f), abs_stats(out.f_S)};
}

namespace {

EvalPoint evaluate(const Network& net, const DomainDataset& ds, std::size_t step) {
  EvalPoint p;
  p.step = step;
  p.source_accuracy = accuracy(argmax_rows(net.evaluate(ds.source_x()).f_s), ds.source_y());
  if (ds.has_eval_labels()) p.target_accuracy = accuracy(net.predict(ds.target_x()), ds.target_eval_labels());
  return p;
}

}  // namespace

TrainResult train(const DomainDataset& ds, const TrainConfig& cfg_in) {
  const auto t0 = std::chrono::steady_clock::now();
  TrainConfig cfg = cfg_in;
  cfg.network.input_dim = ds.dim();
  cfg.network.num_classes = ds.num_classes();
  validate(cfg);

  Rng root(cfg.seed);
  Rng init_rng = root.fork(1);
  Rng batch_rng = root.fork(2);
  Rng sketch_rng = root.fork(3);

  Network net = Network::create(cfg.network, flags_for(cfg.variant), init_rng);
  SgdState sgd(cfg.schedule, cfg.momentum, cfg.total_steps, cfg.weight_decay);

  std::optional<CountSketch> sketch;
  if (cfg.sketch_dim > 0 && flags_for(cfg.variant).use_mmd && cfg.variant != Variant::multi_mmd) {
    std::size_t fused_dim = 1;
    if (cfg.adapted.fcb) fused_dim *= cfg.network.bottleneck_dim;
    if (cfg.adapted.fcc) fused_dim *= cfg.network.num_classes;
    sketch = CountSketch::random(fused_dim, cfg.sketch_dim, sketch_rng);
  }
  ObjectiveOptions opts;
  opts.sketch = sketch ? &*sketch : nullptr;

  MetricsReport report;
  report.config = cfg;
  report.dataset = ds.provenance();
  report.evals.push_back(evaluate(net, ds, 0));

  const TrainingView view = ds.training_view();
  std::optional<BatchStream> stream;
  if (cfg.total_steps > 0) stream.emplace(view, cfg.batch_size, batch_rng);
  bool warned_bandwidth = false;

  for (std::size_t step = 0; step < cfg.total_steps; ++step) {
    const DomainBatch batch = stream->next();
    const double lr = sgd.current_lr();
    ObjectiveTerms terms;
    try {
      terms = objective(net, {batch.source_x, batch.source_y, batch.target_x}, cfg, opts);
    } catch (const NumericalError& e) {
      throw NumericalError(std::string(e.what()) + " at step " + std::to_string(step));
    }
    if (terms.bandwidth_fell_back && !warned_bandwidth) {
      const std::string msg = "step " + std::to_string(step) +
                              ": median heuristic degenerate (all pairwise distances zero); using fixed bandwidth " +
                              std::to_string(cfg.kernel.bandwidth);
      std::cerr << "warning: " << msg << '\n';
      report.warnings.push_back(msg);
      warned_bandwidth = true;
    }
    report.steps.push_back({step, terms.total, terms.source_ce, terms.mmd, terms.entropy, lr});
    sgd.step(net);
    const std::size_t done = step + 1;
    if (done % cfg.eval_interval == 0 || done == cfg.total_steps) report.evals.push_back(evaluate(net, ds, done));
  }

  const EvalPoint& last = report.evals.back();
  report.final_source_accuracy = last.source_accuracy;
  report.final_target_accuracy = last.target_accuracy;
  report.layer_response = head_response(net, ds.target_x());
  if (ds.has_eval_labels()) {
    report.confusion = confusion_matrix(net.predict(ds.target_x()), ds.target_eval_labels(), ds.num_classes());
  }
  report.wall_clock_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return {std::move(net), std::move(report)};
}

const AblationRow& AblationResult::row(Variant v) const {
  for (const auto& r : rows)
    if (r.variant == v) return r;
  throw IndexError(std::string("ablation has no row for variant ") + to_string(v));
}

const AblationCell& AblationResult::cell(Variant v, std::uint64_t seed) const {
  for (const auto& c : cells)
    if (c.variant == v && c.seed == seed) return c;
  throw IndexError("ablation has no such cell");
}

AblationResult ablate(const DomainDataset& ds, const TrainConfig& base, std::span<const std::uint64_t> seeds,
                      std::span<const Variant> variants, std::size_t jobs) {
  if (seeds.empty()) throw ConfigError("ablate: at least one seed is required");
  if (variants.empty()) throw ConfigError("ablate: at least one variant is required");
  if (!ds.has_eval_labels()) throw ConfigError("ablate: dataset has no target evaluation labels");

  struct Job {
    Variant variant;
    std::uint64_t seed;
  };
  std::vector<Job> work;
  for (Variant v : variants)
    for (auto s : seeds) work.push_back({v, s});

  auto run = [&ds, &base](Job j) {
    TrainConfig cfg = base;
    cfg.variant = j.variant;
    cfg.seed = j.seed;
    TrainResult r = train(ds, cfg);
    return AblationCell{j.variant, j.seed, *r.report.final_target_accuracy, r.report.layer_response};
  };

  AblationResult result;
  result.seeds.assign(seeds.begin(), seeds.end());
  result.cells.resize(work.size());
  if (jobs <= 1) {
    for (std::size_t i = 0; i < work.size(); ++i) result.cells[i] = run(work[i]);
  } else {
    // Cells are written by index, so completion order does not matter.
    for (std::size_t start = 0; start < work.size(); start += jobs) {
      std::vector<std::future<AblationCell>> batch;
      const std::size_t end = std::min(work.size(), start + jobs);
      for (std::size_t i = start; i < end; ++i) batch.push_back(std::async(std::launch::async, run, work[i]));
      for (std::size_t i = start; i < end; ++i) result.cells[i] = batch[i - start].get();
    }
  }

  for (Variant v : variants) {
    AblationRow row{v, {}, 0.0, 0.0};
    for (const auto& c : result.cells)
      if (c.variant == v) row.accuracies.push_back(c.target_accuracy);
    const double n = static_cast<double>(row.accuracies.size());
    double sum = 0.0;
    for (double a : row.accuracies) sum += a;
    row.mean = sum / n;
    if (row.accuracies.size() > 1) {
      double ss = 0.0;
      for (double a : row.accuracies) ss += (a - row.mean) * (a - row.mean);
      row.std = std::sqrt(ss / (n - 1.0));
    }
    result.rows.push_back(std::move(row));
  }
  return result;
}

}  // namespace rtn
