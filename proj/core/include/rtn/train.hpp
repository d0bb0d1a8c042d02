#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rtn/config.hpp"
#include "rtn/data.hpp"
#include "rtn/network.hpp"
#include "rtn/tensor.hpp"

namespace rtn {

struct EvalPoint {
  std::size_t step = 0;
  std::optional<double> target_accuracy;  // absent without evaluation labels
  double source_accuracy = 0.0;           // argmax of f_s on the source set
};

struct StepRecord {
  std::size_t step = 0;
  double total = 0.0;
  double source_ce = 0.0;
  double mmd = 0.0;
  double entropy = 0.0;
  double learning_rate = 0.0;  // eta_p before multipliers
};

/// Mean / std of absolute head activations.
struct LayerResponse {
  Stats f_T;
  Stats delta_f;
  Stats f_S;
};

struct MetricsReport {
  TrainConfig config;
  std::string dataset;
  std::vector<EvalPoint> evals;
  std::vector<StepRecord> steps;
  LayerResponse layer_response;  // on the target inputs
  /// confusion[true][predicted] on the target set; empty without eval labels.
  std::vector<std::vector<std::size_t>> confusion;
  std::optional<double> final_target_accuracy;
  double final_source_accuracy = 0.0;
  std::vector<std::string> warnings;
  /// Not serialized into report.json so that reports stay byte-reproducible.
  double wall_clock_seconds = 0.0;
};

struct TrainResult {
  Network net;
  MetricsReport report;
};

double accuracy(std::span<const std::size_t> predicted, std::span<const std::size_t> truth);
std::vector<std::vector<std::size_t>> confusion_matrix(std::span<const std::size_t> predicted,
                                                       std::span<const std::size_t> truth, std::size_t num_classes);
/// Trace over total.
double accuracy_from_confusion(const std::vector<std::vector<std::size_t>>& confusion);

/// Absolute-activation statistics of f_T, delta_f and f_S over x.
LayerResponse head_response(const Network& net, const Tensor& x);

/// Runs cfg.total_steps SGD steps of the variant's objective and evaluates
/// every cfg.eval_interval steps. Deterministic in (dataset, cfg). A
/// non-finite loss aborts with NumericalError naming the term and step.
TrainResult train(const DomainDataset& ds, const TrainConfig& cfg);

struct AblationCell {
  Variant variant;
  std::uint64_t seed;
  double target_accuracy;
  LayerResponse response;
};

struct AblationRow {
  Variant variant;
  std::vector<double> accuracies;  // one per seed, in seed order
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation; 0 for a single seed
};

struct AblationResult {
  std::vector<std::uint64_t> seeds;
  std::vector<AblationRow> rows;
  std::vector<AblationCell> cells;  // variant-major, seed-minor

  const AblationRow& row(Variant v) const;
  const AblationCell& cell(Variant v, std::uint64_t seed) const;
};

/// Trains every (variant, seed) pair on the same dataset. The seed drives
/// initialization and batch order. `jobs` > 1 runs pairs on worker threads;
/// results do not depend on it.
AblationResult ablate(const DomainDataset& ds, const TrainConfig& base, std::span<const std::uint64_t> seeds,
                      std::span<const Variant> variants, std::size_t jobs = 1);

}  // namespace rtn
