#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "rtn/config.hpp"
#include "rtn/data.hpp"
#include "rtn/network.hpp"
#include "rtn/train.hpp"

namespace rtn {

/// Mean/std of |f_T|, |delta_f| and |f_S| over target inputs. Throws
/// ConfigError for a network without a residual path.
LayerResponse layer_response_report(const Network& net, const Tensor& target_x);

double cosine_similarity(std::span<const double> a, std::span<const double> b);

struct SoftmaxHead {
  Tensor weight;  // [features x classes]
  Tensor bias;    // [classes]
};

struct HeadFitOptions {
  std::size_t iterations = 500;
  double learning_rate = 0.5;
  double l2 = 1e-3;
};

/// Multinomial logistic regression by full-batch gradient descent from zero
/// weights, with an L2 penalty on the weights. Deterministic.
SoftmaxHead fit_softmax_head(const Tensor& features, std::span<const std::size_t> labels, std::size_t num_classes,
                             const HeadFitOptions& opts = {});

struct ClassifierShiftReport {
  std::vector<double> cosine_per_class;  // source vs target head, per class column
  double frobenius_diff = 0.0;           // ||W_source - W_target||_F
  /// Same statistic between heads fitted on two halves of the source domain.
  double same_domain_baseline = 0.0;
  SoftmaxHead source_head;
  SoftmaxHead target_head;
};

/// Freezes the bottleneck features of a source-only network trained with
/// `cfg`, then fits one softmax head per domain using each domain's labels.
/// Needs target evaluation labels (ConfigError otherwise).
ClassifierShiftReport classifier_shift_report(const DomainDataset& ds, const TrainConfig& cfg,
                                              const HeadFitOptions& head_opts = {});

/// Null (severity 0) versus shifted comparison over several data seeds.
struct ShiftDiagnostic {
  std::vector<std::uint64_t> seeds;
  std::vector<double> null_divergence;
  std::vector<double> shifted_divergence;
  double null_median = 0.0;
  double shifted_median = 0.0;
  double ratio = 0.0;  // shifted_median / null_median
};

ShiftDiagnostic run_shift_diagnostic(const ShiftSpec& base, double high_severity, std::span<const std::uint64_t> seeds,
                                     const TrainConfig& cfg, const HeadFitOptions& head_opts = {});

double median(std::vector<double> values);

// ---- Gradient checking -----------------------------------------------------

struct GradcheckOptions {
  std::vector<Variant> variants = all_variants();
  NetworkShape shape{5, {6}, 4, 3, 1.0, 10.0};
  std::size_t batch = 4;
  double tolerance = 1e-5;
  /// Denominator floor of the relative error |a - n| / max(|a|, |n|, floor).
  double relative_floor = 1e-4;
  /// Test hook applied to the network right after the analytic backward pass.
  std::function<void(Network&)> corrupt_gradients;
};

struct GradcheckEntry {
  Variant variant;
  std::string parameter;
  double max_rel_err = 0.0;
  bool passed = true;
};

struct GradcheckResult {
  std::vector<GradcheckEntry> entries;
  double max_rel_err = 0.0;
  bool passed = true;
};

/// Compares analytic gradients of the full objective against central finite
/// differences (step 1e-5 * max(1, |theta|)) for every parameter of a random
/// tiny network and batch drawn from cfg.seed. The kernel bandwidth is
/// resolved once at the unperturbed point and held fixed.
GradcheckResult run_gradcheck(const TrainConfig& cfg, const GradcheckOptions& opts = {});

}  // namespace rtn
