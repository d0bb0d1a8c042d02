#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rtn/rng.hpp"
#include "rtn/tensor.hpp"

namespace rtn {

/// Training-visible part of a dataset. It has no target labels, so nothing
/// that only receives a TrainingView can read them.
struct TrainingView {
  const Tensor& source_x;
  std::span<const std::size_t> source_y;
  const Tensor& target_x;
  std::size_t num_classes;

  std::size_t dim() const { return source_x.cols(); }
};

/// Labeled source domain plus unlabeled target domain. Target labels, when
/// present, are held for evaluation only and are reachable solely through
/// target_eval_labels().
class DomainDataset {
 public:
  DomainDataset(Tensor source_x, std::vector<std::size_t> source_y, Tensor target_x,
                std::optional<std::vector<std::size_t>> target_y_eval, std::size_t num_classes,
                std::string provenance);

  const Tensor& source_x() const { return source_x_; }
  const std::vector<std::size_t>& source_y() const { return source_y_; }
  const Tensor& target_x() const { return target_x_; }
  std::size_t num_classes() const { return num_classes_; }
  std::size_t dim() const { return source_x_.cols(); }
  std::size_t source_size() const { return source_x_.rows(); }
  std::size_t target_size() const { return target_x_.rows(); }
  const std::string& provenance() const { return provenance_; }

  bool has_eval_labels() const { return target_y_eval_.has_value(); }
  /// Throws ConfigError when the dataset was loaded without evaluation labels.
  const std::vector<std::size_t>& target_eval_labels() const;

  TrainingView training_view() const { return {source_x_, source_y_, target_x_, num_classes_}; }

  friend bool operator==(const DomainDataset&, const DomainDataset&) = default;

 private:
  Tensor source_x_;
  std::vector<std::size_t> source_y_;
  Tensor target_x_;
  std::optional<std::vector<std::size_t>> target_y_eval_;
  std::size_t num_classes_;
  std::string provenance_;
};

enum class ShiftFamily { covariate_rotation, conditional_boundary };

const char* to_string(ShiftFamily family);
ShiftFamily parse_shift_family(const std::string& name);

/// Synthetic two-domain generator settings.
///
/// Inputs live in R^dim. The first two coordinates carry the class structure:
/// num_classes Gaussian clusters with standard deviation `noise`, centred at
/// radius `cluster_radius` and angles 2 pi k / num_classes. The remaining
/// coordinates are N(0, noise^2) distractors.
struct ShiftSpec {
  ShiftFamily family = ShiftFamily::conditional_boundary;
  /// Rotation angle in radians (of the clusters for covariate_rotation, of
  /// the labeling rule for conditional_boundary).
  double severity = 0.0;
  std::size_t n_source = 800;
  std::size_t n_target = 800;
  double noise = 1.0;
  std::uint64_t seed = 0;
  std::size_t num_classes = 4;
  std::size_t dim = 10;
  double cluster_radius = 3.0;
};

void validate(const ShiftSpec& spec);

/// Cluster centres in R^dim, [num_classes x dim].
Tensor cluster_means(const ShiftSpec& spec);
/// Rotates the first two coordinates of every row by `angle` radians.
Tensor rotate_plane(const Tensor& x, double angle);

/// Source: clusters labeled by cluster index. Target: the same generator with
/// every sample rotated by `severity` in the informative plane.
DomainDataset gen_covariate_shift(const ShiftSpec& spec);

/// Angular-sector labeling rule: class k owns the sector of width
/// 2 pi / c centred on angle 2 pi k / c + rotation. For c = 2 this is a
/// linear rule through the origin.
std::size_t sector_label(std::span<const double> x, std::size_t num_classes, double rotation);

/// Both domains draw inputs from the same cluster mixture. Target labels
/// follow the cluster-aligned sector rule; source labels follow that rule
/// rotated by `severity`. Each domain is stratified to balanced classes.
DomainDataset gen_conditional_shift(const ShiftSpec& spec);

DomainDataset generate(const ShiftSpec& spec);

/// Default benchmark for the ablation: d = 10, c = 4, n = 800 per domain,
/// noise 0.8, rule rotated by pi / 6.
ShiftSpec default_conditional_benchmark(std::uint64_t seed = 0);

// ---- CSV ingestion / export ----------------------------------------------
//
// Comma-separated, '.' decimal point, one sample per line. Labeled files end
// each row with an integer class. An optional first line starting with '#'
// is a header and is skipped.

struct CsvTable {
  Tensor x;
  std::vector<std::size_t> labels;  // empty for unlabeled files
};

CsvTable read_features_csv(const std::filesystem::path& path, bool labeled);
void write_features_csv(const std::filesystem::path& path, const Tensor& x, std::span<const std::size_t> labels);

/// Loads source (labeled), target (unlabeled) and optional target evaluation
/// (labeled, row-aligned with target) files. An empty eval path disables
/// evaluation. `num_classes` of 0 infers c from the largest label.
DomainDataset load_features_csv(const std::filesystem::path& source_labeled,
                                const std::filesystem::path& target_unlabeled,
                                const std::filesystem::path& target_eval, std::size_t num_classes = 0);

/// Manifest: JSON {"source", "target", "target_eval", "num_classes", "dim"};
/// relative paths resolve against the manifest's directory.
struct DatasetManifest {
  std::filesystem::path source;
  std::filesystem::path target;
  std::filesystem::path target_eval;
  std::size_t num_classes = 0;
  std::size_t dim = 0;
};

DatasetManifest read_manifest(const std::filesystem::path& path);
void write_manifest(const std::filesystem::path& path, const DatasetManifest& manifest);
DomainDataset load_manifest(const std::filesystem::path& path);
/// Writes source.csv, target.csv, target_eval.csv and manifest.json into dir.
std::filesystem::path export_dataset(const DomainDataset& ds, const std::filesystem::path& dir);

// ---- Mini-batches ----------------------------------------------------------

struct DomainBatch {
  std::vector<std::size_t> source_indices;
  std::vector<std::size_t> target_indices;
  Tensor source_x;
  std::vector<std::size_t> source_y;
  Tensor target_x;
  std::size_t epoch = 0;
};

/// Endless stream of equal-size source/target batches. Each source epoch is
/// a fresh permutation cut into floor(n_s / batch) batches (the remainder is
/// dropped). Target indices come from an independent permutation that is
/// reshuffled whenever fewer than `batch` entries remain.
class BatchStream {
 public:
  BatchStream(TrainingView view, std::size_t batch_size, Rng rng);

  DomainBatch next();
  std::size_t batches_per_epoch() const { return source_order_.size() / batch_size_; }
  std::size_t batch_size() const { return batch_size_; }

 private:
  TrainingView view_;
  std::size_t batch_size_;
  Rng rng_;
  std::vector<std::size_t> source_order_;
  std::vector<std::size_t> target_order_;
  std::size_t source_pos_;
  std::size_t target_pos_;
  std::size_t epoch_ = 0;
};

}  // namespace rtn
