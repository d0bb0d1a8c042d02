#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "rtn/losses.hpp"
#include "rtn/network.hpp"
#include "rtn/optimizer.hpp"

namespace rtn {

enum class Variant { source_only, mmd, multi_mmd, mmd_ent, mmd_ent_res };

const char* to_string(Variant v);
Variant parse_variant(const std::string& name);
/// Every variant, in ablation order.
const std::vector<Variant>& all_variants();
VariantFlags flags_for(Variant v);

/// Layers whose features enter the MMD penalty.
struct AdaptedLayers {
  bool fcb = true;
  bool fcc = true;
};

struct TrainConfig {
  double lambda = 0.3;  // MMD weight
  double gamma = 0.3;   // entropy weight
  Variant variant = Variant::mmd_ent_res;

  LrSchedule schedule;
  double momentum = 0.9;
  /// L2 penalty on weight matrices, applied by the optimizer.
  double weight_decay = 0.02;
  std::size_t total_steps = 2000;
  std::size_t batch_size = 64;
  std::size_t eval_interval = 50;

  /// input_dim and num_classes are overwritten from the dataset by train().
  NetworkShape network;

  KernelConfig kernel;
  MmdEstimator estimator = MmdEstimator::quadratic;
  AdaptedLayers adapted;
  /// Count-sketch width applied to fused features; 0 disables sketching.
  std::size_t sketch_dim = 0;

  std::uint64_t seed = 0;

  /// MMD / entropy weights after variant gating.
  double effective_lambda() const;
  double effective_gamma() const;
};

/// Throws ConfigError on out-of-range values.
void validate(const TrainConfig& cfg);

/// Plain-text "key = value" config. '#' starts a comment; blank lines are
/// ignored; unknown keys are errors. Keys not present keep the values already
/// in `base`.
TrainConfig parse_config(const std::string& text, TrainConfig base = {});
TrainConfig load_config(const std::filesystem::path& path, TrainConfig base = {});
/// Inverse of parse_config: every key, one per line.
std::string format_config(const TrainConfig& cfg);
/// Applies a single key/value pair (the same keys the file format accepts).
void set_config_value(TrainConfig& cfg, const std::string& key, const std::string& value);

}  // namespace rtn
