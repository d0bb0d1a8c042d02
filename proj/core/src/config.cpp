#include "rtn/config.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "rtn/error.hpp"

namespace rtn {

const char* to_string(Variant v) {
  switch (v) {
    case Variant::source_only: return "source_only";
    case Variant::mmd: return "mmd";
    case Variant::multi_mmd: return "multi_mmd";
    case Variant::mmd_ent: return "mmd_ent";
    case Variant::mmd_ent_res: return "mmd_ent_res";
  }
  return "?";
}

Variant parse_variant(const std::string& name) {
  for (Variant v : all_variants()) {
    if (name == to_string(v)) return v;
  }
  throw ConfigError("unknown variant '" + name + "' (expected source_only, mmd, multi_mmd, mmd_ent or mmd_ent_res)");
}

const std::vector<Variant>& all_variants() {
  static const std::vector<Variant> v = {Variant::source_only, Variant::mmd, Variant::multi_mmd, Variant::mmd_ent,
                                         Variant::mmd_ent_res};
  return v;
}

VariantFlags flags_for(Variant v) {
  switch (v) {
    case Variant::source_only: return {false, false, false};
    case Variant::mmd: return {true, false, false};
    case Variant::multi_mmd: return {true, false, false};
    case Variant::mmd_ent: return {true, true, false};
    case Variant::mmd_ent_res: return {true, true, true};
  }
  return {};
}

double TrainConfig::effective_lambda() const { return flags_for(variant).use_mmd ? lambda : 0.0; }
double TrainConfig::effective_gamma() const { return flags_for(variant).use_entropy ? gamma : 0.0; }

void validate(const TrainConfig& c) {
  auto fail = [](const std::string& m) { throw ConfigError(m); };
  if (!(c.lambda >= 0.0) || !std::isfinite(c.lambda)) fail("lambda must be finite and >= 0");
  if (!(c.gamma >= 0.0) || !std::isfinite(c.gamma)) fail("gamma must be finite and >= 0");
  if (!(c.schedule.base_lr > 0.0)) fail("base_lr must be positive");
  if (!(c.schedule.alpha >= 0.0) || !(c.schedule.beta >= 0.0)) fail("alpha and beta must be >= 0");
  if (!(c.momentum >= 0.0 && c.momentum < 1.0)) fail("momentum must lie in [0, 1)");
  if (!(c.weight_decay >= 0.0) || !std::isfinite(c.weight_decay)) fail("weight_decay must be finite and >= 0");
  if (c.batch_size < 1) fail("batch_size must be positive");
  if (c.eval_interval < 1) fail("eval_interval must be positive");
  if (c.network.bottleneck_dim < 1) fail("bottleneck_dim must be positive");
  for (auto w : c.network.feature_widths)
    if (w < 1) fail("feature widths must be positive");
  if (!(c.network.feature_lr_multiplier > 0.0) || !(c.network.new_layer_lr_multiplier > 0.0)) {
    fail("learning-rate multipliers must be positive");
  }
  if (!(c.kernel.bandwidth > 0.0)) fail("bandwidth must be positive");
  if (!c.adapted.fcb && !c.adapted.fcc) fail("at least one adapted layer is required");
  if (c.estimator == MmdEstimator::linear && c.batch_size % 2 != 0) fail("linear MMD estimator needs an even batch_size");
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double to_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size() || v.empty()) {
    throw ConfigError("config key '" + key + "': '" + v + "' is not a number");
  }
  return out;
}

std::uint64_t to_uint(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size() || v.empty()) {
    throw ConfigError("config key '" + key + "': '" + v + "' is not a non-negative integer");
  }
  return out;
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError("config key '" + key + "': '" + v + "' is not a boolean");
}

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

void set_config_value(TrainConfig& c, const std::string& key, const std::string& value) {
  const std::string& v = value;
  if (key == "lambda") c.lambda = to_double(key, v);
  else if (key == "gamma") c.gamma = to_double(key, v);
  else if (key == "variant") c.variant = parse_variant(v);
  else if (key == "base_lr") c.schedule.base_lr = to_double(key, v);
  else if (key == "alpha") c.schedule.alpha = to_double(key, v);
  else if (key == "beta") c.schedule.beta = to_double(key, v);
  else if (key == "momentum") c.momentum = to_double(key, v);
  else if (key == "weight_decay") c.weight_decay = to_double(key, v);
  else if (key == "total_steps") c.total_steps = to_uint(key, v);
  else if (key == "batch_size") c.batch_size = to_uint(key, v);
  else if (key == "eval_interval") c.eval_interval = to_uint(key, v);
  else if (key == "feature_widths") {
    c.network.feature_widths.clear();
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) {
      item = trim(item);
      if (!item.empty()) c.network.feature_widths.push_back(to_uint(key, item));
    }
  } else if (key == "bottleneck_dim") c.network.bottleneck_dim = to_uint(key, v);
  else if (key == "feature_lr_multiplier") c.network.feature_lr_multiplier = to_double(key, v);
  else if (key == "new_layer_lr_multiplier") c.network.new_layer_lr_multiplier = to_double(key, v);
  else if (key == "bandwidth_policy") {
    if (v == "median_per_batch") c.kernel.policy = BandwidthPolicy::median_per_batch;
    else if (v == "fixed") c.kernel.policy = BandwidthPolicy::fixed;
    else throw ConfigError("bandwidth_policy must be median_per_batch or fixed");
  } else if (key == "bandwidth") c.kernel.bandwidth = to_double(key, v);
  else if (key == "estimator") {
    if (v == "quadratic") c.estimator = MmdEstimator::quadratic;
    else if (v == "linear") c.estimator = MmdEstimator::linear;
    else throw ConfigError("estimator must be quadratic or linear");
  } else if (key == "adapt_fcb") c.adapted.fcb = to_bool(key, v);
  else if (key == "adapt_fcc") c.adapted.fcc = to_bool(key, v);
  else if (key == "sketch_dim") c.sketch_dim = to_uint(key, v);
  else if (key == "seed") c.seed = to_uint(key, v);
  else throw ConfigError("unknown config key '" + key + "'");
}

TrainConfig parse_config(const std::string& text, TrainConfig base) {
  std::stringstream ss(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(ss, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(line_no) + ": expected 'key = value'");
    }
    try {
      set_config_value(base, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    } catch (const ConfigError& e) {
      throw ConfigError("config line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  validate(base);
  return base;
}

TrainConfig load_config(const std::filesystem::path& path, TrainConfig base) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open config " + path.string());
  std::stringstream ss;
  ss << is.rdbuf();
  return parse_config(ss.str(), std::move(base));
}

std::string format_config(const TrainConfig& c) {
  std::ostringstream os;
  os << "lambda = " << fmt_double(c.lambda) << '\n'
     << "gamma = " << fmt_double(c.gamma) << '\n'
     << "variant = " << to_string(c.variant) << '\n'
     << "base_lr = " << fmt_double(c.schedule.base_lr) << '\n'
     << "alpha = " << fmt_double(c.schedule.alpha) << '\n'
     << "beta = " << fmt_double(c.schedule.beta) << '\n'
     << "momentum = " << fmt_double(c.momentum) << '\n'
     << "weight_decay = " << fmt_double(c.weight_decay) << '\n'
     << "total_steps = " << c.total_steps << '\n'
     << "batch_size = " << c.batch_size << '\n'
     << "eval_interval = " << c.eval_interval << '\n'
     << "feature_widths = ";
  for (std::size_t i = 0; i < c.network.feature_widths.size(); ++i) {
    os << (i ? "," : "") << c.network.feature_widths[i];
  }
  os << '\n'
     << "bottleneck_dim = " << c.network.bottleneck_dim << '\n'
     << "feature_lr_multiplier = " << fmt_double(c.network.feature_lr_multiplier) << '\n'
     << "new_layer_lr_multiplier = " << fmt_double(c.network.new_layer_lr_multiplier) << '\n'
     << "bandwidth_policy = " << (c.kernel.policy == BandwidthPolicy::fixed ? "fixed" : "median_per_batch") << '\n'
     << "bandwidth = " << fmt_double(c.kernel.bandwidth) << '\n'
     << "estimator = " << (c.estimator == MmdEstimator::linear ? "linear" : "quadratic") << '\n'
     << "adapt_fcb = " << (c.adapted.fcb ? "true" : "false") << '\n'
     << "adapt_fcc = " << (c.adapted.fcc ? "true" : "false") << '\n'
     << "sketch_dim = " << c.sketch_dim << '\n'
     << "seed = " << c.seed << '\n';
  return os.str();
}

}  // namespace rtn
