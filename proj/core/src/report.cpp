#include "rtn/report.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "rtn/error.hpp"

namespace rtn {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

namespace {

constexpr int kReportVersion = 1;

std::string fmt(double v, const char* spec = "%.17g") {
  char buf[48];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

ojson config_json(const TrainConfig& c) {
  return {{"variant", to_string(c.variant)},
          {"lambda", c.lambda},
          {"gamma", c.gamma},
          {"base_lr", c.schedule.base_lr},
          {"alpha", c.schedule.alpha},
          {"beta", c.schedule.beta},
          {"momentum", c.momentum},
          {"weight_decay", c.weight_decay},
          {"total_steps", c.total_steps},
          {"batch_size", c.batch_size},
          {"eval_interval", c.eval_interval},
          {"input_dim", c.network.input_dim},
          {"feature_widths", c.network.feature_widths},
          {"bottleneck_dim", c.network.bottleneck_dim},
          {"num_classes", c.network.num_classes},
          {"feature_lr_multiplier", c.network.feature_lr_multiplier},
          {"new_layer_lr_multiplier", c.network.new_layer_lr_multiplier},
          {"bandwidth_policy", c.kernel.policy == BandwidthPolicy::fixed ? "fixed" : "median_per_batch"},
          {"bandwidth", c.kernel.bandwidth},
          {"estimator", c.estimator == MmdEstimator::linear ? "linear" : "quadratic"},
          {"adapt_fcb", c.adapted.fcb},
          {"adapt_fcc", c.adapted.fcc},
          {"sketch_dim", c.sketch_dim},
          {"seed", c.seed}};
}

ojson stats_json(const Stats& s) { return {{"mean", s.mean}, {"std", s.std}}; }

ojson response_json(const LayerResponse& r) {
  return {{"f_T", stats_json(r.f_T)}, {"delta_f", stats_json(r.delta_f)}, {"f_S", stats_json(r.f_S)}};
}

ojson optional_json(const std::optional<double>& v) { return v ? ojson(*v) : ojson(nullptr); }

}  // namespace

std::string report_json(const MetricsReport& r) {
  ojson j;
  j["kind"] = "train";
  j["version"] = kReportVersion;
  j["dataset"] = r.dataset;
  j["seed"] = r.config.seed;
  j["config"] = config_json(r.config);
  j["final_target_accuracy"] = optional_json(r.final_target_accuracy);
  j["final_source_accuracy"] = r.final_source_accuracy;
  j["layer_response"] = response_json(r.layer_response);
  j["confusion"] = r.confusion;
  auto& evals = j["evals"] = ojson::array();
  for (const auto& e : r.evals) {
    evals.push_back({{"step", e.step},
                     {"target_accuracy", optional_json(e.target_accuracy)},
                     {"source_accuracy", e.source_accuracy}});
  }
  auto& steps = j["steps"] = ojson::array();
  for (const auto& s : r.steps) {
    steps.push_back({{"step", s.step},
                     {"total", s.total},
                     {"source_ce", s.source_ce},
                     {"mmd", s.mmd},
                     {"entropy", s.entropy},
                     {"learning_rate", s.learning_rate}});
  }
  j["warnings"] = r.warnings;
  return j.dump(1) + "\n";
}

std::string ablation_json(const AblationResult& result, const TrainConfig& base) {
  ojson j;
  j["kind"] = "ablation";
  j["version"] = kReportVersion;
  j["config"] = config_json(base);
  j["seeds"] = result.seeds;
  auto& rows = j["rows"] = ojson::array();
  for (const auto& r : result.rows) {
    rows.push_back({{"variant", to_string(r.variant)}, {"accuracies", r.accuracies}, {"mean", r.mean}, {"std", r.std}});
  }
  auto& cells = j["cells"] = ojson::array();
  for (const auto& c : result.cells) {
    cells.push_back({{"variant", to_string(c.variant)},
                     {"seed", c.seed},
                     {"target_accuracy", c.target_accuracy},
                     {"layer_response", response_json(c.response)}});
  }
  return j.dump(1) + "\n";
}

std::string gradcheck_json(const GradcheckResult& result) {
  ojson j;
  j["kind"] = "gradcheck";
  j["passed"] = result.passed;
  j["max_rel_err"] = result.max_rel_err;
  auto& entries = j["entries"] = ojson::array();
  for (const auto& e : result.entries) {
    entries.push_back({{"variant", to_string(e.variant)},
                       {"parameter", e.parameter},
                       {"max_rel_err", e.max_rel_err},
                       {"passed", e.passed}});
  }
  return j.dump(1) + "\n";
}

std::string curves_csv(const MetricsReport& r) {
  std::ostringstream os;
  os << "step,source_ce,mmd,entropy,target_acc\n";
  std::size_t e = 0;
  auto eval_at = [&](std::size_t step) -> std::string {
    while (e < r.evals.size() && r.evals[e].step < step) ++e;
    if (e < r.evals.size() && r.evals[e].step == step && r.evals[e].target_accuracy) {
      return fmt(*r.evals[e].target_accuracy);
    }
    return "";
  };
  // Row for step k holds the losses of update k and the accuracy before it.
  for (const auto& s : r.steps) {
    os << s.step << ',' << fmt(s.source_ce) << ',' << fmt(s.mmd) << ',' << fmt(s.entropy) << ',' << eval_at(s.step)
       << '\n';
  }
  if (!r.evals.empty() && (r.steps.empty() || r.evals.back().step > r.steps.back().step)) {
    os << r.evals.back().step << ",,,," << eval_at(r.evals.back().step) << '\n';
  }
  return os.str();
}

std::string predictions_csv(const Network& net, const Tensor& target_x) {
  const HeadOutputs out = net.evaluate(target_x);
  const auto pred = argmax_rows(out.f_t);
  std::ostringstream os;
  os << "index,predicted,emb0,emb1\n";
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double e0 = out.fcb_feats(i, 0);
    const double e1 = out.fcb_feats.cols() > 1 ? out.fcb_feats(i, 1) : 0.0;
    os << i << ',' << pred[i] << ',' << fmt(e0) << ',' << fmt(e1) << '\n';
  }
  return os.str();
}

void write_text_file(const fs::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  os << text;
  if (!os) throw IoError("failed writing " + path.string());
}

std::string read_text_file(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

namespace {

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
}

}  // namespace

void write_train_outputs(const fs::path& dir, const TrainResult& result, const DomainDataset& ds) {
  ensure_dir(dir);
  write_text_file(dir / "report.json", report_json(result.report));
  write_text_file(dir / "curves.csv", curves_csv(result.report));
  write_text_file(dir / "predictions.csv", predictions_csv(result.net, ds.target_x()));
  save_checkpoint(result.net, dir / "model.json");
  ojson t = {{"wall_clock_seconds", result.report.wall_clock_seconds}};
  write_text_file(dir / "timing.json", t.dump(1) + "\n");
}

void write_ablation_outputs(const fs::path& dir, const AblationResult& result, const TrainConfig& base) {
  ensure_dir(dir);
  std::ostringstream os;
  os << "variant,seed,accuracy\n";
  for (const auto& c : result.cells) os << to_string(c.variant) << ',' << c.seed << ',' << fmt(c.target_accuracy) << '\n';
  write_text_file(dir / "ablation.csv", os.str());
  write_text_file(dir / "ablation.json", ablation_json(result, base));
}

std::string render_ablation_markdown(const AblationResult& result) {
  std::ostringstream os;
  os << "| variant |";
  for (auto s : result.seeds) os << " seed " << s << " |";
  os << " mean | std |\n|---|";
  for (std::size_t i = 0; i < result.seeds.size(); ++i) os << "---|";
  os << "---|---|\n";
  for (const auto& r : result.rows) {
    os << "| " << to_string(r.variant) << " |";
    for (double a : r.accuracies) os << ' ' << fmt(100.0 * a, "%.1f") << " |";
    os << ' ' << fmt(100.0 * r.mean, "%.1f") << " | " << fmt(100.0 * r.std, "%.1f") << " |\n";
  }
  return os.str();
}

std::string render_report_markdown(const std::string& json_text) {
  ojson j;
  try {
    j = ojson::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("report is not valid JSON: ") + e.what());
  }
  std::ostringstream os;
  try {
    const std::string kind = j.at("kind").get<std::string>();
    auto pct = [](const ojson& v) { return v.is_null() ? std::string("n/a") : fmt(100.0 * v.get<double>(), "%.1f"); };
    if (kind == "ablation") {
      os << "# Ablation\n\n| variant | mean | std | per seed |\n|---|---|---|---|\n";
      for (const auto& r : j.at("rows")) {
        os << "| " << r.at("variant").get<std::string>() << " | " << pct(r.at("mean")) << " | " << pct(r.at("std"))
           << " |";
        for (const auto& a : r.at("accuracies")) os << ' ' << pct(a);
        os << " |\n";
      }
      return os.str();
    }
    if (kind != "train") throw ParseError("unknown report kind '" + kind + "'");
    const auto& cfg = j.at("config");
    os << "# Training report\n\n"
       << "- variant: " << cfg.at("variant").get<std::string>() << "\n"
       << "- seed: " << j.at("seed").get<std::uint64_t>() << "\n"
       << "- dataset: " << j.at("dataset").get<std::string>() << "\n"
       << "- final target accuracy: " << pct(j.at("final_target_accuracy")) << "%\n"
       << "- final source accuracy: " << pct(j.at("final_source_accuracy")) << "%\n\n"
       << "| step | target acc | source acc |\n|---|---|---|\n";
    for (const auto& e : j.at("evals")) {
      os << "| " << e.at("step").get<std::size_t>() << " | " << pct(e.at("target_accuracy")) << " | "
         << pct(e.at("source_accuracy")) << " |\n";
    }
    os << "\n| head | mean abs | std abs |\n|---|---|---|\n";
    for (const char* head : {"f_T", "delta_f", "f_S"}) {
      const auto& s = j.at("layer_response").at(head);
      os << "| " << head << " | " << fmt(s.at("mean").get<double>(), "%.4f") << " | "
         << fmt(s.at("std").get<double>(), "%.4f") << " |\n";
    }
    const auto& conf = j.at("confusion");
    if (!conf.empty()) {
      os << "\nConfusion (rows: true class, columns: predicted)\n\n|   |";
      for (std::size_t k = 0; k < conf.size(); ++k) os << ' ' << k << " |";
      os << "\n|---|";
      for (std::size_t k = 0; k < conf.size(); ++k) os << "---|";
      os << '\n';
      for (std::size_t r = 0; r < conf.size(); ++r) {
        os << "| " << r << " |";
        for (const auto& v : conf[r]) os << ' ' << v.get<std::size_t>() << " |";
        os << '\n';
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("report is missing fields: ") + e.what());
  }
  return os.str();
}

}  // namespace rtn
