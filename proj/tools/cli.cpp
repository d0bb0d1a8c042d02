#include "cli.hpp"

#include <cstdio>
#include <filesystem>
#include <optional>
#include <ostream>

#include "CLI11.hpp"
#include "rtn/config.hpp"
#include "rtn/data.hpp"
#include "rtn/diagnostics.hpp"
#include "rtn/error.hpp"
#include "rtn/report.hpp"
#include "rtn/train.hpp"

namespace rtn::cli {

namespace fs = std::filesystem;

namespace {

struct CommonOptions {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir = ".";
  std::string variant;
  std::optional<double> lambda;
  std::optional<double> gamma;
  std::optional<std::size_t> steps;
  std::string data_manifest;
  std::uint64_t data_seed = 0;
};

void add_common(CLI::App* cmd, CommonOptions& o, bool with_variant = true) {
  cmd->add_option("--config", o.config_path, "key = value config file");
  cmd->add_option("--seed", o.seed, "run seed (initialization and batch order)");
  cmd->add_option("--out", o.out_dir, "output directory");
  if (with_variant) cmd->add_option("--variant", o.variant, "source_only|mmd|multi_mmd|mmd_ent|mmd_ent_res");
  cmd->add_option("--lambda", o.lambda, "MMD weight");
  cmd->add_option("--gamma", o.gamma, "entropy weight");
  cmd->add_option("--steps", o.steps, "total SGD steps");
  cmd->add_option("--data", o.data_manifest, "dataset manifest (default: built-in conditional-shift benchmark)");
  cmd->add_option("--data-seed", o.data_seed, "seed of the built-in benchmark dataset");
}

TrainConfig build_config(const CommonOptions& o) {
  TrainConfig cfg;
  if (!o.config_path.empty()) cfg = load_config(o.config_path);
  if (o.seed) cfg.seed = *o.seed;
  if (!o.variant.empty()) cfg.variant = parse_variant(o.variant);
  if (o.lambda) cfg.lambda = *o.lambda;
  if (o.gamma) cfg.gamma = *o.gamma;
  if (o.steps) cfg.total_steps = *o.steps;
  validate(cfg);
  return cfg;
}

DomainDataset build_dataset(const CommonOptions& o) {
  if (!o.data_manifest.empty()) return load_manifest(o.data_manifest);
  return gen_conditional_shift(default_conditional_benchmark(o.data_seed));
}

std::string pct(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f%%", 100.0 * v);
  return buf;
}

std::string num(double v, const char* spec = "%.6g") {
  char buf[32];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Unsupervised domain adaptation with a residual classifier head"};
  app.require_subcommand(1);

  // gen-data
  ShiftSpec spec = default_conditional_benchmark();
  std::string family = "conditional_boundary";
  std::string gen_out = "data";
  auto* gen = app.add_subcommand("gen-data", "write a synthetic shift dataset (CSV files + manifest.json)");
  gen->add_option("--family", family, "conditional_boundary|covariate_rotation");
  gen->add_option("--severity", spec.severity, "rotation angle in radians");
  gen->add_option("--n-source", spec.n_source);
  gen->add_option("--n-target", spec.n_target);
  gen->add_option("--noise", spec.noise);
  gen->add_option("--classes", spec.num_classes);
  gen->add_option("--dim", spec.dim);
  gen->add_option("--cluster-radius", spec.cluster_radius);
  gen->add_option("--seed", spec.seed);
  gen->add_option("--out", gen_out, "output directory");

  CommonOptions train_o;
  auto* train_cmd = app.add_subcommand("train", "train one variant and write report.json, curves.csv, predictions.csv");
  add_common(train_cmd, train_o);

  CommonOptions abl_o;
  std::vector<std::uint64_t> abl_seeds = {0, 1, 2};
  std::vector<std::string> abl_variants;
  std::size_t jobs = 1;
  auto* abl = app.add_subcommand("ablate", "train every variant for every seed; write ablation.csv/json");
  add_common(abl, abl_o, false);
  abl->add_option("--seeds", abl_seeds, "run seeds")->delimiter(',');
  abl->add_option("--variants", abl_variants, "variants to run (default: all)")->delimiter(',');
  abl->add_option("--jobs", jobs, "worker threads");

  CommonOptions gc_o;
  bool inject_fault = false;
  auto* gc = app.add_subcommand("gradcheck", "finite-difference check of every parameter gradient");
  add_common(gc, gc_o);
  gc->add_flag("--inject-fault", inject_fault, "corrupt one analytic gradient (test fixture)");

  std::string report_in, report_out;
  auto* rep = app.add_subcommand("report", "render a stored JSON report as markdown");
  rep->add_option("--in", report_in, "report.json or ablation.json")->required();
  rep->add_option("--out", report_out, "write markdown here instead of stdout");

  CommonOptions dl_o;
  std::string model_path;
  auto* dl = app.add_subcommand("diag-layers", "layer responses |f_T|, |delta_f|, |f_S| on target data");
  add_common(dl, dl_o, false);
  dl->add_option("--model", model_path, "checkpoint to inspect instead of training one");

  CommonOptions ds_o;
  double high_severity = default_conditional_benchmark().severity * 2.0;
  std::vector<std::uint64_t> shift_seeds = {0, 1, 2};
  auto* dsh = app.add_subcommand("diag-shift", "classifier-shift divergence, null vs shifted benchmark");
  add_common(dsh, ds_o, false);
  dsh->add_option("--severity-high", high_severity, "rule rotation of the shifted setting (radians)");
  dsh->add_option("--seeds", shift_seeds, "data/run seeds")->delimiter(',');

  std::vector<std::string> argv_rest(args.begin() + (args.empty() ? 0 : 1), args.end());
  std::reverse(argv_rest.begin(), argv_rest.end());
  try {
    app.parse(argv_rest);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    if (app.get_subcommands().empty()) err << app.help();
    return 1;
  }

  try {
    if (*gen) {
      spec.family = parse_shift_family(family);
      const DomainDataset ds = generate(spec);
      const fs::path manifest = export_dataset(ds, gen_out);
      out << "wrote " << manifest.string() << " (" << ds.source_size() << " source, " << ds.target_size()
          << " target, d=" << ds.dim() << ", c=" << ds.num_classes() << ")\n";
      return 0;
    }
    if (*train_cmd) {
      const TrainConfig cfg = build_config(train_o);
      const DomainDataset ds = build_dataset(train_o);
      const TrainResult r = train(ds, cfg);
      write_train_outputs(train_o.out_dir, r, ds);
      out << "variant " << to_string(cfg.variant) << " seed " << cfg.seed << ": target accuracy "
          << (r.report.final_target_accuracy ? pct(*r.report.final_target_accuracy) : "n/a") << ", source accuracy "
          << pct(r.report.final_source_accuracy) << "\n";
      return 0;
    }
    if (*abl) {
      const TrainConfig cfg = build_config(abl_o);
      const DomainDataset ds = build_dataset(abl_o);
      std::vector<Variant> variants;
      for (const auto& v : abl_variants) variants.push_back(parse_variant(v));
      if (variants.empty()) variants = all_variants();
      const AblationResult r = ablate(ds, cfg, abl_seeds, variants, jobs);
      write_ablation_outputs(abl_o.out_dir, r, cfg);
      out << render_ablation_markdown(r);
      return 0;
    }
    if (*gc) {
      const TrainConfig cfg = build_config(gc_o);
      GradcheckOptions opts;
      if (!gc_o.variant.empty()) opts.variants = {parse_variant(gc_o.variant)};
      if (inject_fault) {
        opts.corrupt_gradients = [](Network& net) { net.fcc().grad_weight[0] += 1e-3; };
      }
      const GradcheckResult r = run_gradcheck(cfg, opts);
      for (const auto& e : r.entries) {
        out << (e.passed ? "ok   " : "FAIL ") << to_string(e.variant) << ' ' << e.parameter
            << " max_rel_err=" << num(e.max_rel_err, "%.3e") << '\n';
      }
      out << (r.passed ? "gradcheck passed" : "gradcheck FAILED") << " (max rel err " << num(r.max_rel_err, "%.3e")
          << ", tolerance " << num(opts.tolerance, "%.0e") << ")\n";
      if (gc_o.out_dir != ".") {
        fs::create_directories(gc_o.out_dir);
        write_text_file(fs::path(gc_o.out_dir) / "gradcheck.json", gradcheck_json(r));
      }
      return r.passed ? 0 : 2;
    }
    if (*rep) {
      const std::string md = render_report_markdown(read_text_file(report_in));
      if (report_out.empty()) out << md;
      else write_text_file(report_out, md);
      return 0;
    }
    if (*dl) {
      const DomainDataset ds = build_dataset(dl_o);
      LayerResponse lr;
      if (!model_path.empty()) {
        lr = layer_response_report(load_checkpoint(model_path), ds.target_x());
      } else {
        TrainConfig cfg = build_config(dl_o);
        cfg.variant = Variant::mmd_ent_res;
        const TrainResult r = train(ds, cfg);
        lr = layer_response_report(r.net, ds.target_x());
      }
      out << "| head | mean abs | std abs |\n|---|---|---|\n";
      out << "| f_T | " << num(lr.f_T.mean) << " | " << num(lr.f_T.std) << " |\n";
      out << "| delta_f | " << num(lr.delta_f.mean) << " | " << num(lr.delta_f.std) << " |\n";
      out << "| f_S | " << num(lr.f_S.mean) << " | " << num(lr.f_S.std) << " |\n";
      out << "mean|delta_f| / mean|f_T| = " << num(lr.delta_f.mean / lr.f_T.mean) << '\n';
      return 0;
    }
    if (*dsh) {
      const TrainConfig cfg = build_config(ds_o);
      ShiftSpec base = default_conditional_benchmark();
      const ShiftDiagnostic d = run_shift_diagnostic(base, high_severity, shift_seeds, cfg);
      out << "| seed | null divergence | shifted divergence |\n|---|---|---|\n";
      for (std::size_t i = 0; i < d.seeds.size(); ++i) {
        out << "| " << d.seeds[i] << " | " << num(d.null_divergence[i]) << " | " << num(d.shifted_divergence[i])
            << " |\n";
      }
      out << "median null " << num(d.null_median) << ", median shifted " << num(d.shifted_median) << ", ratio "
          << num(d.ratio) << '\n';
      return 0;
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return e.exit_code();
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return 3;
  }
  return 1;
}

}  // namespace rtn::cli
