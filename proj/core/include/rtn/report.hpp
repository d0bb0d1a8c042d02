#pragma once

#include <filesystem>
#include <string>

#include "rtn/data.hpp"
#include "rtn/diagnostics.hpp"
#include "rtn/train.hpp"

namespace rtn {

/// report.json content. Excludes wall-clock time, so identical runs produce
/// identical bytes.
std::string report_json(const MetricsReport& report);
std::string ablation_json(const AblationResult& result, const TrainConfig& base);
std::string gradcheck_json(const GradcheckResult& result);

/// Writes report.json, curves.csv, predictions.csv, model.json (checkpoint)
/// and timing.json into `dir`, creating it if needed.
void write_train_outputs(const std::filesystem::path& dir, const TrainResult& result, const DomainDataset& ds);
/// Writes ablation.csv and ablation.json into `dir`.
void write_ablation_outputs(const std::filesystem::path& dir, const AblationResult& result, const TrainConfig& base);

/// curves.csv: step,source_ce,mmd,entropy,target_acc (target_acc only on
/// evaluation steps).
std::string curves_csv(const MetricsReport& report);
/// predictions.csv: index,predicted,emb0,emb1 where the embedding is the first
/// two bottleneck coordinates.
std::string predictions_csv(const Network& net, const Tensor& target_x);

std::string render_ablation_markdown(const AblationResult& result);
/// Renders a stored train or ablation JSON report as markdown tables.
std::string render_report_markdown(const std::string& json_text);

void write_text_file(const std::filesystem::path& path, const std::string& text);
std::string read_text_file(const std::filesystem::path& path);

}  // namespace rtn
