#include "rtn/data.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>

#include "json.hpp"
#include "rtn/error.hpp"

namespace rtn {

namespace fs = std::filesystem;

DomainDataset::DomainDataset(Tensor source_x, std::vector<std::size_t> source_y, Tensor target_x,
                             std::optional<std::vector<std::size_t>> target_y_eval, std::size_t num_classes,
                             std::string provenance)
    : source_x_(std::move(source_x)),
      source_y_(std::move(source_y)),
      target_x_(std::move(target_x)),
      target_y_eval_(std::move(target_y_eval)),
      num_classes_(num_classes),
      provenance_(std::move(provenance)) {
  if (num_classes_ < 2) throw ValidationError("dataset needs at least 2 classes");
  if (source_x_.rank() != 2 || target_x_.rank() != 2) throw ShapeError("dataset features must be matrices");
  if (source_x_.cols() != target_x_.cols()) {
    throw ValidationError("source and target feature dimensions differ: " + std::to_string(source_x_.cols()) +
                          " vs " + std::to_string(target_x_.cols()));
  }
  if (source_y_.size() != source_x_.rows()) throw ValidationError("source label count does not match rows");
  auto check_labels = [this](const std::vector<std::size_t>& y, const char* which) {
    for (std::size_t i = 0; i < y.size(); ++i) {
      if (y[i] >= num_classes_) {
        throw ValidationError(std::string(which) + " label " + std::to_string(y[i]) + " at row " +
                              std::to_string(i) + " is not below class count " + std::to_string(num_classes_));
      }
    }
  };
  check_labels(source_y_, "source");
  if (target_y_eval_) {
    if (target_y_eval_->size() != target_x_.rows()) {
      throw ValidationError("target evaluation label count does not match target rows");
    }
    check_labels(*target_y_eval_, "target");
  }
}

const std::vector<std::size_t>& DomainDataset::target_eval_labels() const {
  if (!target_y_eval_) throw ConfigError("dataset has no target evaluation labels");
  return *target_y_eval_;
}

const char* to_string(ShiftFamily family) {
  return family == ShiftFamily::covariate_rotation ? "covariate_rotation" : "conditional_boundary";
}

ShiftFamily parse_shift_family(const std::string& name) {
  if (name == "covariate_rotation" || name == "covariate") return ShiftFamily::covariate_rotation;
  if (name == "conditional_boundary" || name == "conditional") return ShiftFamily::conditional_boundary;
  throw ConfigError("unknown shift family '" + name + "'");
}

void validate(const ShiftSpec& spec) {
  if (spec.num_classes < 2) throw ParameterError("shift spec needs at least 2 classes");
  if (spec.dim < 2) throw ParameterError("shift spec needs dim >= 2");
  if (!(spec.severity >= 0.0) || !std::isfinite(spec.severity)) throw ParameterError("severity must be >= 0");
  if (!(spec.noise > 0.0)) throw ParameterError("noise must be positive");
  if (!(spec.cluster_radius >= 0.0)) throw ParameterError("cluster_radius must be >= 0");
  const std::size_t min_n = 2 * spec.num_classes;
  if (spec.n_source < min_n || spec.n_target < min_n) {
    throw ParameterError("each domain needs at least " + std::to_string(min_n) + " examples");
  }
}

Tensor cluster_means(const ShiftSpec& spec) {
  Tensor m({spec.num_classes, spec.dim});
  for (std::size_t k = 0; k < spec.num_classes; ++k) {
    const double angle = 2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(spec.num_classes);
    m(k, 0) = spec.cluster_radius * std::cos(angle);
    m(k, 1) = spec.cluster_radius * std::sin(angle);
  }
  return m;
}

Tensor rotate_plane(const Tensor& x, double angle) {
  Tensor out = x;
  const double c = std::cos(angle), s = std::sin(angle);
  for (std::size_t i = 0; i < x.rows(); ++i) {
    const double a = x(i, 0), b = x(i, 1);
    out(i, 0) = c * a - s * b;
    out(i, 1) = s * a + c * b;
  }
  return out;
}

namespace {

void sample_from_cluster(const Tensor& means, std::size_t k, double noise, Rng& rng, std::span<double> out) {
  for (std::size_t j = 0; j < out.size(); ++j) out[j] = means(k, j) + noise * rng.normal();
}

std::vector<std::size_t> balanced_quota(std::size_t n, std::size_t c) {
  std::vector<std::size_t> q(c, n / c);
  for (std::size_t k = 0; k < n % c; ++k) ++q[k];
  return q;
}

struct LabeledSample {
  Tensor x;
  std::vector<std::size_t> y;
};

LabeledSample sample_clusters(const ShiftSpec& spec, const Tensor& means, std::size_t n, Rng& rng) {
  std::vector<std::size_t> labels;
  labels.reserve(n);
  for (std::size_t i = 0; i < n; ++i) labels.push_back(i % spec.num_classes);
  rng.shuffle(labels);
  Tensor x({n, spec.dim});
  for (std::size_t i = 0; i < n; ++i) sample_from_cluster(means, labels[i], spec.noise, rng, x.row(i));
  return {std::move(x), std::move(labels)};
}

/// Draws from the cluster mixture, accepting a sample only while its class
/// (under `rotation`) still has quota left.
LabeledSample sample_by_rule(const ShiftSpec& spec, const Tensor& means, std::size_t n, double rotation, Rng& rng) {
  auto quota = balanced_quota(n, spec.num_classes);
  Tensor x({n, spec.dim});
  std::vector<std::size_t> y;
  y.reserve(n);
  std::vector<double> row(spec.dim);
  while (y.size() < n) {
    const std::size_t k = rng.uniform_index(spec.num_classes);
    sample_from_cluster(means, k, spec.noise, rng, row);
    const std::size_t label = sector_label(row, spec.num_classes, rotation);
    if (quota[label] == 0) continue;
    --quota[label];
    std::copy(row.begin(), row.end(), x.row(y.size()).begin());
    y.push_back(label);
  }
  return {std::move(x), std::move(y)};
}

std::string describe(const ShiftSpec& spec) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "synthetic:%s severity=%.17g n_s=%zu n_t=%zu noise=%.17g seed=%llu",
                to_string(spec.family), spec.severity, spec.n_source, spec.n_target, spec.noise,
                static_cast<unsigned long long>(spec.seed));
  return buf;
}

}  // namespace

DomainDataset gen_covariate_shift(const ShiftSpec& spec) {
  if (spec.family != ShiftFamily::covariate_rotation) throw ParameterError("gen_covariate_shift: wrong family");
  validate(spec);
  const Tensor means = cluster_means(spec);
  Rng root(spec.seed);
  Rng src_rng = root.fork(1), tgt_rng = root.fork(2);
  auto src = sample_clusters(spec, means, spec.n_source, src_rng);
  auto tgt = sample_clusters(spec, means, spec.n_target, tgt_rng);
  Tensor target_x = rotate_plane(tgt.x, spec.severity);
  return DomainDataset(std::move(src.x), std::move(src.y), std::move(target_x), std::move(tgt.y), spec.num_classes,
                       describe(spec));
}

std::size_t sector_label(std::span<const double> x, std::size_t num_classes, double rotation) {
  const double width = 2.0 * std::numbers::pi / static_cast<double>(num_classes);
  double a = std::atan2(x[1], x[0]) - rotation + 0.5 * width;
  a = std::fmod(a, 2.0 * std::numbers::pi);
  if (a < 0.0) a += 2.0 * std::numbers::pi;
  const auto k = static_cast<std::size_t>(a / width);
  return k % num_classes;
}

DomainDataset gen_conditional_shift(const ShiftSpec& spec) {
  if (spec.family != ShiftFamily::conditional_boundary) throw ParameterError("gen_conditional_shift: wrong family");
  validate(spec);
  const Tensor means = cluster_means(spec);
  Rng root(spec.seed);
  Rng src_rng = root.fork(1), tgt_rng = root.fork(2);
  auto src = sample_by_rule(spec, means, spec.n_source, spec.severity, src_rng);
  auto tgt = sample_by_rule(spec, means, spec.n_target, 0.0, tgt_rng);
  return DomainDataset(std::move(src.x), std::move(src.y), std::move(tgt.x), std::move(tgt.y), spec.num_classes,
                       describe(spec));
}

DomainDataset generate(const ShiftSpec& spec) {
  return spec.family == ShiftFamily::covariate_rotation ? gen_covariate_shift(spec) : gen_conditional_shift(spec);
}

ShiftSpec default_conditional_benchmark(std::uint64_t seed) {
  ShiftSpec s;
  s.family = ShiftFamily::conditional_boundary;
  s.severity = std::numbers::pi / 6.0;
  s.n_source = 800;
  s.n_target = 800;
  s.noise = 0.8;
  s.seed = seed;
  s.num_classes = 4;
  s.dim = 10;
  s.cluster_radius = 3.0;
  return s;
}

// ---- CSV -------------------------------------------------------------------

namespace {

[[noreturn]] void parse_fail(const fs::path& path, std::size_t line, const std::string& msg) {
  throw ParseError(path.string() + ":" + std::to_string(line) + ": " + msg);
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> cells;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    cells.push_back(trim(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return cells;
}

}  // namespace

CsvTable read_features_csv(const fs::path& path, bool labeled) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open " + path.string());
  std::vector<double> values;
  std::vector<std::size_t> labels;
  std::size_t width = 0, rows = 0, line_no = 0;
  std::string line;
  while (std::getline(is, line)) {
    ++line_no;
    const std::string_view text = trim(line);
    if (text.empty()) continue;
    if (text.front() == '#') {
      if (line_no == 1) continue;
      parse_fail(path, line_no, "header lines are only allowed on the first line");
    }
    auto cells = split_commas(text);
    const std::size_t nfeat = labeled ? cells.size() - 1 : cells.size();
    if (nfeat == 0) parse_fail(path, line_no, "row has no feature columns");
    if (rows == 0) {
      width = nfeat;
    } else if (nfeat != width) {
      parse_fail(path, line_no,
                 "ragged row: " + std::to_string(cells.size()) + " cells, expected " +
                     std::to_string(width + (labeled ? 1 : 0)));
    }
    for (std::size_t j = 0; j < nfeat; ++j) {
      double v = 0.0;
      const auto cell = cells[j];
      auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
      if (ec != std::errc() || ptr != cell.data() + cell.size() || cell.empty()) {
        parse_fail(path, line_no, "non-numeric cell '" + std::string(cell) + "' in column " + std::to_string(j + 1));
      }
      if (!std::isfinite(v)) parse_fail(path, line_no, "non-finite value in column " + std::to_string(j + 1));
      values.push_back(v);
    }
    if (labeled) {
      const auto cell = cells.back();
      std::size_t label = 0;
      auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), label);
      if (ec != std::errc() || ptr != cell.data() + cell.size() || cell.empty()) {
        parse_fail(path, line_no, "label '" + std::string(cell) + "' is not a non-negative integer");
      }
      labels.push_back(label);
    }
    ++rows;
  }
  if (rows == 0) throw ParseError(path.string() + ": no data rows");
  return {Tensor({rows, width}, std::move(values)), std::move(labels)};
}

void write_features_csv(const fs::path& path, const Tensor& x, std::span<const std::size_t> labels) {
  if (!labels.empty() && labels.size() != x.rows()) throw ShapeError("write_features_csv: label count mismatch");
  std::ofstream os(path);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  os << "#";
  for (std::size_t j = 0; j < x.cols(); ++j) os << (j ? ",x" : "x") << j;
  if (!labels.empty()) os << ",label";
  os << '\n';
  char buf[40];
  for (std::size_t i = 0; i < x.rows(); ++i) {
    for (std::size_t j = 0; j < x.cols(); ++j) {
      std::snprintf(buf, sizeof buf, "%.17g", x(i, j));
      if (j) os << ',';
      os << buf;
    }
    if (!labels.empty()) os << ',' << labels[i];
    os << '\n';
  }
  if (!os) throw IoError("failed writing " + path.string());
}

DomainDataset load_features_csv(const fs::path& source_labeled, const fs::path& target_unlabeled,
                                const fs::path& target_eval, std::size_t num_classes) {
  auto src = read_features_csv(source_labeled, true);
  auto tgt = read_features_csv(target_unlabeled, false);
  if (src.x.cols() != tgt.x.cols()) {
    throw ParseError("inconsistent feature dimension: " + source_labeled.string() + " has " +
                     std::to_string(src.x.cols()) + ", " + target_unlabeled.string() + " has " +
                     std::to_string(tgt.x.cols()));
  }
  std::optional<std::vector<std::size_t>> eval;
  if (!target_eval.empty()) {
    auto ev = read_features_csv(target_eval, true);
    if (ev.x.cols() != src.x.cols()) {
      throw ParseError("inconsistent feature dimension: " + target_eval.string() + " has " +
                       std::to_string(ev.x.cols()) + ", expected " + std::to_string(src.x.cols()));
    }
    if (ev.x.rows() != tgt.x.rows()) {
      throw ParseError(target_eval.string() + " has " + std::to_string(ev.x.rows()) + " rows but target has " +
                       std::to_string(tgt.x.rows()));
    }
    eval = std::move(ev.labels);
  }
  std::size_t c = num_classes;
  if (c == 0) {
    std::size_t mx = 0;
    for (auto y : src.labels) mx = std::max(mx, y);
    if (eval)
      for (auto y : *eval) mx = std::max(mx, y);
    c = std::max<std::size_t>(mx + 1, 2);
  }
  auto check = [c](const std::vector<std::size_t>& y, const fs::path& p) {
    for (std::size_t i = 0; i < y.size(); ++i) {
      if (y[i] >= c) {
        throw ParseError(p.string() + ": label " + std::to_string(y[i]) + " in data row " + std::to_string(i + 1) +
                         " is not below class count " + std::to_string(c));
      }
    }
  };
  check(src.labels, source_labeled);
  if (eval) check(*eval, target_eval);
  return DomainDataset(std::move(src.x), std::move(src.labels), std::move(tgt.x), std::move(eval), c,
                       "csv:" + source_labeled.string());
}

DatasetManifest read_manifest(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open manifest " + path.string());
  try {
    auto j = nlohmann::json::parse(is);
    const fs::path base = path.parent_path();
    auto resolve = [&base](const std::string& p) -> fs::path {
      if (p.empty()) return {};
      fs::path q(p);
      return q.is_absolute() ? q : base / q;
    };
    DatasetManifest m;
    m.source = resolve(j.at("source").get<std::string>());
    m.target = resolve(j.at("target").get<std::string>());
    m.target_eval = resolve(j.value("target_eval", std::string{}));
    m.num_classes = j.value("num_classes", std::size_t{0});
    m.dim = j.value("dim", std::size_t{0});
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("malformed manifest " + path.string() + ": " + e.what());
  }
}

void write_manifest(const fs::path& path, const DatasetManifest& m) {
  nlohmann::json j = {{"source", m.source.string()},
                      {"target", m.target.string()},
                      {"target_eval", m.target_eval.string()},
                      {"num_classes", m.num_classes},
                      {"dim", m.dim}};
  std::ofstream os(path);
  if (!os) throw IoError("cannot write manifest " + path.string());
  os << j.dump(2) << '\n';
}

DomainDataset load_manifest(const fs::path& path) {
  const auto m = read_manifest(path);
  auto ds = load_features_csv(m.source, m.target, m.target_eval, m.num_classes);
  if (m.dim != 0 && ds.dim() != m.dim) {
    throw ParseError("manifest declares dim " + std::to_string(m.dim) + " but files have " +
                     std::to_string(ds.dim()));
  }
  return ds;
}

fs::path export_dataset(const DomainDataset& ds, const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  write_features_csv(dir / "source.csv", ds.source_x(), ds.source_y());
  write_features_csv(dir / "target.csv", ds.target_x(), {});
  DatasetManifest m{"source.csv", "target.csv", "", ds.num_classes(), ds.dim()};
  if (ds.has_eval_labels()) {
    write_features_csv(dir / "target_eval.csv", ds.target_x(), ds.target_eval_labels());
    m.target_eval = "target_eval.csv";
  }
  write_manifest(dir / "manifest.json", m);
  return dir / "manifest.json";
}

// ---- Batches ---------------------------------------------------------------

BatchStream::BatchStream(TrainingView view, std::size_t batch_size, Rng rng)
    : view_(view), batch_size_(batch_size), rng_(std::move(rng)) {
  const std::size_t ns = view_.source_x.rows(), nt = view_.target_x.rows();
  if (batch_size_ == 0 || batch_size_ > std::min(ns, nt)) {
    throw ParameterError("batch size " + std::to_string(batch_size_) + " must lie in [1, min(n_s, n_t) = " +
                         std::to_string(std::min(ns, nt)) + "]");
  }
  source_order_ = rng_.permutation(ns);
  target_order_ = rng_.permutation(nt);
  source_pos_ = 0;
  target_pos_ = 0;
}

DomainBatch BatchStream::next() {
  if (source_pos_ + batch_size_ > source_order_.size()) {
    rng_.shuffle(source_order_);
    source_pos_ = 0;
    ++epoch_;
  }
  if (target_pos_ + batch_size_ > target_order_.size()) {
    rng_.shuffle(target_order_);
    target_pos_ = 0;
  }
  DomainBatch b;
  b.epoch = epoch_;
  b.source_indices.assign(source_order_.begin() + static_cast<std::ptrdiff_t>(source_pos_),
                          source_order_.begin() + static_cast<std::ptrdiff_t>(source_pos_ + batch_size_));
  b.target_indices.assign(target_order_.begin() + static_cast<std::ptrdiff_t>(target_pos_),
                          target_order_.begin() + static_cast<std::ptrdiff_t>(target_pos_ + batch_size_));
  source_pos_ += batch_size_;
  target_pos_ += batch_size_;
  b.source_x = view_.source_x.gather_rows(b.source_indices);
  b.target_x = view_.target_x.gather_rows(b.target_indices);
  b.source_y.reserve(batch_size_);
  for (auto i : b.source_indices) b.source_y.push_back(view_.source_y[i]);
  return b;
}

}  // namespace rtn
