#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <set>

#include "helpers.hpp"
#include "rtn/data.hpp"
#include "rtn/error.hpp"

using namespace rtn;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("rtn_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

void write(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

std::vector<std::size_t> counts(const std::vector<std::size_t>& y, std::size_t c) {
  std::vector<std::size_t> n(c, 0);
  for (auto v : y) ++n[v];
  return n;
}

std::vector<double> column_means(const Tensor& x) {
  std::vector<double> m(x.cols(), 0.0);
  for (std::size_t r = 0; r < x.rows(); ++r)
    for (std::size_t c = 0; c < x.cols(); ++c) m[c] += x(r, c) / static_cast<double>(x.rows());
  return m;
}

}  // namespace

TEST(CovariateShift, NullShiftHasMatchingMeans) {
  ShiftSpec s;
  s.family = ShiftFamily::covariate_rotation;
  s.severity = 0.0;
  s.seed = 3;
  const DomainDataset ds = gen_covariate_shift(s);
  const auto ms = column_means(ds.source_x()), mt = column_means(ds.target_x());
  // sigma: square root of the total variance of the pooled inputs.
  const Tensor all = concat_rows(ds.source_x(), ds.target_x());
  const auto mu = column_means(all);
  double var = 0.0, diff = 0.0;
  for (std::size_t r = 0; r < all.rows(); ++r)
    for (std::size_t c = 0; c < all.cols(); ++c) var += std::pow(all(r, c) - mu[c], 2) / all.rows();
  for (std::size_t c = 0; c < ms.size(); ++c) diff += std::pow(ms[c] - mt[c], 2);
  EXPECT_LE(std::sqrt(diff), 3.0 * std::sqrt(var) / std::sqrt(static_cast<double>(s.n_source)));
}

TEST(CovariateShift, HalfTurnNegatesClusterMeans) {
  ShiftSpec s;
  s.family = ShiftFamily::covariate_rotation;
  const Tensor m = cluster_means(s);
  const Tensor r = rotate_plane(m, std::numbers::pi);
  // sin(pi) is 1.2e-16 in double precision, hence the tiny tolerance.
  for (std::size_t i = 0; i < m.rows(); ++i) {
    EXPECT_NEAR(r(i, 0), -m(i, 0), 1e-12);
    EXPECT_NEAR(r(i, 1), -m(i, 1), 1e-12);
    for (std::size_t c = 2; c < m.cols(); ++c) EXPECT_EQ(r(i, c), m(i, c));
  }
}

TEST(CovariateShift, LabelsBalancedAndDeterministic) {
  ShiftSpec s;
  s.family = ShiftFamily::covariate_rotation;
  s.severity = 0.4;
  s.n_source = 803;
  const DomainDataset a = generate(s), b = generate(s);
  EXPECT_TRUE(a == b);
  for (auto n : counts(a.source_y(), 4)) EXPECT_NEAR(static_cast<double>(n), 803.0 / 4, 1.0);
  for (auto n : counts(a.target_eval_labels(), 4)) EXPECT_NEAR(static_cast<double>(n), 200.0, 1.0);
}

TEST(ShiftSpec, Validation) {
  ShiftSpec s;
  s.severity = -1;
  EXPECT_THROW(generate(s), ParameterError);
  s = ShiftSpec{};
  s.n_source = 5;
  EXPECT_THROW(generate(s), ParameterError);
  s = ShiftSpec{};
  s.dim = 1;
  EXPECT_THROW(generate(s), ParameterError);
  EXPECT_THROW(parse_shift_family("sideways"), ConfigError);
}

TEST(ConditionalShift, SharedMarginalDifferentRules) {
  ShiftSpec s = default_conditional_benchmark(1);
  const DomainDataset ds = gen_conditional_shift(s);
  for (std::size_t i = 0; i < ds.source_size(); ++i)
    ASSERT_EQ(ds.source_y()[i], sector_label(ds.source_x().row(i), 4, s.severity));
  for (std::size_t i = 0; i < ds.target_size(); ++i)
    ASSERT_EQ(ds.target_eval_labels()[i], sector_label(ds.target_x().row(i), 4, 0.0));
  for (auto n : counts(ds.source_y(), 4)) EXPECT_EQ(n, 200u);
  for (auto n : counts(ds.target_eval_labels(), 4)) EXPECT_EQ(n, 200u);
}

TEST(ConditionalShift, NullSeverityOracleScoresEqually) {
  ShiftSpec s = default_conditional_benchmark(2);
  s.severity = 0.0;
  const DomainDataset ds = gen_conditional_shift(s);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < ds.target_size(); ++i)
    hits += sector_label(ds.target_x().row(i), 4, 0.0) == ds.target_eval_labels()[i];
  EXPECT_EQ(hits, ds.target_size());
}

TEST(ConditionalShift, DefaultBenchmarkCostsOracleAtLeastFifteenPoints) {
  const ShiftSpec s = default_conditional_benchmark(0);
  const DomainDataset ds = gen_conditional_shift(s);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < ds.target_size(); ++i)
    hits += sector_label(ds.target_x().row(i), 4, s.severity) == ds.target_eval_labels()[i];
  EXPECT_LE(static_cast<double>(hits) / ds.target_size(), 0.85);
}

TEST(ConditionalShift, WedgeFractionMatchesAngle) {
  // Two classes split by a line through the origin; rotating the line by theta
  // relabels two opposite wedges of angle theta, i.e. theta / pi of an
  // isotropic distribution.
  Rng rng(4);
  for (double theta : {std::numbers::pi / 12, std::numbers::pi / 6, std::numbers::pi / 3}) {
    std::size_t flips = 0;
    const int n = 100000;
    for (int i = 0; i < n; ++i) {
      const double x[2] = {rng.normal(), rng.normal()};
      flips += sector_label(x, 2, 0.0) != sector_label(x, 2, theta);
    }
    EXPECT_NEAR(static_cast<double>(flips) / n, theta / std::numbers::pi, 0.01);
  }
}

TEST(Csv, RoundTripIsExact) {
  const fs::path dir = scratch("csv_roundtrip");
  Rng rng(5);
  const Tensor x = fixtures::random_matrix(7, 3, rng, 1e3);
  const std::vector<std::size_t> y = {0, 1, 2, 0, 1, 2, 0};
  write_features_csv(dir / "a.csv", x, y);
  const CsvTable t = read_features_csv(dir / "a.csv", true);
  EXPECT_EQ(t.x, x);
  EXPECT_EQ(t.labels, y);
}

TEST(Csv, ParseErrorsNameFileAndLine) {
  const fs::path dir = scratch("csv_errors");
  write(dir / "ragged.csv", "1,2,0\n1,2,3,0\n");
  write(dir / "nan.csv", "# header\n1,abc,0\n");
  write(dir / "label.csv", "1,2,0\n1,2,-1\n");
  for (const char* f : {"ragged.csv", "nan.csv", "label.csv"}) {
    try {
      read_features_csv(dir / f, true);
      ADD_FAILURE() << f;
    } catch (const ParseError& e) {
      EXPECT_NE(std::string(e.what()).find(f), std::string::npos);
      EXPECT_NE(std::string(e.what()).find(":2:"), std::string::npos) << e.what();
    }
  }
  EXPECT_THROW(read_features_csv(dir / "missing.csv", true), IoError);
}

TEST(Csv, LoaderChecksConsistency) {
  const fs::path dir = scratch("csv_loader");
  write(dir / "s.csv", "1,2,0\n3,4,1\n");
  write(dir / "t.csv", "1,2\n3,4\n");
  write(dir / "t3.csv", "1,2,3\n3,4,5\n");
  write(dir / "e.csv", "1,2,1\n3,4,0\n");
  write(dir / "e_short.csv", "1,2,1\n");
  const DomainDataset ds = load_features_csv(dir / "s.csv", dir / "t.csv", dir / "e.csv");
  EXPECT_EQ(ds.num_classes(), 2u);
  EXPECT_EQ(ds.target_eval_labels(), (std::vector<std::size_t>{1, 0}));
  EXPECT_THROW(load_features_csv(dir / "s.csv", dir / "t3.csv", ""), ParseError);
  EXPECT_THROW(load_features_csv(dir / "s.csv", dir / "t.csv", dir / "e_short.csv"), ParseError);
  EXPECT_THROW(load_features_csv(dir / "s.csv", dir / "t.csv", "", 1), ParseError);
  const DomainDataset unl = load_features_csv(dir / "s.csv", dir / "t.csv", "");
  EXPECT_FALSE(unl.has_eval_labels());
  EXPECT_THROW(unl.target_eval_labels(), ConfigError);
}

TEST(Manifest, ExportLoadRoundTrip) {
  const fs::path dir = scratch("manifest");
  ShiftSpec s = default_conditional_benchmark(6);
  s.n_source = s.n_target = 40;
  const DomainDataset ds = generate(s);
  const fs::path m = export_dataset(ds, dir);
  const DomainDataset back = load_manifest(m);
  EXPECT_EQ(back.source_x(), ds.source_x());
  EXPECT_EQ(back.source_y(), ds.source_y());
  EXPECT_EQ(back.target_x(), ds.target_x());
  EXPECT_EQ(back.target_eval_labels(), ds.target_eval_labels());
  EXPECT_THROW(load_manifest(dir / "nope.json"), IoError);
}

TEST(BatchStream, EpochsArePermutationsWithRemainderDropped) {
  ShiftSpec s = default_conditional_benchmark(7);
  s.n_source = 50;
  s.n_target = 30;
  const DomainDataset ds = generate(s);
  BatchStream stream(ds.training_view(), 8, Rng(1));
  EXPECT_EQ(stream.batches_per_epoch(), 6u);
  std::set<std::size_t> seen;
  for (std::size_t b = 0; b < 6; ++b) {
    const DomainBatch batch = stream.next();
    EXPECT_EQ(batch.epoch, 0u);
    EXPECT_EQ(batch.source_x.rows(), 8u);
    EXPECT_EQ(batch.target_x.rows(), 8u);
    for (std::size_t i = 0; i < 8; ++i) {
      EXPECT_TRUE(seen.insert(batch.source_indices[i]).second);
      EXPECT_EQ(batch.source_y[i], ds.source_y()[batch.source_indices[i]]);
      const auto row = ds.target_x().row(batch.target_indices[i]);
      EXPECT_TRUE(std::equal(row.begin(), row.end(), batch.target_x.row(i).begin()));
    }
    std::set<std::size_t> t(batch.target_indices.begin(), batch.target_indices.end());
    EXPECT_EQ(t.size(), 8u);
  }
  EXPECT_EQ(seen.size(), 48u);
  EXPECT_EQ(stream.next().epoch, 1u);
}

TEST(BatchStream, DeterministicAndValidated) {
  ShiftSpec s = default_conditional_benchmark(8);
  s.n_source = s.n_target = 20;
  const DomainDataset ds = generate(s);
  BatchStream a(ds.training_view(), 4, Rng(9)), b(ds.training_view(), 4, Rng(9));
  for (int i = 0; i < 12; ++i) {
    const auto x = a.next(), y = b.next();
    EXPECT_EQ(x.source_indices, y.source_indices);
    EXPECT_EQ(x.target_indices, y.target_indices);
  }
  EXPECT_THROW(BatchStream(ds.training_view(), 0, Rng(1)), ParameterError);
  EXPECT_THROW(BatchStream(ds.training_view(), 21, Rng(1)), ParameterError);
}
