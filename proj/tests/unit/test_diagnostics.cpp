#include <gtest/gtest.h>

#include <cmath>

#include "helpers.hpp"
#include "rtn/diagnostics.hpp"
#include "rtn/error.hpp"

using namespace rtn;

TEST(LayerResponse, FreshResidualIsExactlyZero) {
  Rng rng(1);
  const Network net = Network::create(NetworkShape{3, {4}, 3, 2, 1.0, 10.0}, {}, rng);
  const LayerResponse r = layer_response_report(net, fixtures::random_matrix(20, 3, rng));
  EXPECT_EQ(r.delta_f.mean, 0.0);
  EXPECT_EQ(r.delta_f.std, 0.0);
  EXPECT_EQ(r.f_S.mean, r.f_T.mean);
}

TEST(LayerResponse, MatchesStatsOracleAndResidualIdentity) {
  Rng rng(2);
  Network net = Network::create(NetworkShape{3, {4}, 3, 2, 1.0, 10.0}, {}, rng);
  for (double& w : net.res2().weight.data()) w = rng.normal();
  const Tensor x = fixtures::random_matrix(20, 3, rng);
  const LayerResponse r = layer_response_report(net, x);
  const HeadOutputs o = net.evaluate(x);
  std::vector<double> abs_df, abs_diff;
  for (std::size_t i = 0; i < o.delta_f.size(); ++i) {
    abs_df.push_back(std::abs(o.delta_f[i]));
    abs_diff.push_back(std::abs(o.f_S[i] - o.f_T[i]));
  }
  const Stats s = reduce_stats(abs_df);
  EXPECT_EQ(r.delta_f.mean, s.mean);
  EXPECT_EQ(r.delta_f.std, s.std);
  EXPECT_NEAR(reduce_stats(abs_diff).mean, r.delta_f.mean, 1e-15);
}

TEST(LayerResponse, NeedsResidualPath) {
  Rng rng(3);
  const Network net = Network::create(NetworkShape{3, {4}, 3, 2, 1.0, 10.0}, {true, true, false}, rng);
  EXPECT_THROW(layer_response_report(net, fixtures::random_matrix(2, 3, rng)), ConfigError);
}

TEST(ClassifierShift, CosineOfSelfIsOne) {
  const std::vector<double> a = {0.3, -2.0, 5.0};
  EXPECT_NEAR(cosine_similarity(a, a), 1.0, 1e-15);
  const std::vector<double> b = {-0.3, 2.0, -5.0};
  EXPECT_NEAR(cosine_similarity(a, b), -1.0, 1e-15);
}

TEST(ClassifierShift, SoftmaxHeadSeparatesEasyData) {
  const Tensor x = Tensor::matrix({{-2, 0}, {-1, 0}, {1, 0}, {2, 0}});
  const std::vector<std::size_t> y = {0, 0, 1, 1};
  const SoftmaxHead h = fit_softmax_head(x, y, 2);
  EXPECT_LT(h.weight(0, 0), 0.0);
  EXPECT_GT(h.weight(0, 1), 0.0);
}

TEST(ClassifierShift, NeedsEvaluationLabels) {
  ShiftSpec s = default_conditional_benchmark();
  s.n_source = s.n_target = 40;
  const DomainDataset full = generate(s);
  const DomainDataset unl(full.source_x(), full.source_y(), full.target_x(), std::nullopt, 4, "x");
  EXPECT_THROW(classifier_shift_report(unl, TrainConfig{}), ConfigError);
}

TEST(ClassifierShift, ReportsEveryClass) {
  ShiftSpec s = default_conditional_benchmark();
  s.n_source = s.n_target = 80;
  TrainConfig cfg;
  cfg.total_steps = 100;
  cfg.batch_size = 16;
  const ClassifierShiftReport r = classifier_shift_report(generate(s), cfg);
  EXPECT_EQ(r.cosine_per_class.size(), 4u);
  EXPECT_GT(r.frobenius_diff, 0.0);
  EXPECT_GT(r.same_domain_baseline, 0.0);
}

TEST(Gradcheck, DefaultTinyNetworkPasses) {
  const GradcheckResult r = run_gradcheck(TrainConfig{});
  EXPECT_TRUE(r.passed) << r.max_rel_err;
  EXPECT_LE(r.max_rel_err, 1e-5);
}

TEST(Gradcheck, ListsEveryParameterOfEveryVariant) {
  GradcheckOptions o;
  const GradcheckResult r = run_gradcheck(TrainConfig{}, o);
  EXPECT_EQ(r.entries.size(), all_variants().size() * 10);
  for (std::size_t v = 0; v < all_variants().size(); ++v) {
    EXPECT_EQ(r.entries[v * 10].parameter, "feature0.weight");
    EXPECT_EQ(r.entries[v * 10 + 9].parameter, "res2.bias");
  }
}

TEST(Gradcheck, CorruptedGradientFails) {
  GradcheckOptions o;
  o.variants = {Variant::mmd_ent_res};
  o.corrupt_gradients = [](Network& net) { net.fcc().grad_weight[0] += 1e-3; };
  const GradcheckResult r = run_gradcheck(TrainConfig{}, o);
  EXPECT_FALSE(r.passed);
  std::size_t failed = 0;
  for (const auto& e : r.entries) failed += !e.passed;
  EXPECT_EQ(failed, 1u);
}

TEST(Gradcheck, SketchedAndLinearObjectivesPass) {
  TrainConfig cfg;
  cfg.estimator = MmdEstimator::linear;
  EXPECT_TRUE(run_gradcheck(cfg).passed);
  cfg = TrainConfig{};
  cfg.sketch_dim = 5;
  EXPECT_TRUE(run_gradcheck(cfg).passed);
}

TEST(Median, OddAndEven) {
  EXPECT_EQ(median({3, 1, 2}), 2.0);
  EXPECT_EQ(median({4, 1, 3, 2}), 2.5);
  EXPECT_THROW(median({}), InsufficientDataError);
}
