#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "helpers.hpp"
#include "rtn/config.hpp"
#include "rtn/error.hpp"
#include "rtn/losses.hpp"
#include "rtn/objective.hpp"

using namespace rtn;

namespace {

struct Fixture {
  Tensor xs, xt;
  std::vector<std::size_t> ys;
  Network net;
  TrainConfig cfg;
};

Fixture make(Variant v, std::uint64_t seed = 1) {
  Rng rng(seed);
  Fixture f;
  f.cfg.variant = v;
  f.cfg.network = NetworkShape{4, {5}, 3, 3, 1.0, 10.0};
  f.xs = fixtures::random_matrix(6, 4, rng);
  f.xt = fixtures::random_matrix(6, 4, rng, 1.0, 0.7);
  f.ys = {0, 1, 2, 0, 1, 2};
  f.net = Network::create(f.cfg.network, flags_for(v), rng);
  for (double& w : f.net.res2().weight.data()) w = rng.normal(0.0, 0.3);
  return f;
}

}  // namespace

TEST(Objective, SourceOnlyIsExactlyCrossEntropy) {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    Fixture f = make(Variant::source_only, seed);
    const ObjectiveTerms t = objective(f.net, {f.xs, f.ys, f.xt}, f.cfg);
    const Tensor probs = softmax_rows(f.net.evaluate(f.xs).f_S);
    EXPECT_EQ(t.total, cross_entropy(probs, f.ys));
    EXPECT_EQ(t.total, t.source_ce);
  }
}

TEST(Objective, FullObjectiveSumsWeightedTerms) {
  Fixture f = make(Variant::mmd_ent_res);
  const ObjectiveTerms t = objective(f.net, {f.xs, f.ys, f.xt}, f.cfg);
  const HeadOutputs os = f.net.evaluate(f.xs), ot = f.net.evaluate(f.xt);
  const std::vector<Tensor> ls = {os.fcb_feats, os.f_T}, lt = {ot.fcb_feats, ot.f_T};
  const Tensor zs = fuse(ls), zt = fuse(lt);
  const double b = median_heuristic(concat_rows(zs, zt));
  ASSERT_EQ(t.bandwidths.size(), 1u);
  EXPECT_EQ(t.bandwidths[0], b);
  EXPECT_NEAR(t.mmd, mmd2_quadratic(zs, zt, b), 1e-14);
  EXPECT_NEAR(t.entropy, entropy_penalty(ot.f_t), 1e-14);
  EXPECT_NEAR(t.source_ce, cross_entropy(os.f_s, f.ys), 1e-14);
  EXPECT_NEAR(t.total, t.source_ce + 0.3 * t.entropy + 0.3 * t.mmd, 1e-14);
}

TEST(Objective, GatingDropsDisabledTerms) {
  Fixture f = make(Variant::mmd);
  const ObjectiveTerms t = objective(f.net, {f.xs, f.ys, f.xt}, f.cfg);
  EXPECT_NEAR(t.total, t.source_ce + 0.3 * t.mmd, 1e-15);
  Fixture g = make(Variant::mmd_ent);
  const ObjectiveTerms u = objective(g.net, {g.xs, g.ys, g.xt}, g.cfg);
  EXPECT_NEAR(u.total, u.source_ce + 0.3 * u.mmd + 0.3 * u.entropy, 1e-15);
}

TEST(Objective, ZeroResidualMatchesNoResidual) {
  Fixture a = make(Variant::mmd_ent_res);
  a.net.res2().zero_params();
  Network b = a.net;
  b.set_variant(flags_for(Variant::mmd_ent));
  TrainConfig cb = a.cfg;
  cb.variant = Variant::mmd_ent;
  const ObjectiveTerms ta = objective(a.net, {a.xs, a.ys, a.xt}, a.cfg);
  const ObjectiveTerms tb = objective(b, {a.xs, a.ys, a.xt}, cb);
  EXPECT_EQ(ta.total, tb.total);
  EXPECT_EQ(a.net.fcc().grad_weight, b.fcc().grad_weight);
  EXPECT_EQ(a.net.feature_layers()[0].grad_weight, b.feature_layers()[0].grad_weight);
}

TEST(Objective, MultiMmdWithOneLayerEqualsFusedMmd) {
  for (bool fcb : {true, false}) {
    Fixture a = make(Variant::mmd);
    a.cfg.adapted = {fcb, !fcb};
    Fixture b = make(Variant::multi_mmd);
    b.cfg.adapted = a.cfg.adapted;
    const ObjectiveTerms ta = objective(a.net, {a.xs, a.ys, a.xt}, a.cfg);
    const ObjectiveTerms tb = objective(b.net, {b.xs, b.ys, b.xt}, b.cfg);
    EXPECT_EQ(ta.total, tb.total);
    EXPECT_EQ(a.net.fcb().grad_weight, b.net.fcb().grad_weight);
  }
}

TEST(Objective, MultiMmdSumsPerLayerTerms) {
  Fixture f = make(Variant::multi_mmd);
  const ObjectiveTerms t = objective(f.net, {f.xs, f.ys, f.xt}, f.cfg);
  ASSERT_EQ(t.bandwidths.size(), 2u);
  const HeadOutputs os = f.net.evaluate(f.xs), ot = f.net.evaluate(f.xt);
  const double m = mmd2_quadratic(os.fcb_feats, ot.fcb_feats, t.bandwidths[0]) +
                   mmd2_quadratic(os.f_T, ot.f_T, t.bandwidths[1]);
  EXPECT_NEAR(t.mmd, m, 1e-14);
}

TEST(Objective, PinnedBandwidthsOverridePolicy) {
  Fixture f = make(Variant::mmd);
  ObjectiveOptions o;
  o.bandwidths = {2.5};
  const ObjectiveTerms t = objective(f.net, {f.xs, f.ys, f.xt}, f.cfg, o);
  EXPECT_EQ(t.bandwidths[0], 2.5);
  Fixture g = make(Variant::multi_mmd);
  EXPECT_THROW(objective(g.net, {g.xs, g.ys, g.xt}, g.cfg, o), ParameterError);
}

TEST(Objective, NonFiniteLossIsNumericalError) {
  Fixture f = make(Variant::mmd_ent_res);
  f.net.fcc().weight[0] = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(objective(f.net, {f.xs, f.ys, f.xt}, f.cfg), NumericalError);
}

TEST(Objective, ForwardOnlyLeavesGradientsAlone) {
  Fixture f = make(Variant::mmd_ent_res);
  ObjectiveOptions o;
  o.compute_gradients = false;
  objective(f.net, {f.xs, f.ys, f.xt}, f.cfg, o);
  EXPECT_FALSE(f.net.grads_ready());
  EXPECT_THROW(objective(f.net, {f.xs, f.ys, f.xs.slice_rows(0, 3)}, f.cfg), ShapeError);
}

TEST(Objective, SketchedMmdUsesProjectedFeatures) {
  Fixture f = make(Variant::mmd);
  Rng rng(5);
  const CountSketch s = CountSketch::random(9, 4, rng);
  ObjectiveOptions o;
  o.sketch = &s;
  const ObjectiveTerms t = objective(f.net, {f.xs, f.ys, f.xt}, f.cfg, o);
  const HeadOutputs os = f.net.evaluate(f.xs), ot = f.net.evaluate(f.xt);
  const std::vector<Tensor> ls = {os.fcb_feats, os.f_T}, lt = {ot.fcb_feats, ot.f_T};
  const Tensor zs = s.apply(fuse(ls)), zt = s.apply(fuse(lt));
  EXPECT_NEAR(t.mmd, mmd2_quadratic(zs, zt, t.bandwidths[0]), 1e-14);
}
