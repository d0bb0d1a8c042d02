#include <gtest/gtest.h>

#include <cmath>

#include "helpers.hpp"
#include "rtn/error.hpp"
#include "rtn/optimizer.hpp"

using namespace rtn;

TEST(Schedule, Endpoints) {
  EXPECT_EQ(lr_at(0.0, LrSchedule{}), 0.01);
  const double expected = 0.01 / std::pow(11.0, 0.75);
  EXPECT_NEAR(lr_at(1.0, LrSchedule{}), expected, 1e-12);
  EXPECT_NEAR(expected, 0.0016556, 1e-7);
}

TEST(Schedule, StrictlyDecreasing) {
  double prev = lr_at(0.0, LrSchedule{});
  for (int i = 1; i <= 100; ++i) {
    const double cur = lr_at(i / 100.0, LrSchedule{});
    EXPECT_LT(cur, prev);
    prev = cur;
  }
}

TEST(Schedule, RejectsProgressOutsideUnitInterval) {
  EXPECT_THROW(lr_at(-0.1, LrSchedule{}), ParameterError);
  EXPECT_THROW(lr_at(1.5, LrSchedule{}), ParameterError);
}

namespace {

Network tiny_net() {
  Rng rng(1);
  return Network::create(NetworkShape{2, {3}, 2, 2, 1.0, 10.0}, {}, rng);
}

void set_grads(Network& net, double value) {
  for (auto& p : net.parameters()) p.grad->fill(value);
}

// Makes the network believe a backward pass happened.
void fake_backward(Network& net, double value) {
  Rng rng(2);
  const HeadOutputs out = net.forward(fixtures::random_matrix(2, 2, rng));
  HeadGradients g;
  g.d_f_s = Tensor(out.f_s.shape());
  net.backward(g);
  set_grads(net, value);
}

}  // namespace

TEST(Sgd, StepNeedsGradients) {
  Network net = tiny_net();
  SgdState opt(LrSchedule{}, 0.9, 10);
  EXPECT_THROW(opt.step(net), StateError);
}

TEST(Sgd, MomentumRecurrenceAndMultipliers) {
  Network net = tiny_net();
  const Network before = net;
  SgdState opt(LrSchedule{}, 0.9, 10);
  const double g1 = 0.5, g2 = -0.25;
  fake_backward(net, g1);
  opt.step(net);
  const double eta0 = lr_at(0.0, LrSchedule{}), eta1 = lr_at(0.1, LrSchedule{});
  fake_backward(net, g2);
  opt.step(net);
  EXPECT_EQ(opt.step_count(), 2u);

  auto params = net.parameters();
  auto old = const_cast<Network&>(before).parameters();
  for (std::size_t k = 0; k < params.size(); ++k) {
    const double m = params[k].lr_multiplier;
    const double v1 = -m * eta0 * g1;
    const double v2 = 0.9 * v1 - m * eta1 * g2;
    for (std::size_t i = 0; i < params[k].value->size(); ++i)
      EXPECT_NEAR((*params[k].value)[i], (*old[k].value)[i] + v1 + v2, 1e-15) << params[k].name;
    EXPECT_NEAR(opt.velocities()[k][0], v2, 1e-15);
    EXPECT_EQ(opt.last_effective_rates()[k], m * eta1);
  }
}

TEST(Sgd, NewLayersLearnTenTimesFaster) {
  Network net = tiny_net();
  SgdState opt(LrSchedule{}, 0.9, 10);
  fake_backward(net, 1.0);
  opt.step(net);
  const auto params = net.parameters();
  const auto& rates = opt.last_effective_rates();
  for (std::size_t k = 0; k < params.size(); ++k) {
    if (params[k].name == "fcc.weight") EXPECT_DOUBLE_EQ(rates[k] / rates[0], 10.0);
  }
  EXPECT_FALSE(net.grads_ready());
}

TEST(Sgd, ProgressCapsAtOne) {
  Network net = tiny_net();
  SgdState opt(LrSchedule{}, 0.0, 1);
  fake_backward(net, 0.0);
  opt.step(net);
  EXPECT_EQ(opt.progress(), 1.0);
  fake_backward(net, 0.0);
  opt.step(net);
  EXPECT_EQ(opt.progress(), 1.0);
}

TEST(Sgd, WeightDecayTouchesWeightsOnly) {
  Network net = tiny_net();
  for (auto& p : net.parameters()) p.value->fill(2.0);
  SgdState opt(LrSchedule{}, 0.9, 10, 0.1);
  fake_backward(net, 0.5);
  opt.step(net);
  for (const auto& p : net.parameters()) {
    const bool weight = p.value->rank() == 2;
    const double g = weight ? 0.5 + 0.1 * 2.0 : 0.5;
    EXPECT_DOUBLE_EQ((*p.value)[0], 2.0 - p.lr_multiplier * 0.01 * g) << p.name;
  }
  EXPECT_THROW(SgdState(LrSchedule{}, 0.9, 10, -1.0), ParameterError);
}
