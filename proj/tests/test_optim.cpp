#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "hpinn/optim.hpp"

using namespace hpinn;

TEST(Adam, ZeroGradientNeverMoves) {
  AdamState s(4, 0.999);
  for (int t = 0; t < 50; ++t) {
    const Eigen::VectorXd d = adam_step(s, Eigen::VectorXd::Zero(4), 1e-2);
    EXPECT_EQ(d.cwiseAbs().maxCoeff(), 0.0);
  }
  EXPECT_EQ(s.step, 50);
}

TEST(Adam, FirstStepByHand) {
  // m_hat = 1, v_hat = 1 after bias correction, so delta = -lr / (1 + eps).
  AdamState s(1, 0.999);
  const Eigen::VectorXd d = adam_step(s, Eigen::VectorXd::Ones(1), 0.1);
  EXPECT_DOUBLE_EQ(d(0), -0.1 / (1.0 + 1e-8));
}

TEST(Adam, SecondStepByHand) {
  AdamState s(1, 0.95);
  Eigen::VectorXd g(1);
  g << 2.0;
  adam_step(s, g, 0.1);
  g << -1.0;
  const Eigen::VectorXd d = adam_step(s, g, 0.05);
  const double m = 0.9 * (0.1 * 2.0) + 0.1 * -1.0;
  const double v = 0.95 * (0.05 * 4.0) + 0.05 * 1.0;
  const double mh = m / (1.0 - 0.81);
  const double vh = v / (1.0 - 0.95 * 0.95);
  EXPECT_NEAR(d(0), -0.05 * mh / (std::sqrt(vh) + 1e-8), 1e-15);
}

TEST(Adam, Beta2OnlyChangesSecondMoment) {
  AdamState a(3, 0.95);
  AdamState b(3, 0.999);
  const Eigen::Vector3d g(0.3, -1.0, 2.5);
  for (int t = 0; t < 5; ++t) {
    adam_step(a, g * (t + 1), 1e-3);
    adam_step(b, g * (t + 1), 1e-3);
  }
  EXPECT_EQ((a.m - b.m).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_GT((a.v - b.v).cwiseAbs().maxCoeff(), 0.0);
}

TEST(Adam, NonFiniteGradientNamesIndex) {
  AdamState s(3, 0.999);
  Eigen::Vector3d g(0.0, 1.0, std::nan(""));
  try {
    adam_step(s, g, 1e-3);
    FAIL();
  } catch (const std::invalid_argument& e) {
    EXPECT_NE(std::string(e.what()).find("index 2"), std::string::npos);
  }
  EXPECT_EQ(s.step, 0);
}

TEST(OptimizerSlot, Kinds) {
  auto a = optimizer_slot(OptimizerKind::adam999, 2);
  auto b = optimizer_slot(OptimizerKind::adam95, 2);
  EXPECT_EQ(dynamic_cast<AdamOptimizer&>(*a).state().beta2, 0.999);
  EXPECT_EQ(dynamic_cast<AdamOptimizer&>(*b).state().beta2, 0.95);
  EXPECT_EQ(dynamic_cast<AdamOptimizer&>(*a).state().beta1, 0.9);
  EXPECT_THROW(optimizer_slot(OptimizerKind::kourkoutas_beta, 2), NotBundledError);
  EXPECT_EQ(optimizer_from_string(to_string(OptimizerKind::kourkoutas_beta)),
            OptimizerKind::kourkoutas_beta);
  EXPECT_THROW(optimizer_from_string("sgd"), std::invalid_argument);
}

TEST(OptimizerSlot, PluginReceivesSettings) {
  double seen = 0.0;
  optimizer_plugins()[OptimizerKind::kourkoutas_beta] = [&](std::size_t n,
                                                             const OptimizerSettings& s) {
    seen = s.kbeta_decay;
    return std::make_unique<AdamOptimizer>("stand-in", n, 0.999);
  };
  auto opt = optimizer_slot(OptimizerKind::kourkoutas_beta, 3);
  EXPECT_EQ(opt->name(), "stand-in");
  EXPECT_EQ(seen, 0.98);
  optimizer_plugins().erase(OptimizerKind::kourkoutas_beta);
}

TEST(LrSchedule, EndpointsAndMidpoint) {
  const LrSchedule s{7.5e-3, 1e-5, 1000};
  EXPECT_EQ(lr_at(s, 0), 7.5e-3);
  EXPECT_EQ(lr_at(s, 1000), 1e-5);
  EXPECT_NEAR(lr_at(s, 500), 3.755e-3, 1e-15);
  EXPECT_THROW(lr_at(s, -1), std::out_of_range);
  EXPECT_THROW(lr_at(s, 1001), std::out_of_range);
}

TEST(LrSchedule, MonotoneNonIncreasing) {
  const LrSchedule s{1e-3, 1e-5, 777};
  for (long e = 1; e <= 777; ++e) EXPECT_LE(lr_at(s, e), lr_at(s, e - 1));
}

TEST(AuxSchedule, ZeroBeforeStartThenRamp) {
  AuxSchedule s;
  s.start_epoch = 100;
  s.ramp_len = 50;
  s.hold_len = 100;
  s.decay_len = 200;
  s.target = 1e-3;
  s.final_fraction = 0.5;
  EXPECT_EQ(aux_weight_at(s, 0), 0.0);
  EXPECT_EQ(aux_weight_at(s, 99), 0.0);
  EXPECT_EQ(aux_weight_at(s, 100), 0.0);
  EXPECT_NEAR(aux_weight_at(s, 125), 5e-4, 1e-18);
  EXPECT_EQ(aux_weight_at(s, 150), 1e-3);
  EXPECT_EQ(aux_weight_at(s, 250), 1e-3);
  EXPECT_NEAR(aux_weight_at(s, 350), 7.5e-4, 1e-18);
  EXPECT_EQ(aux_weight_at(s, 450), 5e-4);
  EXPECT_EQ(aux_weight_at(s, 100000), 5e-4);
}

TEST(AuxSchedule, CosineDecayMidpointAndContinuity) {
  AuxSchedule s;
  s.ramp_len = 10;
  s.hold_len = 5;
  s.decay_len = 40;
  s.decay_kind = DecayKind::cosine;
  s.target = 2.0;
  s.final_fraction = 0.25;
  EXPECT_NEAR(aux_weight_at(s, 35), 0.5 + 1.5 * 0.5, 1e-14);
  // Adjacent epochs differ by at most one ramp increment on [start, inf).
  double max_jump = 0.0;
  for (long e = 1; e < 200; ++e) {
    max_jump = std::max(max_jump, std::abs(aux_weight_at(s, e) - aux_weight_at(s, e - 1)));
  }
  EXPECT_LE(max_jump, 2.0 / 10 + 1e-12);
  EXPECT_EQ(aux_weight_at(s, 55), 0.5);
}

TEST(AuxSchedule, FixedIsConstant) {
  const AuxSchedule s = AuxSchedule::fixed(5e-4, 3);
  EXPECT_EQ(aux_weight_at(s, 2), 0.0);
  for (long e : {3L, 4L, 1000L, 100000L}) EXPECT_EQ(aux_weight_at(s, e), 5e-4);
}

TEST(AuxSchedule, ScheduledShellEndpoints) {
  // 1e-3 at the start decaying linearly to 5e-4 at the end of training.
  AuxSchedule s;
  s.decay_len = 2000;
  s.target = 1e-3;
  s.final_fraction = 0.5;
  EXPECT_EQ(aux_weight_at(s, 0), 1e-3);
  EXPECT_EQ(aux_weight_at(s, 2000), 5e-4);
}
