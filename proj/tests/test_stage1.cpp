#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "fd_oracle.hpp"
#include "hpinn/sampling.hpp"
#include "hpinn/stage1.hpp"

namespace hpinn::stage1 {
namespace {

using testing::close_rel;
constexpr double kPi = std::numbers::pi;

double eval_at(const NetworkParams& net, double x, double y) {
  const double p[2] = {x, y};
  return eval(net, p);
}

NetworkParams zero_net() {
  NetworkParams net = init_mlp({2, 8, 8, 1}, Activation::tanh, 0);
  net.assign(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(net.num_params())));
  return net;
}

/// Smooth field that does not solve the Poisson problem, so its residual
/// gradient is nonzero everywhere: u = exp(0.7 x) cos(1.3 y) + x^2 y.
AnalyticField smooth_non_solution() {
  return AnalyticField(2, [](const Partial& p, const double* x) {
    int nx = 0;
    int ny = 0;
    for (int k = 0; k < p.order(); ++k) (p.dim(k) == 0 ? nx : ny) += 1;
    const double ex = std::pow(0.7, nx) * std::exp(0.7 * x[0]);
    const double cy = std::pow(1.3, ny) * std::cos(1.3 * x[1] + 0.5 * kPi * ny);
    double poly = 0.0;  // derivatives of x^2 y
    if (nx == 0 && ny == 0) poly = x[0] * x[0] * x[1];
    if (nx == 1 && ny == 0) poly = 2.0 * x[0] * x[1];
    if (nx == 0 && ny == 1) poly = x[0] * x[0];
    if (nx == 2 && ny == 0) poly = 2.0 * x[1];
    if (nx == 1 && ny == 1) poly = 2.0 * x[0];
    if (nx == 2 && ny == 1) poly = 2.0;
    return ex * cy + poly;
  });
}

TEST(ExactSolution, KnownValues) {
  EXPECT_EQ(exact_solution(0.0, 0.0), 0.0);
  EXPECT_NEAR(exact_solution(0.5, 0.5), 1.0, 1e-15);
  EXPECT_NEAR(exact_solution(0.25, 0.5), std::sqrt(2.0) / 2.0, 1e-15);
}

TEST(Forcing, KnownValuesAndFiniteDifferenceLaplacian) {
  EXPECT_EQ(forcing(0.0, 0.0), 0.0);
  EXPECT_NEAR(forcing(0.5, 0.5), -2.0 * kPi * kPi, 1e-12);
  Rng rng(3);
  const double h = 1e-4;
  for (int i = 0; i < 50; ++i) {
    const double x = rng.uniform();
    const double y = rng.uniform();
    const double lap = (exact_solution(x + h, y) + exact_solution(x - h, y) +
                        exact_solution(x, y + h) + exact_solution(x, y - h) -
                        4.0 * exact_solution(x, y)) /
                       (h * h);
    EXPECT_NEAR(forcing(x, y), lap, 1e-5);
  }
}

TEST(ExactField, DerivativesMatchFiniteDifferences) {
  const AnalyticField f = exact_field();
  const testing::ScalarFn u = [](const Eigen::VectorXd& p) { return exact_solution(p(0), p(1)); };
  const JetLayout layout = residual_gradient_layout();
  Rng rng(5);
  for (int i = 0; i < 10; ++i) {
    Eigen::VectorXd p(2);
    p << rng.uniform(), rng.uniform();
    const Eigen::MatrixXd j = f.jets(p, layout);
    EXPECT_TRUE(close_rel(j(layout.index(Partial::d(0)), 0), testing::fd_first(u, p, 0), 1e-8, 1.0));
    EXPECT_TRUE(close_rel(j(layout.index(Partial::d(1, 1)), 0), testing::fd_second(u, p, 1), 1e-6, 1.0));
    EXPECT_TRUE(close_rel(j(layout.index(Partial::d(0, 0, 0)), 0), testing::fd_third(u, p, 0), 1e-6, 10.0));
    EXPECT_TRUE(close_rel(j(layout.index(Partial::d(0, 1, 1)), 0),
                          testing::fd_mixed_third(u, p, 0, 1), 1e-6, 10.0));
  }
}

TEST(Residual, ExactFieldIsZero) {
  const AnalyticField f = exact_field();
  const Eigen::MatrixXd pts = sobol_points(2, 256, 1);
  EXPECT_LT(residuals(f, pts).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Residual, ZeroNetworkGivesMinusForcing) {
  const NetworkParams net = zero_net();
  const NetworkField f(net);
  const Eigen::MatrixXd pts = sobol_points(2, 32, 2);
  const Eigen::VectorXd r = residuals(f, pts);
  for (Eigen::Index i = 0; i < pts.cols(); ++i) EXPECT_EQ(r(i), -forcing(pts(0, i), pts(1, i)));
}

TEST(Residual, RandomNetworkMatchesFiniteDifferenceLaplacian) {
  const NetworkParams net = init_mlp({2, 16, 16, 1}, Activation::tanh, 9);
  const NetworkField f(net);
  const testing::ScalarFn u = [&](const Eigen::VectorXd& p) { return eval_at(net, p(0), p(1)); };
  Rng rng(10);
  for (int i = 0; i < 10; ++i) {
    Eigen::VectorXd p(2);
    p << rng.uniform(), rng.uniform();
    const double lap = testing::fd_second(u, p, 0) + testing::fd_second(u, p, 1);
    EXPECT_TRUE(close_rel(residual(f, p(0), p(1)), lap - forcing(p(0), p(1)), 1e-6, 1.0));
  }
}

TEST(ResidualGradient, RandomNetworkMatchesFiniteDifferences) {
  const NetworkParams net = init_mlp({2, 12, 12, 1}, Activation::silu, 19);
  const NetworkField f(net);
  const testing::ScalarFn r = [&](const Eigen::VectorXd& p) { return residual(f, p(0), p(1)); };
  Rng rng(11);
  Eigen::MatrixXd pts(2, 6);
  for (int i = 0; i < 6; ++i) pts.col(i) << rng.uniform(), rng.uniform();
  const Eigen::MatrixXd g = residual_gradients(f, pts);
  for (int i = 0; i < 6; ++i) {
    const Eigen::VectorXd p = pts.col(i);
    EXPECT_TRUE(close_rel(g(0, i), testing::fd_first(r, p, 0, 1e-3), 1e-6, 1.0));
    EXPECT_TRUE(close_rel(g(1, i), testing::fd_first(r, p, 1, 1e-3), 1e-6, 1.0));
  }
}

TEST(Cloud, InsideSquareSeededAndSplitOverSides) {
  const Cloud a = make_cloud(100, 40, 4);
  const Cloud b = make_cloud(100, 40, 4);
  EXPECT_EQ(a.interior, b.interior);
  EXPECT_EQ(a.boundary, b.boundary);
  EXPECT_GE(a.interior.minCoeff(), 0.0);
  EXPECT_LE(a.interior.maxCoeff(), 1.0);
  int on_side[4] = {0, 0, 0, 0};
  for (Eigen::Index i = 0; i < a.boundary.cols(); ++i) {
    const double x = a.boundary(0, i);
    const double y = a.boundary(1, i);
    on_side[0] += y == 0.0;
    on_side[1] += x == 1.0;
    on_side[2] += y == 1.0;
    on_side[3] += x == 0.0;
  }
  for (int s : on_side) EXPECT_GE(s, 10);
  EXPECT_THROW(make_cloud(0, 4, 0), std::invalid_argument);
}

TEST(BaseLosses, ExactFieldIsZero) {
  const BaseLosses l = base_losses(exact_field(), make_cloud(200, 80, 1));
  EXPECT_LT(l.pde, 1e-24);
  EXPECT_LT(l.bc, 1e-28);
}

TEST(BaseLosses, SinglePointResidualTwo) {
  // c (x^2 + y^2) has Laplacian 4c = f(p) + 2 at p.
  const double px = 0.3;
  const double py = 0.6;
  const double c = (forcing(px, py) + 2.0) / 4.0;
  const AnalyticField f(2, [c](const Partial& p, const double* x) {
    if (p.order() == 0) return c * (x[0] * x[0] + x[1] * x[1]);
    if (p.order() == 1) return 2.0 * c * x[p.dim(0)];
    if (p.order() == 2 && p.dim(0) == p.dim(1)) return 2.0 * c;
    return 0.0;
  });
  Cloud cloud;
  cloud.interior.resize(2, 1);
  cloud.interior << px, py;
  cloud.boundary = Eigen::MatrixXd::Zero(2, 1);
  EXPECT_NEAR(base_losses(f, cloud).pde, 4.0, 1e-12);
}

TEST(BaseLosses, RandomNetworkMatchesResummation) {
  const NetworkParams net = init_mlp({2, 10, 10, 1}, Activation::tanh, 2);
  const NetworkField f(net);
  const Cloud cloud = make_cloud(64, 32, 8);
  const BaseLosses l = base_losses(f, cloud);
  const testing::ScalarFn u = [&](const Eigen::VectorXd& p) { return eval_at(net, p(0), p(1)); };
  double pde = 0.0;
  for (Eigen::Index i = 0; i < cloud.interior.cols(); ++i) {
    const Eigen::VectorXd p = cloud.interior.col(i);
    const double r = testing::fd_second(u, p, 0) + testing::fd_second(u, p, 1) - forcing(p(0), p(1));
    pde += r * r;
  }
  pde /= 64.0;
  double bc = 0.0;
  for (Eigen::Index i = 0; i < cloud.boundary.cols(); ++i) {
    const double x = cloud.boundary(0, i);
    const double y = cloud.boundary(1, i);
    bc += std::pow(eval_at(net, x, y) - exact_solution(x, y), 2);
  }
  bc /= 32.0;
  EXPECT_TRUE(close_rel(l.pde, pde, 1e-6, 1e-6));
  EXPECT_NEAR(l.bc, bc, 1e-14);
}

TEST(FdResgrad, ConstantAndZeroFields) {
  EXPECT_EQ(fd_resgrad_loss(Eigen::MatrixXd::Constant(9, 7, 3.25), 0.1), 0.0);
  EXPECT_EQ(fd_resgrad_loss(Eigen::MatrixXd::Zero(5, 5), 0.1), 0.0);
  EXPECT_THROW(fd_resgrad_loss(Eigen::MatrixXd::Zero(2, 5), 0.1), std::invalid_argument);
  EXPECT_THROW(fd_resgrad_loss(Eigen::MatrixXd::Zero(5, 5), 0.0), std::invalid_argument);
}

TEST(FdResgrad, LinearFieldIsExact) {
  for (auto [a, b, h] : {std::tuple{1.5, -0.75, 1.0 / 63}, std::tuple{-3.0, 2.0, 0.01}}) {
    Eigen::MatrixXd r(20, 13);
    for (int j = 0; j < 13; ++j) {
      for (int i = 0; i < 20; ++i) r(i, j) = a * (0.1 + i * h) + b * (0.2 + j * h);
    }
    EXPECT_NEAR(fd_resgrad_loss(r, h), a * a + b * b, 1e-12 * (a * a + b * b));
  }
}

TEST(FdResgrad, SensitivityMatchesFiniteDifferences) {
  Rng rng(4);
  Eigen::MatrixXd r(6, 5);
  for (Eigen::Index k = 0; k < r.size(); ++k) r(k) = rng.uniform(-1.0, 1.0);
  Eigen::MatrixXd d;
  fd_resgrad_loss(r, 0.2, &d);
  const double eps = 1e-6;
  for (Eigen::Index k = 0; k < r.size(); ++k) {
    Eigen::MatrixXd rp = r;
    Eigen::MatrixXd rm = r;
    rp(k) += eps;
    rm(k) -= eps;
    EXPECT_NEAR(d(k), (fd_resgrad_loss(rp, 0.2) - fd_resgrad_loss(rm, 0.2)) / (2 * eps), 1e-6);
  }
}

TEST(AdResgrad, ExactFieldZeroAndZeroNetworkGivesForcingGradient) {
  const Eigen::MatrixXd nodes = build_aux_bank(GridStrategy::fixed_safe, 32, 0).grids[0].nodes();
  EXPECT_LE(ad_resgrad_loss(exact_field(), nodes), 1e-18);
  const NetworkParams net = zero_net();
  double oracle = 0.0;
  for (Eigen::Index i = 0; i < nodes.cols(); ++i) {
    const auto g = forcing_gradient(nodes(0, i), nodes(1, i));
    oracle += g[0] * g[0] + g[1] * g[1];
  }
  oracle /= static_cast<double>(nodes.cols());
  EXPECT_TRUE(close_rel(ad_resgrad_loss(NetworkField(net), nodes), oracle, 1e-13, 1.0));
  // At y = 1/2 the second mode carries sin(pi) = 0, leaving -2 pi^3 cos(pi/4).
  const auto g = forcing_gradient(0.25, 0.5);
  EXPECT_NEAR(g[0], -2.0 * kPi * kPi * kPi * std::cos(kPi / 4), 1e-10);
}

/// |FD - AD| on the same nodes of a fixed square patch, for spacing h.
double fd_ad_gap(const Field& f, double h) {
  const int n = static_cast<int>(std::lround(0.5 / h)) + 1;
  const AuxGrid grid{0.25, 0.25, h, n, n};
  return std::abs(fd_resgrad_on_grid(f, grid) - ad_resgrad_loss(f, grid.interior_nodes()));
}

TEST(FdAdGap, ShrinksAtSecondOrder) {
  const AnalyticField f = smooth_non_solution();
  const double g1 = fd_ad_gap(f, 1.0 / 32);
  const double g2 = fd_ad_gap(f, 1.0 / 64);
  const double g3 = fd_ad_gap(f, 1.0 / 128);
  EXPECT_GT(g1, 0.0);
  EXPECT_GE(std::log2(g1 / g2), 1.9);
  EXPECT_GE(std::log2(g2 / g3), 1.9);
}

TEST(MatchAdWeight, Formula) {
  EXPECT_EQ(match_ad_weight(1e-3, 3.0, 3.0), 1e-3);
  EXPECT_EQ(match_ad_weight(1e-3, 2.0, 4.0), 5e-4);
  EXPECT_EQ(match_ad_weight(2e-3, 2.0, 4.0), 2.0 * match_ad_weight(1e-3, 2.0, 4.0));
  EXPECT_THROW(match_ad_weight(1e-3, 1.0, 0.0), std::invalid_argument);
  EXPECT_THROW(match_ad_weight(1e-3, 1.0, -1.0), std::invalid_argument);
}

TEST(AuxBank, PhaseSafeForEveryStrategy) {
  for (GridStrategy s : {GridStrategy::fixed_safe, GridStrategy::cycle4, GridStrategy::jitter4}) {
    for (int n : {8, 16, 64, 65}) {
      const AuxBank bank = build_aux_bank(s, n, 123);
      EXPECT_EQ(bank.grids.size(), s == GridStrategy::fixed_safe ? 1u : 4u);
      for (const AuxGrid& g : bank.grids) {
        EXPECT_EQ(g.nx, n - 2);
        EXPECT_EQ(g.h, 1.0 / (n - 1));
        const Eigen::MatrixXd p = g.nodes();
        // Every stored node is used as a stencil neighbour, so all must be inside.
        EXPECT_GT(p.minCoeff(), 0.0);
        EXPECT_LT(p.maxCoeff(), 1.0);
      }
    }
  }
  EXPECT_THROW(build_aux_bank(GridStrategy::fixed_safe, 7, 0), std::invalid_argument);
  EXPECT_THROW(build_aux_bank(GridStrategy::fixed_safe, 64, 0.1, 0), std::invalid_argument);
}

TEST(AuxBank, Cycle4HalfCellOffsetsAndRotation) {
  const AuxBank bank = build_aux_bank(GridStrategy::cycle4, 64, 0);
  const double h = 1.0 / 63;
  const double off[4][2] = {{0, 0}, {h / 2, 0}, {0, h / 2}, {h / 2, h / 2}};
  for (int b = 0; b < 4; ++b) {
    EXPECT_NEAR(bank.grids[b].x0, h + off[b][0], 1e-15);
    EXPECT_NEAR(bank.grids[b].y0, h + off[b][1], 1e-15);
  }
  for (long e = 0; e < 12; ++e) EXPECT_EQ(&bank.for_epoch(e), &bank.grids[e % 4]);
}

TEST(AuxBank, Jitter4IsSeeded) {
  const AuxBank a = build_aux_bank(GridStrategy::jitter4, 64, 5);
  const AuxBank b = build_aux_bank(GridStrategy::jitter4, 64, 5);
  const AuxBank c = build_aux_bank(GridStrategy::jitter4, 64, 6);
  const double h = 1.0 / 63;
  for (int k = 0; k < 4; ++k) {
    EXPECT_EQ(a.grids[k].x0, b.grids[k].x0);
    EXPECT_EQ(a.grids[k].y0, b.grids[k].y0);
    EXPECT_GE(a.grids[k].x0, h);
    EXPECT_LE(a.grids[k].x0, 1.5 * h);
  }
  EXPECT_NE(a.grids[0].x0, c.grids[0].x0);
}

TEST(Compatibility, ExactFieldVanishesOnEveryBank) {
  const AnalyticField f = exact_field();
  for (GridStrategy s : {GridStrategy::fixed_safe, GridStrategy::cycle4, GridStrategy::jitter4}) {
    for (const AuxGrid& g : build_aux_bank(s, 64, 77).grids) {
      EXPECT_LE(fd_resgrad_on_grid(f, g), 1e-18);
      EXPECT_LE(ad_resgrad_loss(f, g.interior_nodes()), 1e-18);
    }
  }
}

TEST(Audit, ExactFieldAndZeroNetwork) {
  const Metrics exact = audit_stage1(exact_field(), 0, 1024);
  EXPECT_LT(exact.rel_l2_u, 1e-14);
  EXPECT_LT(exact.rel_l2_grad_u, 1e-14);
  EXPECT_LT(exact.residual_rmse, 1e-11);
  EXPECT_LT(exact.grad_r_rmse, 1e-10);
  const NetworkParams net = zero_net();
  const Metrics zero = audit_stage1(NetworkField(net), 0, 1024);
  EXPECT_EQ(zero.rel_l2_u, 1.0);
  EXPECT_EQ(zero.rel_l2_grad_u, 1.0);
}

TEST(Audit, InvariantToPointOrderAndMatchesResummation) {
  const NetworkParams net = init_mlp({2, 8, 8, 1}, Activation::tanh, 4);
  const NetworkField f(net);
  const Eigen::MatrixXd pts = audit_points(3, 512);
  Eigen::MatrixXd rev = pts.rowwise().reverse();
  const Metrics a = audit_on_points(f, pts, 16);
  const Metrics b = audit_on_points(f, rev, 16);
  EXPECT_EQ(a.rel_l2_u, b.rel_l2_u);
  EXPECT_EQ(a.rel_l2_grad_u, b.rel_l2_grad_u);
  EXPECT_EQ(a.residual_rmse, b.residual_rmse);
  EXPECT_EQ(a.grad_r_rmse, b.grad_r_rmse);
  double du = 0.0;
  double uu = 0.0;
  for (Eigen::Index i = 0; i < pts.cols(); ++i) {
    const double ex = exact_solution(pts(0, i), pts(1, i));
    du += std::pow(eval_at(net, pts(0, i), pts(1, i)) - ex, 2);
    uu += ex * ex;
  }
  EXPECT_NEAR(a.rel_l2_u, std::sqrt(du / uu), 1e-12);
  // The audit set is the shifted Sobol sequence for the seed.
  EXPECT_EQ(audit_stage1(f, 3, 512, 16).rel_l2_u, a.rel_l2_u);
}

Config tiny_config(Arm arm) {
  Config cfg;
  cfg.arm = arm;
  cfg.hidden = {8, 8};
  cfg.epochs = 6;
  cfg.lr = {1e-3, 1e-5, 6};
  cfg.aux_n = 12;
  cfg.n_interior = 48;
  cfg.n_boundary = 16;
  cfg.n_val_interior = 24;
  cfg.n_val_boundary = 8;
  cfg.n_audit = 64;
  cfg.validate_every = 2;
  return cfg;
}

/// Parameter gradient of a Stage-1 objective against a parameter-space FD oracle.
void check_objective_gradient(const Objective& obj, const NetworkParams& net) {
  const auto lg = loss_param_gradient(net, obj.groups, obj.functional);
  const Eigen::VectorXd fd = testing::fd_gradient(
      [&](const Eigen::VectorXd& t) {
        NetworkParams n2 = net;
        n2.assign(t);
        return loss_value(n2, obj.groups, obj.functional);
      },
      net.flatten(), 1e-4);
  const double scale = fd.cwiseAbs().maxCoeff();
  for (Eigen::Index k = 0; k < fd.size(); ++k) {
    EXPECT_TRUE(close_rel(lg.grad(k), fd(k), 1e-5, 1e-3 * scale)) << "param " << k;
  }
}

TEST(Objective, FdAndAdTermsHaveCorrectParameterGradients) {
  const Config cfg = tiny_config(Arm::fd_fixed);
  const NetworkParams net = init_mlp({2, 6, 6, 1}, Activation::tanh, 8);
  const Cloud cloud = make_cloud(12, 8, 2);
  const AuxGrid grid = build_aux_bank(GridStrategy::cycle4, 8, 0).grids[3];
  check_objective_gradient(make_objective(cfg, cloud, &grid, 0.3, false), net);
  check_objective_gradient(make_objective(cfg, cloud, &grid, 0.3, true), net);
}

TEST(Objective, AuxTermsEqualStandaloneOperators) {
  const Config cfg = tiny_config(Arm::fd_fixed);
  const NetworkParams net = init_mlp({2, 6, 6, 1}, Activation::tanh, 8);
  const NetworkField f(net);
  const Cloud cloud = make_cloud(12, 8, 2);
  const AuxGrid grid = build_aux_bank(GridStrategy::fixed_safe, 10, 0).grids[0];
  const BaseLosses base = base_losses(f, cloud);
  const Objective fd = make_objective(cfg, cloud, &grid, 0.5, false);
  const Objective ad = make_objective(cfg, cloud, &grid, 0.5, true);
  EXPECT_NEAR(loss_value(net, fd.groups, fd.functional),
              base.pde + base.bc + 0.5 * fd_resgrad_on_grid(f, grid), 1e-10);
  EXPECT_NEAR(loss_value(net, ad.groups, ad.functional),
              base.pde + base.bc + 0.5 * ad_resgrad_loss(f, grid.interior_nodes()), 1e-10);
}

TEST(Schedule, LinearArmDefaultsAndFixedArms) {
  Config cfg = tiny_config(Arm::fd_linear);
  cfg.epochs = 1000;
  const AuxSchedule s = aux_schedule(cfg);
  EXPECT_EQ(s.ramp_len, 100);
  EXPECT_EQ(s.hold_len, 400);
  EXPECT_EQ(s.decay_len, 400);
  EXPECT_EQ(aux_weight_at(s, 100), cfg.aux_weight);
  EXPECT_NEAR(aux_weight_at(s, 1000), 0.1 * cfg.aux_weight, 1e-18);
  cfg.arm = Arm::fd_fixed;
  EXPECT_EQ(aux_weight_at(aux_schedule(cfg), 999), cfg.aux_weight);
  cfg.arm = Arm::off;
  EXPECT_EQ(aux_weight_at(aux_schedule(cfg), 10), 0.0);
}

TEST(Train, ZeroEpochsReportsInitialState) {
  Config cfg = tiny_config(Arm::fd_fixed);
  cfg.epochs = 0;
  const Result r = train_stage1(cfg);
  EXPECT_FALSE(r.train.failed);
  EXPECT_EQ(r.train.best_epoch, 0);
  EXPECT_EQ(r.train.best.flatten(), r.train.final.flatten());
  EXPECT_GT(r.metrics.rel_l2_u, 0.0);
}

TEST(Train, DeterministicAndImproves) {
  for (Arm arm : {Arm::off, Arm::fd_linear, Arm::ad_fixed}) {
    const Config cfg = tiny_config(arm);
    const Result a = train_stage1(cfg);
    const Result b = train_stage1(cfg);
    EXPECT_EQ(a.train.final.flatten(), b.train.final.flatten());
    EXPECT_EQ(a.train.best_val, b.train.best_val);
    EXPECT_EQ(a.metrics.residual_rmse, b.metrics.residual_rmse);
    EXPECT_EQ(a.ad_scale, b.ad_scale);
    EXPECT_LE(a.train.best_val, a.train.history.front().val_loss);
    EXPECT_EQ(a.ad_scale > 0.0, arm == Arm::ad_fixed);
  }
}

TEST(Train, DivergenceIsRecorded) {
  Config cfg = tiny_config(Arm::off);
  cfg.lr = {1e300, 1e300, 6};
  const Result r = train_stage1(cfg);
  EXPECT_TRUE(r.train.failed);
  EXPECT_GE(r.train.last_finite_epoch, 0);
  EXPECT_FALSE(r.train.failure.empty());
}

}  // namespace
}  // namespace hpinn::stage1
