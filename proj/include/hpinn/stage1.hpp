#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "hpinn/diffnet.hpp"
#include "hpinn/field.hpp"
#include "hpinn/optim.hpp"
#include "hpinn/training.hpp"

/// Manufactured Poisson problem on the unit square:
///   u*(x, y) = sin(pi x) sin(pi y) + 0.2 sin(3 pi x) sin(2 pi y),  Laplace(u) = f,
/// with Dirichlet data u = u* on the boundary.
namespace hpinn::stage1 {

double exact_solution(double x, double y);
double forcing(double x, double y);
std::array<double, 2> forcing_gradient(double x, double y);

/// Closed-form u* with every partial derivative up to third order.
AnalyticField exact_field();

/// Channels needed for the residual (u_xx, u_yy).
JetLayout residual_layout();
/// Channels needed for the residual gradient (third derivatives of u).
JetLayout residual_gradient_layout();

/// R = u_xx + u_yy - f at each column of `points` (2 x n).
Eigen::VectorXd residuals(const Field& field, const Eigen::MatrixXd& points);
double residual(const Field& field, double x, double y);
/// grad R at each point, 2 x n.
Eigen::MatrixXd residual_gradients(const Field& field, const Eigen::MatrixXd& points);

struct Cloud {
  Eigen::MatrixXd interior;  // 2 x n, open unit square
  Eigen::MatrixXd boundary;  // 2 x m, on the boundary, split evenly over the four sides
};

Cloud make_cloud(int n_interior, int n_boundary, std::uint64_t seed);

struct BaseLosses {
  double pde = 0.0;
  double bc = 0.0;
};

BaseLosses base_losses(const Field& field, const Cloud& cloud);

/// Mean over interior grid nodes of (D_x r)^2 + (D_y r)^2 with second-order
/// central differences. `r(i, j)` is the residual at (x0 + i h, y0 + j h);
/// the outermost grid lines are excluded. If `d_r` is given it receives
/// dLoss/dr with the same shape.
double fd_resgrad_loss(const Eigen::MatrixXd& r, double h, Eigen::MatrixXd* d_r = nullptr);

/// Mean of |grad R|^2 over `nodes` (2 x n) using exact third derivatives.
double ad_resgrad_loss(const Field& field, const Eigen::MatrixXd& nodes);

/// lambda_AD = lambda_FD_anchor * S_FD / S_AD.
double match_ad_weight(double lambda_fd_anchor, double s_fd, double s_ad);

enum class GridStrategy { fixed_safe, cycle4, jitter4 };
std::string to_string(GridStrategy s);
GridStrategy grid_strategy_from_string(const std::string& name);

/// Uniform auxiliary grid with nodes (x0 + i h, y0 + j h), i < nx, j < ny.
struct AuxGrid {
  double x0 = 0.0;
  double y0 = 0.0;
  double h = 0.0;
  int nx = 0;
  int ny = 0;

  /// 2 x (nx * ny), node (i, j) at column i + nx * j.
  Eigen::MatrixXd nodes() const;
  /// Nodes that carry a full central stencil (outer lines dropped).
  Eigen::MatrixXd interior_nodes() const;
};

/// One or more auxiliary grids built from an n-point family of spacing h:
/// the ring of nodes on the unit-square boundary is cropped, and every bank is
/// the cropped (n-2) x (n-2) grid shifted by a phase offset in [0, h/2]^2, so
/// all stencil support stays strictly inside the domain for every phase.
struct AuxBank {
  GridStrategy strategy = GridStrategy::fixed_safe;
  int n = 0;
  double h = 0.0;
  std::vector<AuxGrid> grids;

  /// Bank used at `epoch` (cycle4/jitter4 rotate deterministically).
  const AuxGrid& for_epoch(long epoch) const;
};

AuxBank build_aux_bank(GridStrategy strategy, int n, double h, std::uint64_t seed);
/// Default family spacing h = 1 / (n - 1).
AuxBank build_aux_bank(GridStrategy strategy, int n, std::uint64_t seed);

/// FD regularizer value of `field` on `grid`.
double fd_resgrad_on_grid(const Field& field, const AuxGrid& grid);

enum class Arm { off, fd_fixed, fd_linear, ad_fixed, ad_linear };
std::string to_string(Arm a);
Arm arm_from_string(const std::string& name);

struct Config {
  Arm arm = Arm::off;
  std::vector<int> hidden = {32, 32, 32, 32};
  Activation activation = Activation::tanh;
  OptimizerKind optimizer = OptimizerKind::adam999;
  LrSchedule lr{1e-3, 1e-5, 3000};
  long epochs = 3000;
  double lambda_bc = 1.0;
  /// Target FD weight; also the anchor for matched AD arms.
  double aux_weight = 1e-3;
  long aux_start = 0;
  long aux_ramp = 0;
  long aux_hold = 0;
  long aux_decay = 0;
  DecayKind aux_decay_kind = DecayKind::linear;
  double aux_final_fraction = 0.1;
  GridStrategy grid = GridStrategy::fixed_safe;
  int aux_n = 64;
  int n_interior = 1024;
  int n_boundary = 256;
  int n_val_interior = 512;
  int n_val_boundary = 128;
  int n_audit = 4096;
  std::uint64_t init_seed = 0;
  std::uint64_t cloud_seed = 0;
  std::uint64_t audit_seed = 0;
  long validate_every = 100;
  EvalOptions eval;
};

/// Auxiliary schedule implied by the arm (fixed arms ignore ramp/hold/decay).
AuxSchedule aux_schedule(const Config& cfg);

struct Metrics {
  double best_val = 0.0;
  double rel_l2_u = 0.0;
  double rel_l2_grad_u = 0.0;
  double residual_rmse = 0.0;
  double grad_r_rmse = 0.0;
  /// FD regularizer on the four half-cell shifted grids.
  std::array<double, 4> shifted_fd_rg{};
};

/// Fresh low-discrepancy audit of `field` against u*; best_val is left at 0.
Metrics audit_stage1(const Field& field, std::uint64_t audit_seed, int n_points, int aux_n = 64);
/// Same metrics on caller-supplied audit points (2 x n).
Metrics audit_on_points(const Field& field, const Eigen::MatrixXd& pts, int aux_n = 64);
/// The audit point set used by audit_stage1.
Eigen::MatrixXd audit_points(std::uint64_t audit_seed, int n_points);

struct Result {
  TrainOutcome train;
  Metrics metrics;
  /// Matched AD weight scale S_FD / S_AD (AD arms only, else 0).
  double ad_scale = 0.0;
};

Result train_stage1(const Config& cfg);

/// Composite training objective L_PDE + lambda_bc L_BC + lambda_aux L_aux.
/// `grid` may be null (no auxiliary term).
using Objective = hpinn::Objective;

Objective make_objective(const Config& cfg, const Cloud& cloud, const AuxGrid* grid,
                         double lambda_aux, bool use_ad);

/// Validation objective L_PDE + lambda_bc L_BC (no auxiliary term).
Objective make_validation_objective(const Config& cfg, const Cloud& cloud);

}  // namespace hpinn::stage1
