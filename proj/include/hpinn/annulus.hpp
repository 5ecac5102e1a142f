#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "hpinn/diffnet.hpp"
#include "hpinn/field.hpp"
#include "hpinn/geometry.hpp"
#include "hpinn/optim.hpp"
#include "hpinn/training.hpp"
#include "hpinn/wall_slice.hpp"

/// Steady heat conduction in the wavy annulus. Fields take physical (r, theta, z)
/// inputs. Inner wall and inlet at T = 1, insulated outlet, prescribed outer-wall
/// flux dT/dn = q(z), periodic in theta.
namespace hpinn::stage2 {

/// Affine normalization of (r, theta, z) onto roughly [-1, 1]^3 for the network.
InputMap input_map(const AnnulusGeometry& g);

/// Channels for the cylindrical Laplacian (T_r and the three pure seconds).
JetLayout residual_layout();

/// T_rr + T_r / r + T_thth / r^2 + T_zz at each column (r, theta, z) of `pts`.
Eigen::VectorXd cylindrical_residuals(const Field& field, const Eigen::MatrixXd& pts);
double cylindrical_residual(const Field& field, double r, double theta, double z);

/// Gradient dotted with the unit outward normal of r - r_o(theta) = 0:
/// (T_r - r_o' T_theta / r^2) / sqrt(1 + (r_o' / r)^2).
double wall_normal_from_partials(double t_r, double t_theta, double r, double ro_prime);

/// dT/dn on the outer wall at each column (theta, z) of `theta_z`.
Eigen::VectorXd wall_normal_derivatives(const Field& field, const AnnulusGeometry& g,
                                        const Eigen::MatrixXd& theta_z);
double wall_normal_derivative(const Field& field, const AnnulusGeometry& g, double theta, double z);

struct CloudSizes {
  int interior = 4000;
  int per_boundary = 2000;
  int pairs = 400;

  static CloudSizes training() { return {4000, 2000, 400}; }
  static CloudSizes validation() { return {1024, 512, 200}; }
};

/// Collocation points, each 3 x n in physical (r, theta, z). Sampled uniformly in
/// (s, theta, z) and mapped. periodic_a(:, p) and periodic_b(:, p) share (s, z)
/// and sit at theta = 0 and theta = 2 pi.
struct Cloud {
  Eigen::MatrixXd interior;
  Eigen::MatrixXd inner;
  Eigen::MatrixXd inlet;
  Eigen::MatrixXd outlet;
  Eigen::MatrixXd outer;
  Eigen::MatrixXd periodic_a;
  Eigen::MatrixXd periodic_b;
};

Cloud make_cloud(const AnnulusGeometry& g, const CloudSizes& sizes, std::uint64_t seed);

enum class Term { pde, inner, inlet, outlet, outer, periodic };
inline constexpr std::array<const char*, 6> kTermNames = {"pde",   "inner", "inlet",
                                                           "outlet", "outer", "periodic"};

using TermWeights = std::array<double, 6>;
inline constexpr TermWeights kUnitWeights = {1, 1, 1, 1, 1, 1};

struct TermBreakdown {
  std::array<double, 6> mean_square{};  // unweighted per-term mean squares
  double total = 0.0;                   // weighted sum
};

/// The six-term objective in physical coordinates. `breakdown`, if given, is
/// filled every time the functional runs.
Objective six_term_objective(const AnnulusGeometry& g, const FluxProfile& q, const Cloud& cloud,
                             const TermWeights& w, TermBreakdown* breakdown = nullptr);

TermBreakdown six_term_loss(const Field& field, const AnnulusGeometry& g, const FluxProfile& q,
                            const Cloud& cloud, const TermWeights& w = kUnitWeights);

struct ShellSpec {
  double s_lo = 0.75;
  double s_hi = 0.98;
  int n_s = 8;
  int n_theta = 32;
  int n_z = 32;
  /// Angle of node j = 0; the theta lines are theta_offset + 2 pi j / n_theta.
  double theta_offset = 0.0;
};

/// Body-fitted shell: s_i uniform on [s_lo, s_hi], periodic theta_j, and z_k at
/// the n_z strictly interior points of a uniform split of [0, L] into n_z + 1
/// cells. Node (i, j, k) is column i + n_s (j + n_theta k).
struct ShellBank {
  ShellSpec spec;
  Eigen::VectorXd s;
  Eigen::VectorXd theta;
  Eigen::VectorXd z;
  double ds = 0.0;
  double dtheta = 0.0;
  double dz = 0.0;
  Eigen::MatrixXd points;    // 3 x N physical nodes
  Eigen::VectorXd h_theta;   // per node, sqrt(r^2 + (s r_o')^2)
  Eigen::VectorXd gap;       // per theta line, r_o - r_min
  Eigen::VectorXd weights;   // per node; zero on the s and z boundary lines

  int size() const { return spec.n_s * spec.n_theta * spec.n_z; }
  int index(int i, int j, int k) const { return i + spec.n_s * (j + spec.n_theta * k); }
};

ShellBank build_shell_bank(const AnnulusGeometry& g, const ShellSpec& spec = {});

/// Weighted mean of (D_r R)^2 + (D_theta R / h_theta)^2 + (D_z R)^2 over interior
/// nodes from residual samples R (one per bank node). `d_r` receives dL/dR.
double shell_loss_from_residuals(const ShellBank& bank, const Eigen::VectorXd& r,
                                 Eigen::VectorXd* d_r = nullptr);

/// Shell regularizer of `field`; unweighted, so this is also the shell probe.
double shell_resgrad_loss(const Field& field, const ShellBank& bank);

/// Shell regularizer as an objective on the bank nodes (unit weight).
Objective shell_objective(const ShellBank& bank);

/// RMS of dT/dn - q over an n_theta x n_z wall grid (theta periodic, z in [0, L]).
double wall_bc_audit(const Field& field, const AnnulusGeometry& g, const FluxProfile& q,
                     int n_theta = 128, int n_z = 128);

struct WallComparison {
  double t_wall_rmse = 0.0;
  double dtdn_wall_rmse = 0.0;
  double bc_residual_rmse = 0.0;
};

/// Network wall values on the reference slice nodes, using the slice's flux.
WallSlice field_wall_slice(const Field& field, const AnnulusGeometry& g, const WallSlice& like);

/// RMSEs of T_wall, dT/dn and (dT/dn - q) against a reference slice.
WallComparison wall_reference_compare(const Field& field, const AnnulusGeometry& g,
                                      const WallSlice& reference);

enum class Arm { off, fixed, scheduled };
std::string to_string(Arm a);
Arm arm_from_string(const std::string& name);

struct Config {
  Arm arm = Arm::off;
  std::vector<int> hidden = {32, 32, 32, 32};
  Activation activation = Activation::silu;
  OptimizerKind optimizer = OptimizerKind::adam999;
  LrSchedule lr{1e-3, 1e-5, 2000};
  long epochs = 2000;
  TermWeights weights = kUnitWeights;
  /// Fixed-arm weight, and the value the scheduled arm decays to.
  double shell_weight = 5e-4;
  /// Scheduled arm: starting weight, then hold and linear decay as epoch fractions.
  double shell_start_weight = 1e-3;
  double shell_hold_fraction = 0.25;
  double shell_decay_fraction = 0.5;
  ShellSpec shell;
  AnnulusGeometry geometry;
  FluxProfile flux = FluxProfile::default_ramp(AnnulusGeometry{});
  CloudSizes train_sizes = CloudSizes::training();
  CloudSizes val_sizes = CloudSizes::validation();
  int audit_n_theta = 128;
  int audit_n_z = 128;
  std::uint64_t init_seed = 0;
  std::uint64_t cloud_seed = 0;
  long validate_every = 100;
  EvalOptions eval;
};

/// Shell weight schedule implied by the arm.
AuxSchedule shell_schedule(const Config& cfg);

struct WallAuditReport {
  double wall_bc_rmse = 0.0;
  /// Against the FD reference; NaN when no reference slice was supplied.
  double t_wall_rmse = std::numeric_limits<double>::quiet_NaN();
  double dtdn_wall_rmse = std::numeric_limits<double>::quiet_NaN();
  double bc_residual_rmse = std::numeric_limits<double>::quiet_NaN();
  double shell_probe = 0.0;
};

WallAuditReport audit_stage2(const Field& field, const Config& cfg, const WallSlice* reference);

struct Result {
  TrainOutcome train;
  WallAuditReport report;
  /// Six-term breakdown of the final parameters on the training cloud.
  TermBreakdown final_terms;
};

Result train_stage2(const Config& cfg, const WallSlice* reference = nullptr);

}  // namespace hpinn::stage2
