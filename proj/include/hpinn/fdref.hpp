#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "hpinn/geometry.hpp"
#include "hpinn/wall_slice.hpp"

/// Finite-difference reference solution of the steady annulus problem on a
/// body-fitted (s, theta, z) grid.
///
/// Nodes: s_i = i / (N_s - 1), theta_j = 2 pi j / N_theta (periodic),
/// z_k = L k / (N_z - 1); unknown (i, j, k) is i + N_s (j + N_theta k).
/// Interior rows discretize the cylindrical Laplacian rewritten in (s, theta)
/// with central differences and the 4-point cross stencil for T_s theta.
/// T = 1 at s = 0 and z = 0; one-sided dT/dz = 0 at z = L; at s = 1 (z > 0)
/// the outer-wall flux row built from a one-sided T_s and central T_theta.
namespace hpinn::fdref {

struct GridSize {
  int n_s = 25;
  int n_theta = 48;
  int n_z = 193;

  long unknowns() const { return static_cast<long>(n_s) * n_theta * n_z; }
  std::string str() const;
  friend bool operator==(const GridSize&, const GridSize&) = default;
};

struct SolverOptions {
  /// Relative residual ||b - A x|| / ||b|| to reach.
  double tol = 1e-10;
  int max_iterations = 20000;
  /// Iterations between residual-history samples.
  int block = 50;
  double ilut_drop = 1e-6;
  int ilut_fill = 30;
};

/// Non-convergence; carries the sampled relative residuals.
class SolveError : public std::runtime_error {
 public:
  SolveError(const std::string& what, std::vector<double> history)
      : std::runtime_error(what), history_(std::move(history)) {}
  const std::vector<double>& history() const { return history_; }

 private:
  std::vector<double> history_;
};

struct FdField {
  GridSize grid;
  AnnulusGeometry geometry;
  FluxProfile flux;
  Eigen::VectorXd t;
  bool solved = false;
  double final_residual = 0.0;
  long iterations = 0;
  std::vector<double> residual_history;

  double s(int i) const { return static_cast<double>(i) / (grid.n_s - 1); }
  double theta(int j) const;
  double z(int k) const { return geometry.length * k / (grid.n_z - 1); }
  long index(int i, int j, int k) const {
    return i + static_cast<long>(grid.n_s) * (j + static_cast<long>(grid.n_theta) * k);
  }
  double at(int i, int j, int k) const { return t(index(i, j, k)); }
};

/// Throws std::invalid_argument for grids below (5, 8, 5) or tol <= 0, and
/// SolveError when the iteration cap is reached first.
FdField solve_reference(const GridSize& grid, const AnnulusGeometry& g, const FluxProfile& q,
                        const SolverOptions& opts = {});

/// T and dT/dn on the s = 1 nodes. dT/dn uses the discrete flux of the wall
/// rows, so it equals q(z) to solver tolerance for z > 0.
WallSlice wall_slice(const FdField& field);

struct Change {
  double rel_l2 = 0.0;
  double max_abs = 0.0;
  double rmse = 0.0;
};

/// Coarse-to-fine differences on the coarse grid's nodes.
struct Refinement {
  GridSize coarse;
  GridSize fine;
  Change field;
  Change t_wall;
  Change dtdn;
};

/// Throws std::invalid_argument unless every coarse node is a fine node
/// (N_theta divides, (N - 1) divides along s and z) and the problems match.
Refinement compare_grids(const FdField& coarse, const FdField& fine);

/// Solves every grid, then compares consecutive pairs.
std::vector<Refinement> grid_study(const std::vector<GridSize>& grids, const AnnulusGeometry& g,
                                   const FluxProfile& q, const SolverOptions& opts = {});

}  // namespace hpinn::fdref
