#include "hpinn/fdref.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/Sparse>

#include "hpinn/annulus.hpp"

namespace hpinn::fdref {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

using Triplets = std::vector<Eigen::Triplet<double>>;

// Wall-normal flux at (I, j, k) as coefficients on T nodes:
// dT/dn = c_r T_r + c_t T_theta|_r with T_r = T_s / g and
// T_theta|_r = T_theta|_s - (g' / g) T_s at s = 1.
struct WallStencil {
  long nodes[5];
  double coef[5];
};

WallStencil wall_stencil(const FdField& f, int j, int k) {
  const GridSize& n = f.grid;
  const AnnulusGeometry& geo = f.geometry;
  const int I = n.n_s - 1;
  const double ds = 1.0 / (n.n_s - 1);
  const double dth = kTwoPi / n.n_theta;
  const double th = f.theta(j);
  const double ro = geo.outer_radius(th);
  const double rp = geo.outer_radius_deriv(th);
  const double gap = ro - geo.r_min;
  const double c_r = stage2::wall_normal_from_partials(1.0, 0.0, ro, rp);
  const double c_t = stage2::wall_normal_from_partials(0.0, 1.0, ro, rp);
  // coefficient on T_s and on T_theta|_s
  const double a_s = c_r / gap - c_t * rp / gap;
  const double a_t = c_t;
  const int jp = (j + 1) % n.n_theta;
  const int jm = (j + n.n_theta - 1) % n.n_theta;
  return {{f.index(I, j, k), f.index(I - 1, j, k), f.index(I - 2, j, k), f.index(I, jp, k),
           f.index(I, jm, k)},
          {3.0 * a_s / (2.0 * ds), -4.0 * a_s / (2.0 * ds), a_s / (2.0 * ds), a_t / (2.0 * dth),
           -a_t / (2.0 * dth)}};
}

void interior_row(const FdField& f, int i, int j, int k, Triplets& trip) {
  const GridSize& n = f.grid;
  const AnnulusGeometry& geo = f.geometry;
  const double ds = 1.0 / (n.n_s - 1);
  const double dth = kTwoPi / n.n_theta;
  const double dz = geo.length / (n.n_z - 1);
  const double s = f.s(i);
  const double th = f.theta(j);
  const double gap = geo.outer_radius(th) - geo.r_min;
  const double gp = geo.outer_radius_deriv(th);
  const double gpp = geo.outer_radius_deriv2(th);
  const double r = geo.r_min + s * gap;
  const double a = s * gp / gap;
  const double r2 = r * r;
  // Delta T = c_ss T_ss + c_s T_s + c_tt T_thth + c_st T_s theta + T_zz
  const double c_ss = 1.0 / (gap * gap) + a * a / r2;
  const double c_s = 1.0 / (r * gap) + s * (2.0 * gp * gp - gap * gpp) / (gap * gap * r2);
  const double c_tt = 1.0 / r2;
  const double c_st = -2.0 * a / r2;

  const long row = f.index(i, j, k);
  const int jp = (j + 1) % n.n_theta;
  const int jm = (j + n.n_theta - 1) % n.n_theta;
  auto add = [&](int ii, int jj, int kk, double v) { trip.emplace_back(row, f.index(ii, jj, kk), v); };
  add(i, j, k, -2.0 * c_ss / (ds * ds) - 2.0 * c_tt / (dth * dth) - 2.0 / (dz * dz));
  add(i + 1, j, k, c_ss / (ds * ds) + c_s / (2.0 * ds));
  add(i - 1, j, k, c_ss / (ds * ds) - c_s / (2.0 * ds));
  add(i, jp, k, c_tt / (dth * dth));
  add(i, jm, k, c_tt / (dth * dth));
  add(i, j, k + 1, 1.0 / (dz * dz));
  add(i, j, k - 1, 1.0 / (dz * dz));
  const double x = c_st / (4.0 * ds * dth);
  add(i + 1, jp, k, x);
  add(i - 1, jm, k, x);
  add(i + 1, jm, k, -x);
  add(i - 1, jp, k, -x);
}

double norm_or_one(double v) { return v > 0.0 ? v : 1.0; }

Change change(const std::vector<double>& coarse, const std::vector<double>& fine) {
  double d2 = 0.0, c2 = 0.0, mx = 0.0;
  for (std::size_t p = 0; p < coarse.size(); ++p) {
    const double d = fine[p] - coarse[p];
    d2 += d * d;
    c2 += coarse[p] * coarse[p];
    mx = std::max(mx, std::abs(d));
  }
  return {std::sqrt(d2 / norm_or_one(c2)), mx, std::sqrt(d2 / static_cast<double>(coarse.size()))};
}

int refinement_ratio(int coarse_intervals, int fine_intervals, const char* axis) {
  if (coarse_intervals <= 0 || fine_intervals % coarse_intervals != 0) {
    throw std::invalid_argument(std::string("compare_grids: grids are not nested in ") + axis);
  }
  return fine_intervals / coarse_intervals;
}

}  // namespace

std::string GridSize::str() const {
  std::ostringstream os;
  os << "(" << n_s << "," << n_theta << "," << n_z << ")";
  return os.str();
}

double FdField::theta(int j) const { return kTwoPi * j / grid.n_theta; }

FdField solve_reference(const GridSize& grid, const AnnulusGeometry& g, const FluxProfile& q,
                        const SolverOptions& opts) {
  if (grid.n_s < 5 || grid.n_theta < 8 || grid.n_z < 5) {
    throw std::invalid_argument("solve_reference: grid must be at least (5, 8, 5), got " + grid.str());
  }
  if (!(opts.tol > 0.0)) throw std::invalid_argument("solve_reference: tol must be positive");
  if (opts.block <= 0 || opts.max_iterations <= 0) {
    throw std::invalid_argument("solve_reference: iteration counts must be positive");
  }
  g.validate();

  FdField f;
  f.grid = grid;
  f.geometry = g;
  f.flux = q;
  const long n = grid.unknowns();
  const int I = grid.n_s - 1;
  const int K = grid.n_z - 1;
  const double dz = g.length / K;

  Triplets trip;
  trip.reserve(static_cast<std::size_t>(n) * 11);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(n);
  for (int k = 0; k <= K; ++k) {
    for (int j = 0; j < grid.n_theta; ++j) {
      for (int i = 0; i <= I; ++i) {
        const long row = f.index(i, j, k);
        if (i == 0 || k == 0) {
          trip.emplace_back(row, row, 1.0);
          b(row) = 1.0;
        } else if (i == I) {
          const WallStencil w = wall_stencil(f, j, k);
          for (int p = 0; p < 5; ++p) trip.emplace_back(row, w.nodes[p], w.coef[p]);
          b(row) = q.at(f.z(k), g.length);
        } else if (k == K) {
          trip.emplace_back(row, f.index(i, j, K), 3.0 / (2.0 * dz));
          trip.emplace_back(row, f.index(i, j, K - 1), -4.0 / (2.0 * dz));
          trip.emplace_back(row, f.index(i, j, K - 2), 1.0 / (2.0 * dz));
        } else {
          interior_row(f, i, j, k, trip);
        }
      }
    }
  }
  Eigen::SparseMatrix<double> A(n, n);
  A.setFromTriplets(trip.begin(), trip.end());
  trip = {};

  Eigen::BiCGSTAB<Eigen::SparseMatrix<double>, Eigen::IncompleteLUT<double>> solver;
  solver.preconditioner().setDroptol(opts.ilut_drop);
  solver.preconditioner().setFillfactor(opts.ilut_fill);
  solver.compute(A);
  if (solver.info() != Eigen::Success) {
    throw SolveError("solve_reference: preconditioner factorization failed", {});
  }
  solver.setTolerance(opts.tol);
  solver.setMaxIterations(opts.block);

  const double b_norm = b.norm();
  Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
  double rel = 1.0;
  while (true) {
    x = solver.solveWithGuess(b, x);
    f.iterations += solver.iterations();
    rel = (b - A * x).norm() / b_norm;
    f.residual_history.push_back(rel);
    if (!std::isfinite(rel)) {
      throw SolveError("solve_reference: iteration produced non-finite values", f.residual_history);
    }
    if (rel <= opts.tol) break;
    if (f.iterations >= opts.max_iterations || solver.iterations() == 0) {
      std::ostringstream os;
      os << "solve_reference: no convergence on " << grid.str() << " after " << f.iterations
         << " iterations (relative residual " << rel << ", tol " << opts.tol << ")";
      throw SolveError(os.str(), f.residual_history);
    }
  }
  f.t = std::move(x);
  f.final_residual = rel;
  f.solved = true;
  return f;
}

WallSlice wall_slice(const FdField& f) {
  if (!f.solved) throw std::invalid_argument("wall_slice: field has not been solved");
  const GridSize& n = f.grid;
  WallSlice out;
  out.theta.resize(n.n_theta);
  out.z.resize(n.n_z);
  for (int j = 0; j < n.n_theta; ++j) out.theta(j) = f.theta(j);
  for (int k = 0; k < n.n_z; ++k) out.z(k) = f.z(k);
  out.t_wall.resize(n.n_theta, n.n_z);
  out.dtdn.resize(n.n_theta, n.n_z);
  out.geometry_hash = f.geometry.hash();
  out.flux = f.flux;
  for (int j = 0; j < n.n_theta; ++j) {
    for (int k = 0; k < n.n_z; ++k) {
      out.t_wall(j, k) = f.at(n.n_s - 1, j, k);
      const WallStencil w = wall_stencil(f, j, k);
      double d = 0.0;
      for (int p = 0; p < 5; ++p) d += w.coef[p] * f.t(w.nodes[p]);
      out.dtdn(j, k) = d;
    }
  }
  return out;
}

Refinement compare_grids(const FdField& coarse, const FdField& fine) {
  if (!coarse.solved || !fine.solved) throw std::invalid_argument("compare_grids: unsolved field");
  if (coarse.geometry.hash() != fine.geometry.hash()) {
    throw std::invalid_argument("compare_grids: fields use different geometries");
  }
  const GridSize& c = coarse.grid;
  const GridSize& f = fine.grid;
  const int rs = refinement_ratio(c.n_s - 1, f.n_s - 1, "s");
  const int rt = refinement_ratio(c.n_theta, f.n_theta, "theta");
  const int rz = refinement_ratio(c.n_z - 1, f.n_z - 1, "z");

  std::vector<double> tc, tf, wc, wf, nc, nf;
  for (int k = 0; k < c.n_z; ++k) {
    for (int j = 0; j < c.n_theta; ++j) {
      for (int i = 0; i < c.n_s; ++i) {
        tc.push_back(coarse.at(i, j, k));
        tf.push_back(fine.at(i * rs, j * rt, k * rz));
      }
    }
  }
  const WallSlice sc = wall_slice(coarse);
  const WallSlice sf = wall_slice(fine);
  for (int j = 0; j < c.n_theta; ++j) {
    for (int k = 0; k < c.n_z; ++k) {
      wc.push_back(sc.t_wall(j, k));
      wf.push_back(sf.t_wall(j * rt, k * rz));
      nc.push_back(sc.dtdn(j, k));
      nf.push_back(sf.dtdn(j * rt, k * rz));
    }
  }
  return {c, f, change(tc, tf), change(wc, wf), change(nc, nf)};
}

std::vector<Refinement> grid_study(const std::vector<GridSize>& grids, const AnnulusGeometry& g,
                                   const FluxProfile& q, const SolverOptions& opts) {
  if (grids.size() < 2) throw std::invalid_argument("grid_study: need at least two grids");
  for (std::size_t p = 1; p < grids.size(); ++p) {
    refinement_ratio(grids[p - 1].n_s - 1, grids[p].n_s - 1, "s");
    refinement_ratio(grids[p - 1].n_theta, grids[p].n_theta, "theta");
    refinement_ratio(grids[p - 1].n_z - 1, grids[p].n_z - 1, "z");
  }
  std::vector<Refinement> out;
  FdField prev = solve_reference(grids[0], g, q, opts);
  for (std::size_t p = 1; p < grids.size(); ++p) {
    FdField next = solve_reference(grids[p], g, q, opts);
    out.push_back(compare_grids(prev, next));
    prev = std::move(next);
  }
  return out;
}

}  // namespace hpinn::fdref
