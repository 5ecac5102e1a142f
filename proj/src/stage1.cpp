#include "hpinn/stage1.hpp"

#include <cmath>
#include <numbers>

#include "hpinn/sampling.hpp"
#include "hpinn/stats.hpp"

namespace hpinn::stage1 {

namespace {

constexpr double kPi = std::numbers::pi;

// u* = sum_t a_t sin(p_t x) sin(q_t y)
struct SineTerm {
  double a;
  double p;
  double q;
};
constexpr std::array<SineTerm, 2> kTerms = {{{1.0, kPi, kPi}, {0.2, 3.0 * kPi, 2.0 * kPi}}};

// d^k/dx^k sin(w x) = w^k sin(w x + k pi / 2)
double sin_deriv(double w, double x, int k) {
  return std::pow(w, k) * std::sin(w * x + 0.5 * kPi * k);
}

double exact_partial(int nx, int ny, double x, double y) {
  double v = 0.0;
  for (const auto& t : kTerms) v += t.a * sin_deriv(t.p, x, nx) * sin_deriv(t.q, y, ny);
  return v;
}

double forcing_partial(int nx, int ny, double x, double y) {
  double v = 0.0;
  for (const auto& t : kTerms) {
    v -= t.a * (t.p * t.p + t.q * t.q) * sin_deriv(t.p, x, nx) * sin_deriv(t.q, y, ny);
  }
  return v;
}

struct ResidualChannels {
  int xx;
  int yy;
};

ResidualChannels residual_channels(const JetLayout& l) {
  return {l.index(Partial::d(0, 0)), l.index(Partial::d(1, 1))};
}

struct GradientChannels {
  int xxx, xyy, xxy, yyy;
};

GradientChannels gradient_channels(const JetLayout& l) {
  return {l.index(Partial::d(0, 0, 0)), l.index(Partial::d(0, 1, 1)), l.index(Partial::d(0, 0, 1)),
          l.index(Partial::d(1, 1, 1))};
}

Eigen::VectorXd forcing_at(const Eigen::MatrixXd& pts) {
  Eigen::VectorXd f(pts.cols());
  for (Eigen::Index i = 0; i < pts.cols(); ++i) f(i) = forcing(pts(0, i), pts(1, i));
  return f;
}

Eigen::MatrixXd forcing_gradient_at(const Eigen::MatrixXd& pts) {
  Eigen::MatrixXd g(2, pts.cols());
  for (Eigen::Index i = 0; i < pts.cols(); ++i) {
    const auto fg = forcing_gradient(pts(0, i), pts(1, i));
    g(0, i) = fg[0];
    g(1, i) = fg[1];
  }
  return g;
}

}  // namespace

double exact_solution(double x, double y) { return exact_partial(0, 0, x, y); }
double forcing(double x, double y) { return forcing_partial(0, 0, x, y); }
std::array<double, 2> forcing_gradient(double x, double y) {
  return {forcing_partial(1, 0, x, y), forcing_partial(0, 1, x, y)};
}

AnalyticField exact_field() {
  return AnalyticField(2, [](const Partial& p, const double* x) {
    int nx = 0;
    int ny = 0;
    for (int k = 0; k < p.order(); ++k) (p.dim(k) == 0 ? nx : ny) += 1;
    return exact_partial(nx, ny, x[0], x[1]);
  });
}

JetLayout residual_layout() { return JetLayout::with_pure_seconds(2, {0, 1}); }

JetLayout residual_gradient_layout() {
  return JetLayout(2, {Partial::d(0, 0, 0), Partial::d(0, 1, 1), Partial::d(0, 0, 1),
                       Partial::d(1, 1, 1)});
}

Eigen::VectorXd residuals(const Field& field, const Eigen::MatrixXd& points) {
  const JetLayout layout = residual_layout();
  const Eigen::MatrixXd j = field.jets(points, layout);
  const auto ch = residual_channels(layout);
  return (j.row(ch.xx) + j.row(ch.yy)).transpose() - forcing_at(points);
}

double residual(const Field& field, double x, double y) {
  Eigen::MatrixXd p(2, 1);
  p << x, y;
  return residuals(field, p)(0);
}

Eigen::MatrixXd residual_gradients(const Field& field, const Eigen::MatrixXd& points) {
  const JetLayout layout = residual_gradient_layout();
  const Eigen::MatrixXd j = field.jets(points, layout);
  const auto ch = gradient_channels(layout);
  Eigen::MatrixXd g(2, points.cols());
  g.row(0) = j.row(ch.xxx) + j.row(ch.xyy);
  g.row(1) = j.row(ch.xxy) + j.row(ch.yyy);
  return g - forcing_gradient_at(points);
}

Cloud make_cloud(int n_interior, int n_boundary, std::uint64_t seed) {
  if (n_interior <= 0 || n_boundary <= 0) throw std::invalid_argument("make_cloud: empty cloud");
  Rng rng(seed);
  Cloud c;
  c.interior.resize(2, n_interior);
  for (int i = 0; i < n_interior; ++i) {
    c.interior(0, i) = rng.uniform();
    c.interior(1, i) = rng.uniform();
  }
  c.boundary.resize(2, n_boundary);
  for (int i = 0; i < n_boundary; ++i) {
    const double t = rng.uniform();
    switch (i % 4) {
      case 0: c.boundary.col(i) << t, 0.0; break;
      case 1: c.boundary.col(i) << 1.0, t; break;
      case 2: c.boundary.col(i) << t, 1.0; break;
      default: c.boundary.col(i) << 0.0, t; break;
    }
  }
  return c;
}

BaseLosses base_losses(const Field& field, const Cloud& cloud) {
  if (cloud.interior.cols() == 0 || cloud.boundary.cols() == 0) {
    throw std::invalid_argument("base_losses: empty cloud");
  }
  BaseLosses out;
  out.pde = residuals(field, cloud.interior).squaredNorm() / static_cast<double>(cloud.interior.cols());
  const Eigen::MatrixXd u = field.jets(cloud.boundary, JetLayout(2, {}));
  double s = 0.0;
  for (Eigen::Index i = 0; i < cloud.boundary.cols(); ++i) {
    const double d = u(0, i) - exact_solution(cloud.boundary(0, i), cloud.boundary(1, i));
    s += d * d;
  }
  out.bc = s / static_cast<double>(cloud.boundary.cols());
  return out;
}

double fd_resgrad_loss(const Eigen::MatrixXd& r, double h, Eigen::MatrixXd* d_r) {
  const Eigen::Index nx = r.rows();
  const Eigen::Index ny = r.cols();
  if (nx < 3 || ny < 3) throw std::invalid_argument("fd_resgrad_loss: grid must be at least 3x3");
  if (!(h > 0.0)) throw std::invalid_argument("fd_resgrad_loss: spacing must be positive");
  const double inv2h = 1.0 / (2.0 * h);
  const double count = static_cast<double>((nx - 2) * (ny - 2));
  if (d_r) d_r->setZero(nx, ny);
  double sum = 0.0;
  for (Eigen::Index j = 1; j + 1 < ny; ++j) {
    for (Eigen::Index i = 1; i + 1 < nx; ++i) {
      const double dx = (r(i + 1, j) - r(i - 1, j)) * inv2h;
      const double dy = (r(i, j + 1) - r(i, j - 1)) * inv2h;
      sum += dx * dx + dy * dy;
      if (d_r) {
        const double gx = 2.0 * dx * inv2h / count;
        const double gy = 2.0 * dy * inv2h / count;
        (*d_r)(i + 1, j) += gx;
        (*d_r)(i - 1, j) -= gx;
        (*d_r)(i, j + 1) += gy;
        (*d_r)(i, j - 1) -= gy;
      }
    }
  }
  return sum / count;
}

double ad_resgrad_loss(const Field& field, const Eigen::MatrixXd& nodes) {
  if (nodes.cols() == 0) throw std::invalid_argument("ad_resgrad_loss: no nodes");
  return residual_gradients(field, nodes).colwise().squaredNorm().mean();
}

double match_ad_weight(double lambda_fd_anchor, double s_fd, double s_ad) {
  if (!(s_ad > 0.0)) throw std::invalid_argument("match_ad_weight: S_AD must be positive");
  return lambda_fd_anchor * s_fd / s_ad;
}

std::string to_string(GridStrategy s) {
  switch (s) {
    case GridStrategy::fixed_safe: return "fixed_safe";
    case GridStrategy::cycle4: return "cycle4";
    case GridStrategy::jitter4: return "jitter4";
  }
  return "?";
}

GridStrategy grid_strategy_from_string(const std::string& name) {
  if (name == "fixed_safe") return GridStrategy::fixed_safe;
  if (name == "cycle4") return GridStrategy::cycle4;
  if (name == "jitter4") return GridStrategy::jitter4;
  throw std::invalid_argument("unknown grid strategy '" + name + "'");
}

Eigen::MatrixXd AuxGrid::nodes() const {
  Eigen::MatrixXd p(2, nx * ny);
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) p.col(i + nx * j) << x0 + i * h, y0 + j * h;
  }
  return p;
}

Eigen::MatrixXd AuxGrid::interior_nodes() const {
  Eigen::MatrixXd p(2, (nx - 2) * (ny - 2));
  int k = 0;
  for (int j = 1; j + 1 < ny; ++j) {
    for (int i = 1; i + 1 < nx; ++i) p.col(k++) << x0 + i * h, y0 + j * h;
  }
  return p;
}

const AuxGrid& AuxBank::for_epoch(long epoch) const {
  if (grids.empty()) throw std::logic_error("AuxBank: no grids");
  return grids[static_cast<std::size_t>(epoch) % grids.size()];
}

AuxBank build_aux_bank(GridStrategy strategy, int n, double h, std::uint64_t seed) {
  if (n < 8) throw std::invalid_argument("build_aux_bank: n must be at least 8");
  if (!(h > 0.0)) throw std::invalid_argument("build_aux_bank: spacing must be positive");
  const double half = 0.5 * h;
  // Cropped nodes sit at h + phase + i h for i < n - 2; the largest phase is h/2.
  if (!(h + half + (n - 3) * h < 1.0)) {
    throw std::invalid_argument("build_aux_bank: n too large for spacing; crop leaves the domain");
  }
  AuxBank bank;
  bank.strategy = strategy;
  bank.n = n;
  bank.h = h;
  auto make = [&](double px, double py) { return AuxGrid{h + px, h + py, h, n - 2, n - 2}; };
  switch (strategy) {
    case GridStrategy::fixed_safe:
      bank.grids.push_back(make(0.0, 0.0));
      break;
    case GridStrategy::cycle4:
      bank.grids = {make(0.0, 0.0), make(half, 0.0), make(0.0, half), make(half, half)};
      break;
    case GridStrategy::jitter4: {
      Rng rng(mix_seed(seed, 0xA0));
      for (int b = 0; b < 4; ++b) {
        const double px = rng.uniform(0.0, half);
        const double py = rng.uniform(0.0, half);
        bank.grids.push_back(make(px, py));
      }
      break;
    }
  }
  return bank;
}

AuxBank build_aux_bank(GridStrategy strategy, int n, std::uint64_t seed) {
  return build_aux_bank(strategy, n, 1.0 / (n - 1), seed);
}

double fd_resgrad_on_grid(const Field& field, const AuxGrid& grid) {
  const Eigen::VectorXd r = residuals(field, grid.nodes());
  return fd_resgrad_loss(r.reshaped(grid.nx, grid.ny), grid.h);
}

std::string to_string(Arm a) {
  switch (a) {
    case Arm::off: return "off";
    case Arm::fd_fixed: return "fd_fixed";
    case Arm::fd_linear: return "fd_linear";
    case Arm::ad_fixed: return "ad_fixed";
    case Arm::ad_linear: return "ad_linear";
  }
  return "?";
}

Arm arm_from_string(const std::string& name) {
  if (name == "off") return Arm::off;
  if (name == "fd_fixed") return Arm::fd_fixed;
  if (name == "fd_linear") return Arm::fd_linear;
  if (name == "ad_fixed") return Arm::ad_fixed;
  if (name == "ad_linear") return Arm::ad_linear;
  throw std::invalid_argument("unknown stage-1 arm '" + name + "'");
}

AuxSchedule aux_schedule(const Config& cfg) {
  switch (cfg.arm) {
    case Arm::off: return AuxSchedule::fixed(0.0);
    case Arm::fd_fixed:
    case Arm::ad_fixed: return AuxSchedule::fixed(cfg.aux_weight, cfg.aux_start);
    case Arm::fd_linear:
    case Arm::ad_linear: break;
  }
  AuxSchedule s;
  s.start_epoch = cfg.aux_start;
  s.ramp_len = cfg.aux_ramp;
  s.hold_len = cfg.aux_hold;
  s.decay_len = cfg.aux_decay;
  if (s.ramp_len == 0 && s.hold_len == 0 && s.decay_len == 0) {
    const long span = std::max(0L, cfg.epochs - cfg.aux_start);
    s.ramp_len = span / 10;
    s.hold_len = (2 * span) / 5;
    s.decay_len = (2 * span) / 5;
  }
  s.decay_kind = cfg.aux_decay_kind;
  s.target = cfg.aux_weight;
  s.final_fraction = cfg.aux_final_fraction;
  return s;
}

Objective make_objective(const Config& cfg, const Cloud& cloud, const AuxGrid* grid,
                         double lambda_aux, bool use_ad) {
  Objective obj;
  obj.groups.push_back({"pde", cloud.interior, residual_layout()});
  obj.groups.push_back({"bc", cloud.boundary, JetLayout(2, {})});
  const bool with_aux = grid != nullptr && lambda_aux != 0.0;
  if (with_aux) {
    if (use_ad) {
      obj.groups.push_back({"ad_resgrad", grid->interior_nodes(), residual_gradient_layout()});
    } else {
      obj.groups.push_back({"fd_resgrad", grid->nodes(), residual_layout()});
    }
  }

  const Eigen::VectorXd f_int = forcing_at(cloud.interior);
  Eigen::VectorXd g_bc(cloud.boundary.cols());
  for (Eigen::Index i = 0; i < g_bc.size(); ++i) {
    g_bc(i) = exact_solution(cloud.boundary(0, i), cloud.boundary(1, i));
  }
  Eigen::VectorXd f_aux;
  Eigen::MatrixXd gf_aux;
  AuxGrid aux_grid;
  if (with_aux) {
    aux_grid = *grid;
    if (use_ad) {
      gf_aux = forcing_gradient_at(obj.groups[2].points);
    } else {
      f_aux = forcing_at(obj.groups[2].points);
    }
  }
  const double lambda_bc = cfg.lambda_bc;
  const ResidualChannels rc = residual_channels(residual_layout());
  const GradientChannels gc = gradient_channels(residual_gradient_layout());

  obj.functional = [=](std::span<const Eigen::MatrixXd> jets, std::span<Eigen::MatrixXd> seeds) {
    const double n_int = static_cast<double>(f_int.size());
    const Eigen::RowVectorXd r = jets[0].row(rc.xx) + jets[0].row(rc.yy) - f_int.transpose();
    double loss = r.squaredNorm() / n_int;
    seeds[0].row(rc.xx) = 2.0 * r / n_int;
    seeds[0].row(rc.yy) = 2.0 * r / n_int;

    const double n_bc = static_cast<double>(g_bc.size());
    const Eigen::RowVectorXd d = jets[1].row(0) - g_bc.transpose();
    loss += lambda_bc * d.squaredNorm() / n_bc;
    seeds[1].row(0) = lambda_bc * 2.0 * d / n_bc;

    if (with_aux && use_ad) {
      const double n = static_cast<double>(gf_aux.cols());
      const Eigen::RowVectorXd gx = jets[2].row(gc.xxx) + jets[2].row(gc.xyy) - gf_aux.row(0);
      const Eigen::RowVectorXd gy = jets[2].row(gc.xxy) + jets[2].row(gc.yyy) - gf_aux.row(1);
      loss += lambda_aux * (gx.squaredNorm() + gy.squaredNorm()) / n;
      seeds[2].row(gc.xxx) = lambda_aux * 2.0 * gx / n;
      seeds[2].row(gc.xyy) = lambda_aux * 2.0 * gx / n;
      seeds[2].row(gc.xxy) = lambda_aux * 2.0 * gy / n;
      seeds[2].row(gc.yyy) = lambda_aux * 2.0 * gy / n;
    } else if (with_aux) {
      const Eigen::VectorXd ra =
          (jets[2].row(rc.xx) + jets[2].row(rc.yy)).transpose() - f_aux;
      Eigen::MatrixXd d_r;
      loss += lambda_aux * fd_resgrad_loss(ra.reshaped(aux_grid.nx, aux_grid.ny), aux_grid.h, &d_r);
      const Eigen::RowVectorXd dr = lambda_aux * d_r.reshaped().transpose();
      seeds[2].row(rc.xx) = dr;
      seeds[2].row(rc.yy) = dr;
    }
    return loss;
  };
  return obj;
}

Objective make_validation_objective(const Config& cfg, const Cloud& cloud) {
  return make_objective(cfg, cloud, nullptr, 0.0, false);
}

Eigen::MatrixXd audit_points(std::uint64_t audit_seed, int n_points) {
  if (n_points <= 0) throw std::invalid_argument("audit_stage1: no audit points");
  return sobol_points(2, n_points, mix_seed(audit_seed, 0xA5));
}

Metrics audit_stage1(const Field& field, std::uint64_t audit_seed, int n_points, int aux_n) {
  return audit_on_points(field, audit_points(audit_seed, n_points), aux_n);
}

Metrics audit_on_points(const Field& field, const Eigen::MatrixXd& pts, int aux_n) {
  const int n_points = static_cast<int>(pts.cols());
  if (n_points == 0) throw std::invalid_argument("audit_stage1: no audit points");
  const JetLayout glayout = JetLayout::gradient(2);
  const Eigen::MatrixXd jets = field.jets(pts, glayout);
  const int cx = glayout.index(Partial::d(0));
  const int cy = glayout.index(Partial::d(1));
  const Eigen::VectorXd r = residuals(field, pts);
  const Eigen::MatrixXd gr = residual_gradients(field, pts);

  std::vector<double> du2, u2, dg2, g2, r2, gr2;
  for (int i = 0; i < n_points; ++i) {
    const double x = pts(0, i);
    const double y = pts(1, i);
    const double u = exact_partial(0, 0, x, y);
    const double ux = exact_partial(1, 0, x, y);
    const double uy = exact_partial(0, 1, x, y);
    du2.push_back(std::pow(jets(0, i) - u, 2));
    u2.push_back(u * u);
    dg2.push_back(std::pow(jets(cx, i) - ux, 2) + std::pow(jets(cy, i) - uy, 2));
    g2.push_back(ux * ux + uy * uy);
    r2.push_back(r(i) * r(i));
    gr2.push_back(gr.col(i).squaredNorm());
  }
  Metrics m;
  m.rel_l2_u = std::sqrt(order_invariant_sum(du2) / order_invariant_sum(u2));
  m.rel_l2_grad_u = std::sqrt(order_invariant_sum(dg2) / order_invariant_sum(g2));
  m.residual_rmse = std::sqrt(order_invariant_mean(r2));
  m.grad_r_rmse = std::sqrt(order_invariant_mean(gr2));
  const AuxBank shifted = build_aux_bank(GridStrategy::cycle4, aux_n, 0);
  for (std::size_t b = 0; b < 4; ++b) m.shifted_fd_rg[b] = fd_resgrad_on_grid(field, shifted.grids[b]);
  return m;
}

Result train_stage1(const Config& cfg) {
  std::vector<int> sizes{2};
  sizes.insert(sizes.end(), cfg.hidden.begin(), cfg.hidden.end());
  sizes.push_back(1);
  const NetworkParams init = init_mlp(sizes, cfg.activation, mix_seed(cfg.init_seed, 0x11));
  const Cloud train_cloud = make_cloud(cfg.n_interior, cfg.n_boundary, mix_seed(cfg.cloud_seed, 0x21));
  const Cloud val_cloud =
      make_cloud(cfg.n_val_interior, cfg.n_val_boundary, mix_seed(cfg.cloud_seed, 0x22));
  const AuxBank bank = build_aux_bank(cfg.grid, cfg.aux_n, mix_seed(cfg.cloud_seed, 0x23));
  const AuxSchedule sched = aux_schedule(cfg);
  const bool use_ad = cfg.arm == Arm::ad_fixed || cfg.arm == Arm::ad_linear;

  Result res;
  bool scale_known = false;
  const Objective val_obj = make_validation_objective(cfg, val_cloud);

  TrainHooks hooks;
  hooks.validate = [&](const NetworkParams& net) {
    return loss_value(net, val_obj.groups, val_obj.functional, cfg.eval);
  };
  hooks.loss_grad = [&](const NetworkParams& net, long epoch) {
    double lambda = cfg.arm == Arm::off ? 0.0 : aux_weight_at(sched, epoch);
    const AuxGrid* grid = lambda != 0.0 ? &bank.for_epoch(epoch) : nullptr;
    if (use_ad && grid) {
      if (!scale_known) {
        const NetworkField field(net, std::nullopt, cfg.eval);
        const double s_fd = fd_resgrad_on_grid(field, *grid);
        const double s_ad = ad_resgrad_loss(field, grid->interior_nodes());
        res.ad_scale = match_ad_weight(1.0, s_fd, s_ad);
        scale_known = true;
      }
      lambda *= res.ad_scale;
    }
    const Objective obj = make_objective(cfg, train_cloud, grid, lambda, use_ad);
    return loss_param_gradient(net, obj.groups, obj.functional, cfg.eval);
  };

  LrSchedule lr = cfg.lr;
  lr.total_epochs = std::max(1L, cfg.epochs);
  auto opt = optimizer_slot(cfg.optimizer, init.num_params());
  res.train = train_loop(init, *opt, lr, cfg.epochs, cfg.validate_every, hooks);
  const NetworkField best(res.train.best, std::nullopt, cfg.eval);
  res.metrics = audit_stage1(best, cfg.audit_seed, cfg.n_audit, cfg.aux_n);
  res.metrics.best_val = res.train.best_val;
  return res;
}

}  // namespace hpinn::stage1
