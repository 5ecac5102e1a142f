#include "hpinn/annulus.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "hpinn/sampling.hpp"
#include "hpinn/stats.hpp"

namespace hpinn::stage2 {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

struct ResidualChannels {
  int r, rr, tt, zz;
};

ResidualChannels residual_channels(const JetLayout& l) {
  return {l.index(Partial::d(0)), l.index(Partial::d(0, 0)), l.index(Partial::d(1, 1)),
          l.index(Partial::d(2, 2))};
}

Eigen::VectorXd residual_from_jets(const Eigen::MatrixXd& jets, const Eigen::MatrixXd& pts) {
  const ResidualChannels c = residual_channels(residual_layout());
  Eigen::VectorXd out(pts.cols());
  for (Eigen::Index i = 0; i < pts.cols(); ++i) {
    const double r = pts(0, i);
    out(i) = jets(c.rr, i) + jets(c.r, i) / r + jets(c.tt, i) / (r * r) + jets(c.zz, i);
  }
  return out;
}

void check_radii(const Eigen::MatrixXd& pts) {
  if (pts.rows() != 3) throw std::invalid_argument("stage2: points must be 3 x n");
  for (Eigen::Index i = 0; i < pts.cols(); ++i) {
    if (!(pts(0, i) > 0.0)) throw std::invalid_argument("stage2: residual needs r > 0");
  }
}

Eigen::MatrixXd wall_points(const AnnulusGeometry& g, const Eigen::MatrixXd& theta_z) {
  Eigen::MatrixXd pts(3, theta_z.cols());
  for (Eigen::Index i = 0; i < theta_z.cols(); ++i) {
    pts(0, i) = g.outer_radius(theta_z(0, i));
    pts(1, i) = theta_z(0, i);
    pts(2, i) = theta_z(1, i);
  }
  return pts;
}

// Trapezoid weights over lines 1..n-2 with the end lines halved.
Eigen::VectorXd interior_trapezoid(int n) {
  Eigen::VectorXd w = Eigen::VectorXd::Zero(n);
  if (n < 3) return w;
  for (int i = 1; i <= n - 2; ++i) w(i) = 1.0;
  if (n > 3) {
    w(1) = 0.5;
    w(n - 2) = 0.5;
  }
  return w;
}

struct WallValues {
  Eigen::VectorXd t;
  Eigen::VectorXd dtdn;
};

WallValues wall_values(const Field& field, const AnnulusGeometry& g, const Eigen::MatrixXd& theta_z) {
  const Eigen::MatrixXd pts = wall_points(g, theta_z);
  const JetLayout layout = JetLayout::gradient(3);
  const Eigen::MatrixXd jets = field.jets(pts, layout);
  const int cr = layout.index(Partial::d(0));
  const int ct = layout.index(Partial::d(1));
  WallValues out{Eigen::VectorXd(pts.cols()), Eigen::VectorXd(pts.cols())};
  for (Eigen::Index i = 0; i < pts.cols(); ++i) {
    out.t(i) = jets(0, i);
    out.dtdn(i) = wall_normal_from_partials(jets(cr, i), jets(ct, i), pts(0, i),
                                            g.outer_radius_deriv(pts(1, i)));
  }
  return out;
}

}  // namespace

InputMap input_map(const AnnulusGeometry& g) {
  const double r_hi = g.r_outer_max();
  InputMap m;
  m.shift = Eigen::Vector3d(0.5 * (g.r_min + r_hi), 0.5 * kTwoPi, 0.5 * g.length);
  m.scale = Eigen::Vector3d(2.0 / (r_hi - g.r_min), 2.0 / kTwoPi, 2.0 / g.length);
  return m;
}

JetLayout residual_layout() { return JetLayout::with_pure_seconds(3, {0, 1, 2}); }

Eigen::VectorXd cylindrical_residuals(const Field& field, const Eigen::MatrixXd& pts) {
  check_radii(pts);
  return residual_from_jets(field.jets(pts, residual_layout()), pts);
}

double cylindrical_residual(const Field& field, double r, double theta, double z) {
  return cylindrical_residuals(field, Eigen::Vector3d(r, theta, z))(0);
}

double wall_normal_from_partials(double t_r, double t_theta, double r, double ro_prime) {
  const double k = ro_prime / r;
  return (t_r - k * t_theta / r) / std::sqrt(1.0 + k * k);
}

Eigen::VectorXd wall_normal_derivatives(const Field& field, const AnnulusGeometry& g,
                                        const Eigen::MatrixXd& theta_z) {
  if (theta_z.rows() != 2) throw std::invalid_argument("wall_normal_derivatives: expected 2 x n");
  return wall_values(field, g, theta_z).dtdn;
}

double wall_normal_derivative(const Field& field, const AnnulusGeometry& g, double theta, double z) {
  return wall_normal_derivatives(field, g, Eigen::Vector2d(theta, z))(0);
}

Cloud make_cloud(const AnnulusGeometry& g, const CloudSizes& sizes, std::uint64_t seed) {
  g.validate();
  if (sizes.interior <= 0 || sizes.per_boundary <= 0 || sizes.pairs <= 0) {
    throw std::invalid_argument("make_cloud: sizes must be positive");
  }
  Rng rng(seed);
  const double L = g.length;
  auto fill = [&](int n, auto&& sample) {
    Eigen::MatrixXd pts(3, n);
    for (int i = 0; i < n; ++i) {
      const Eigen::Vector3d stz = sample();
      pts(0, i) = g.map_s_to_r(stz(0), stz(1));
      pts(1, i) = stz(1);
      pts(2, i) = stz(2);
    }
    return pts;
  };
  Cloud c;
  c.interior = fill(sizes.interior, [&] {
    const double s = rng.uniform();
    const double t = rng.uniform(0.0, kTwoPi);
    return Eigen::Vector3d(s, t, rng.uniform(0.0, L));
  });
  c.inner = fill(sizes.per_boundary, [&] {
    const double t = rng.uniform(0.0, kTwoPi);
    return Eigen::Vector3d(0.0, t, rng.uniform(0.0, L));
  });
  c.outer = fill(sizes.per_boundary, [&] {
    const double t = rng.uniform(0.0, kTwoPi);
    return Eigen::Vector3d(1.0, t, rng.uniform(0.0, L));
  });
  c.inlet = fill(sizes.per_boundary, [&] {
    const double s = rng.uniform();
    return Eigen::Vector3d(s, rng.uniform(0.0, kTwoPi), 0.0);
  });
  c.outlet = fill(sizes.per_boundary, [&] {
    const double s = rng.uniform();
    return Eigen::Vector3d(s, rng.uniform(0.0, kTwoPi), L);
  });
  Eigen::MatrixXd sz(2, sizes.pairs);
  for (int p = 0; p < sizes.pairs; ++p) {
    sz(0, p) = rng.uniform();
    sz(1, p) = rng.uniform(0.0, L);
  }
  c.periodic_a.resize(3, sizes.pairs);
  c.periodic_b.resize(3, sizes.pairs);
  for (int p = 0; p < sizes.pairs; ++p) {
    c.periodic_a.col(p) = Eigen::Vector3d(g.map_s_to_r(sz(0, p), 0.0), 0.0, sz(1, p));
    c.periodic_b.col(p) = Eigen::Vector3d(g.map_s_to_r(sz(0, p), kTwoPi), kTwoPi, sz(1, p));
  }
  return c;
}

Objective six_term_objective(const AnnulusGeometry& g, const FluxProfile& q, const Cloud& cloud,
                             const TermWeights& w, TermBreakdown* breakdown) {
  check_radii(cloud.interior);
  for (int t = 0; t < 6; ++t) {
    if (!(w[t] > 0.0)) {
      throw std::invalid_argument(std::string("six_term_objective: weight '") + kTermNames[t] +
                                  "' must be positive");
    }
  }
  for (const Eigen::MatrixXd* m : {&cloud.interior, &cloud.inner, &cloud.inlet, &cloud.outlet,
                                   &cloud.outer, &cloud.periodic_a}) {
    if (m->cols() == 0) throw std::invalid_argument("six_term_objective: empty cloud group");
  }
  if (cloud.periodic_a.cols() != cloud.periodic_b.cols()) {
    throw std::invalid_argument("six_term_objective: periodic groups differ in size");
  }
  Objective obj;
  obj.groups.push_back({"pde", cloud.interior, residual_layout()});
  obj.groups.push_back({"inner", cloud.inner, JetLayout(3, {})});
  obj.groups.push_back({"inlet", cloud.inlet, JetLayout(3, {})});
  obj.groups.push_back({"outlet", cloud.outlet, JetLayout(3, {Partial::d(2)})});
  obj.groups.push_back({"outer", cloud.outer, JetLayout::gradient(3)});
  obj.groups.push_back({"periodic_a", cloud.periodic_a, JetLayout(3, {})});
  obj.groups.push_back({"periodic_b", cloud.periodic_b, JetLayout(3, {})});

  const Eigen::RowVectorXd inv_r = cloud.interior.row(0).cwiseInverse();
  const Eigen::RowVectorXd inv_r2 = inv_r.cwiseAbs2();
  const Eigen::Index n_out = cloud.outer.cols();
  Eigen::RowVectorXd q_out(n_out), c_r(n_out), c_t(n_out);
  for (Eigen::Index i = 0; i < n_out; ++i) {
    const double r = cloud.outer(0, i);
    const double k = g.outer_radius_deriv(cloud.outer(1, i)) / r;
    const double nrm = std::sqrt(1.0 + k * k);
    q_out(i) = q.at(cloud.outer(2, i), g.length);
    c_r(i) = 1.0 / nrm;
    c_t(i) = -k / (r * nrm);
  }
  const ResidualChannels rc = residual_channels(residual_layout());
  const JetLayout grad = JetLayout::gradient(3);
  const int gr = grad.index(Partial::d(0));
  const int gt = grad.index(Partial::d(1));
  const int oz = JetLayout(3, {Partial::d(2)}).index(Partial::d(2));

  obj.functional = [=](std::span<const Eigen::MatrixXd> jets, std::span<Eigen::MatrixXd> seeds) {
    std::array<double, 6> ms{};
    auto term = [&](int t, const Eigen::RowVectorXd& d) {
      const double n = static_cast<double>(d.size());
      ms[t] = d.squaredNorm() / n;
      return Eigen::RowVectorXd(2.0 * w[t] * d / n);
    };

    const Eigen::RowVectorXd res = jets[0].row(rc.rr) + jets[0].row(rc.r).cwiseProduct(inv_r) +
                                   jets[0].row(rc.tt).cwiseProduct(inv_r2) + jets[0].row(rc.zz);
    const Eigen::RowVectorXd s_res = term(0, res);
    seeds[0].row(rc.rr) = s_res;
    seeds[0].row(rc.r) = s_res.cwiseProduct(inv_r);
    seeds[0].row(rc.tt) = s_res.cwiseProduct(inv_r2);
    seeds[0].row(rc.zz) = s_res;

    seeds[1].row(0) = term(1, jets[1].row(0).array() - 1.0);
    seeds[2].row(0) = term(2, jets[2].row(0).array() - 1.0);
    seeds[3].row(oz) = term(3, jets[3].row(oz));

    const Eigen::RowVectorXd bc =
        jets[4].row(gr).cwiseProduct(c_r) + jets[4].row(gt).cwiseProduct(c_t) - q_out;
    const Eigen::RowVectorXd s_bc = term(4, bc);
    seeds[4].row(gr) = s_bc.cwiseProduct(c_r);
    seeds[4].row(gt) = s_bc.cwiseProduct(c_t);

    const Eigen::RowVectorXd s_per = term(5, jets[5].row(0) - jets[6].row(0));
    seeds[5].row(0) = s_per;
    seeds[6].row(0) = -s_per;

    double total = 0.0;
    for (int t = 0; t < 6; ++t) total += w[t] * ms[t];
    if (breakdown) {
      breakdown->mean_square = ms;
      breakdown->total = total;
    }
    return total;
  };
  return obj;
}

TermBreakdown six_term_loss(const Field& field, const AnnulusGeometry& g, const FluxProfile& q,
                            const Cloud& cloud, const TermWeights& w) {
  TermBreakdown out;
  const Objective obj = six_term_objective(g, q, cloud, w, &out);
  evaluate_functional(field, obj.groups, obj.functional);
  return out;
}

ShellBank build_shell_bank(const AnnulusGeometry& g, const ShellSpec& spec) {
  g.validate();
  if (spec.n_s < 3 || spec.n_theta < 3 || spec.n_z < 3) {
    throw std::invalid_argument("build_shell_bank: need at least 3 nodes per axis");
  }
  if (!(0.0 < spec.s_lo && spec.s_lo < spec.s_hi && spec.s_hi <= 1.0)) {
    throw std::invalid_argument("build_shell_bank: need 0 < s_lo < s_hi <= 1");
  }
  ShellBank b;
  b.spec = spec;
  b.ds = (spec.s_hi - spec.s_lo) / (spec.n_s - 1);
  b.dtheta = kTwoPi / spec.n_theta;
  b.dz = g.length / (spec.n_z + 1);
  b.s = Eigen::VectorXd::LinSpaced(spec.n_s, spec.s_lo, spec.s_hi);
  b.theta.resize(spec.n_theta);
  for (int j = 0; j < spec.n_theta; ++j) b.theta(j) = spec.theta_offset + b.dtheta * j;
  b.z.resize(spec.n_z);
  for (int k = 0; k < spec.n_z; ++k) b.z(k) = b.dz * (k + 1);

  const int n = b.size();
  b.points.resize(3, n);
  b.h_theta.resize(n);
  b.weights.resize(n);
  b.gap.resize(spec.n_theta);
  const Eigen::VectorXd ws = interior_trapezoid(spec.n_s);
  const Eigen::VectorXd wz = interior_trapezoid(spec.n_z);
  for (int j = 0; j < spec.n_theta; ++j) {
    const double t = b.theta(j);
    b.gap(j) = g.outer_radius(t) - g.r_min;
    const double rop = g.outer_radius_deriv(t);
    for (int k = 0; k < spec.n_z; ++k) {
      for (int i = 0; i < spec.n_s; ++i) {
        const int c = b.index(i, j, k);
        const double r = g.map_s_to_r(b.s(i), t);
        b.points.col(c) = Eigen::Vector3d(r, t, b.z(k));
        b.h_theta(c) = std::hypot(r, b.s(i) * rop);
        b.weights(c) = ws(i) * wz(k);
      }
    }
  }
  return b;
}

double shell_loss_from_residuals(const ShellBank& b, const Eigen::VectorXd& res, Eigen::VectorXd* d_r) {
  const int n = b.size();
  if (res.size() != n) throw std::invalid_argument("shell_loss_from_residuals: size mismatch");
  const int ns = b.spec.n_s, nt = b.spec.n_theta, nz = b.spec.n_z;
  if (d_r) d_r->setZero(n);
  const double wsum = b.weights.sum();
  double loss = 0.0;
  for (int k = 1; k < nz - 1; ++k) {
    for (int j = 0; j < nt; ++j) {
      const int jm = (j + nt - 1) % nt;
      const int jp = (j + 1) % nt;
      const double cr = 1.0 / (2.0 * b.ds * b.gap(j));
      for (int i = 1; i < ns - 1; ++i) {
        const int c = b.index(i, j, k);
        const double w = b.weights(c) / wsum;
        const double ct = 1.0 / (2.0 * b.dtheta * b.h_theta(c));
        const double cz = 1.0 / (2.0 * b.dz);
        const int ip = b.index(i + 1, j, k), im = b.index(i - 1, j, k);
        const int tp = b.index(i, jp, k), tm = b.index(i, jm, k);
        const int zp = b.index(i, j, k + 1), zm = b.index(i, j, k - 1);
        const double gr = cr * (res(ip) - res(im));
        const double gt = ct * (res(tp) - res(tm));
        const double gz = cz * (res(zp) - res(zm));
        loss += w * (gr * gr + gt * gt + gz * gz);
        if (d_r) {
          (*d_r)(ip) += 2.0 * w * gr * cr;
          (*d_r)(im) -= 2.0 * w * gr * cr;
          (*d_r)(tp) += 2.0 * w * gt * ct;
          (*d_r)(tm) -= 2.0 * w * gt * ct;
          (*d_r)(zp) += 2.0 * w * gz * cz;
          (*d_r)(zm) -= 2.0 * w * gz * cz;
        }
      }
    }
  }
  return loss;
}

double shell_resgrad_loss(const Field& field, const ShellBank& bank) {
  return shell_loss_from_residuals(bank, cylindrical_residuals(field, bank.points));
}

Objective shell_objective(const ShellBank& bank) {
  Objective obj;
  obj.groups.push_back({"shell", bank.points, residual_layout()});
  const Eigen::RowVectorXd inv_r = bank.points.row(0).cwiseInverse();
  const Eigen::RowVectorXd inv_r2 = inv_r.cwiseAbs2();
  const ResidualChannels rc = residual_channels(residual_layout());
  obj.functional = [=](std::span<const Eigen::MatrixXd> jets, std::span<Eigen::MatrixXd> seeds) {
    const Eigen::VectorXd res = (jets[0].row(rc.rr) + jets[0].row(rc.r).cwiseProduct(inv_r) +
                                 jets[0].row(rc.tt).cwiseProduct(inv_r2) + jets[0].row(rc.zz))
                                    .transpose();
    Eigen::VectorXd d;
    const double loss = shell_loss_from_residuals(bank, res, &d);
    const Eigen::RowVectorXd s = d.transpose();
    seeds[0].row(rc.rr) = s;
    seeds[0].row(rc.r) = s.cwiseProduct(inv_r);
    seeds[0].row(rc.tt) = s.cwiseProduct(inv_r2);
    seeds[0].row(rc.zz) = s;
    return loss;
  };
  return obj;
}

double wall_bc_audit(const Field& field, const AnnulusGeometry& g, const FluxProfile& q,
                     int n_theta, int n_z) {
  if (n_theta < 1 || n_z < 2) throw std::invalid_argument("wall_bc_audit: grid too small");
  Eigen::MatrixXd tz(2, static_cast<Eigen::Index>(n_theta) * n_z);
  for (int j = 0; j < n_theta; ++j) {
    for (int k = 0; k < n_z; ++k) {
      tz(0, j * n_z + k) = kTwoPi * j / n_theta;
      tz(1, j * n_z + k) = g.length * k / (n_z - 1);
    }
  }
  const Eigen::VectorXd dn = wall_normal_derivatives(field, g, tz);
  std::vector<double> d(dn.size());
  for (Eigen::Index i = 0; i < dn.size(); ++i) d[i] = dn(i) - q.at(tz(1, i), g.length);
  return rms(std::move(d));
}

WallSlice field_wall_slice(const Field& field, const AnnulusGeometry& g, const WallSlice& like) {
  const Eigen::Index nt = like.theta.size(), nz = like.z.size();
  Eigen::MatrixXd tz(2, nt * nz);
  for (Eigen::Index j = 0; j < nt; ++j) {
    for (Eigen::Index k = 0; k < nz; ++k) {
      tz(0, j * nz + k) = like.theta(j);
      tz(1, j * nz + k) = like.z(k);
    }
  }
  const WallValues v = wall_values(field, g, tz);
  WallSlice out;
  out.theta = like.theta;
  out.z = like.z;
  out.geometry_hash = g.hash();
  out.flux = like.flux;
  out.t_wall.resize(nt, nz);
  out.dtdn.resize(nt, nz);
  for (Eigen::Index j = 0; j < nt; ++j) {
    for (Eigen::Index k = 0; k < nz; ++k) {
      out.t_wall(j, k) = v.t(j * nz + k);
      out.dtdn(j, k) = v.dtdn(j * nz + k);
    }
  }
  return out;
}

WallComparison wall_reference_compare(const Field& field, const AnnulusGeometry& g,
                                      const WallSlice& ref) {
  ref.validate();
  if (ref.geometry_hash != g.hash()) {
    throw std::invalid_argument("wall_reference_compare: reference was built for another geometry");
  }
  const WallSlice net = field_wall_slice(field, g, ref);
  std::vector<double> dt, dn, dbc;
  for (Eigen::Index j = 0; j < ref.theta.size(); ++j) {
    for (Eigen::Index k = 0; k < ref.z.size(); ++k) {
      const double q = ref.flux.at(ref.z(k), g.length);
      dt.push_back(net.t_wall(j, k) - ref.t_wall(j, k));
      dn.push_back(net.dtdn(j, k) - ref.dtdn(j, k));
      dbc.push_back((net.dtdn(j, k) - q) - (ref.dtdn(j, k) - q));
    }
  }
  return {rms(std::move(dt)), rms(std::move(dn)), rms(std::move(dbc))};
}

std::string to_string(Arm a) {
  switch (a) {
    case Arm::off: return "off";
    case Arm::fixed: return "fixed";
    case Arm::scheduled: return "scheduled";
  }
  throw std::invalid_argument("unknown stage2 arm");
}

Arm arm_from_string(const std::string& name) {
  for (Arm a : {Arm::off, Arm::fixed, Arm::scheduled}) {
    if (to_string(a) == name) return a;
  }
  throw std::invalid_argument("unknown stage2 arm '" + name + "' (off, fixed, scheduled)");
}

AuxSchedule shell_schedule(const Config& cfg) {
  switch (cfg.arm) {
    case Arm::off: return AuxSchedule::fixed(0.0);
    case Arm::fixed: return AuxSchedule::fixed(cfg.shell_weight);
    case Arm::scheduled: {
      if (!(cfg.shell_start_weight > 0.0)) {
        throw std::invalid_argument("scheduled shell arm needs a positive start weight");
      }
      const double e = static_cast<double>(std::max(1L, cfg.epochs));
      AuxSchedule s;
      s.hold_len = std::lround(cfg.shell_hold_fraction * e);
      s.decay_len = std::lround(cfg.shell_decay_fraction * e);
      s.target = cfg.shell_start_weight;
      s.final_fraction = cfg.shell_weight / cfg.shell_start_weight;
      return s;
    }
  }
  throw std::invalid_argument("unknown stage2 arm");
}

namespace {

void check_audit_grid(const Config& cfg) {
  if (cfg.audit_n_theta < cfg.shell.n_theta || cfg.audit_n_z < cfg.shell.n_z) {
    throw std::invalid_argument("stage2: dense wall grid is coarser than the shell bank");
  }
}

}  // namespace

WallAuditReport audit_stage2(const Field& field, const Config& cfg, const WallSlice* reference) {
  check_audit_grid(cfg);
  WallAuditReport rep;
  rep.wall_bc_rmse = wall_bc_audit(field, cfg.geometry, cfg.flux, cfg.audit_n_theta, cfg.audit_n_z);
  rep.shell_probe = shell_resgrad_loss(field, build_shell_bank(cfg.geometry, cfg.shell));
  if (reference) {
    const WallComparison c = wall_reference_compare(field, cfg.geometry, *reference);
    rep.t_wall_rmse = c.t_wall_rmse;
    rep.dtdn_wall_rmse = c.dtdn_wall_rmse;
    rep.bc_residual_rmse = c.bc_residual_rmse;
  }
  return rep;
}

Result train_stage2(const Config& cfg, const WallSlice* reference) {
  cfg.geometry.validate();
  check_audit_grid(cfg);
  if (reference && reference->geometry_hash != cfg.geometry.hash()) {
    throw std::invalid_argument("train_stage2: reference was built for another geometry");
  }
  std::vector<int> sizes{3};
  sizes.insert(sizes.end(), cfg.hidden.begin(), cfg.hidden.end());
  sizes.push_back(1);
  const NetworkParams init = init_mlp(sizes, cfg.activation, mix_seed(cfg.init_seed, 0x31));
  const Cloud train_cloud = make_cloud(cfg.geometry, cfg.train_sizes, mix_seed(cfg.cloud_seed, 0x41));
  const Cloud val_cloud = make_cloud(cfg.geometry, cfg.val_sizes, mix_seed(cfg.cloud_seed, 0x42));
  const InputMap map = input_map(cfg.geometry);
  const AuxSchedule sched = shell_schedule(cfg);

  const Objective base =
      map_inputs(six_term_objective(cfg.geometry, cfg.flux, train_cloud, cfg.weights), map);
  const Objective val =
      map_inputs(six_term_objective(cfg.geometry, cfg.flux, val_cloud, cfg.weights), map);
  Objective shell;
  if (cfg.arm != Arm::off) shell = map_inputs(shell_objective(build_shell_bank(cfg.geometry, cfg.shell)), map);

  TrainHooks hooks;
  hooks.validate = [&](const NetworkParams& net) {
    return loss_value(net, val.groups, val.functional, cfg.eval);
  };
  hooks.loss_grad = [&](const NetworkParams& net, long epoch) {
    LossGradient lg = loss_param_gradient(net, base.groups, base.functional, cfg.eval);
    const double lambda = cfg.arm == Arm::off ? 0.0 : aux_weight_at(sched, epoch);
    if (lambda != 0.0) {
      const LossGradient sg = loss_param_gradient(net, shell.groups, shell.functional, cfg.eval);
      lg.value += lambda * sg.value;
      lg.grad += lambda * sg.grad;
    }
    return lg;
  };

  LrSchedule lr = cfg.lr;
  lr.total_epochs = std::max(1L, cfg.epochs);
  auto opt = optimizer_slot(cfg.optimizer, init.num_params());
  Result res;
  res.train = train_loop(init, *opt, lr, cfg.epochs, cfg.validate_every, hooks);
  const NetworkField best(res.train.best, map, cfg.eval);
  res.report = audit_stage2(best, cfg, reference);
  if (!res.train.failed) {
    const NetworkField last(res.train.final, map, cfg.eval);
    res.final_terms = six_term_loss(last, cfg.geometry, cfg.flux, train_cloud, cfg.weights);
  }
  return res;
}

}  // namespace hpinn::stage2
