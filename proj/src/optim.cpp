#include "hpinn/optim.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace hpinn {

AdamState::AdamState(std::size_t n, double beta2_, double base_lr_)
    : m(Eigen::VectorXd::Zero(n)), v(Eigen::VectorXd::Zero(n)), beta2(beta2_), base_lr(base_lr_) {}

Eigen::VectorXd adam_step(AdamState& state, const Eigen::VectorXd& grad, double lr_now) {
  if (grad.size() != state.m.size()) throw std::invalid_argument("adam_step: gradient length mismatch");
  for (Eigen::Index i = 0; i < grad.size(); ++i) {
    if (!std::isfinite(grad(i))) {
      throw std::invalid_argument("adam_step: non-finite gradient at index " + std::to_string(i));
    }
  }
  state.step += 1;
  state.m = state.beta1 * state.m + (1.0 - state.beta1) * grad;
  state.v = state.beta2 * state.v + (1.0 - state.beta2) * grad.cwiseAbs2();
  const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  return (-lr_now * (state.m.array() / c1) / ((state.v.array() / c2).sqrt() + state.eps)).matrix();
}

std::string to_string(OptimizerKind k) {
  switch (k) {
    case OptimizerKind::adam95: return "adam95";
    case OptimizerKind::adam999: return "adam999";
    case OptimizerKind::kourkoutas_beta: return "kourkoutas_beta";
  }
  return "?";
}

OptimizerKind optimizer_from_string(const std::string& name) {
  if (name == "adam95") return OptimizerKind::adam95;
  if (name == "adam999") return OptimizerKind::adam999;
  if (name == "kourkoutas_beta") return OptimizerKind::kourkoutas_beta;
  throw std::invalid_argument("unknown optimizer '" + name + "'");
}

std::map<OptimizerKind, OptimizerPlugin>& optimizer_plugins() {
  static std::map<OptimizerKind, OptimizerPlugin> table;
  return table;
}

std::unique_ptr<Optimizer> optimizer_slot(OptimizerKind kind, std::size_t n_params,
                                          const OptimizerSettings& settings) {
  switch (kind) {
    case OptimizerKind::adam95: return std::make_unique<AdamOptimizer>("adam95", n_params, 0.95);
    case OptimizerKind::adam999: return std::make_unique<AdamOptimizer>("adam999", n_params, 0.999);
    case OptimizerKind::kourkoutas_beta: {
      auto it = optimizer_plugins().find(kind);
      if (it == optimizer_plugins().end() || !it->second) {
        throw NotBundledError(
            "kourkoutas_beta is not bundled: register its update rule with optimizer_plugins()");
      }
      return it->second(n_params, settings);
    }
  }
  throw std::invalid_argument("unknown optimizer kind");
}

double lr_at(const LrSchedule& sched, long epoch) {
  if (sched.total_epochs <= 0) throw std::invalid_argument("lr_at: total_epochs must be positive");
  if (epoch < 0 || epoch > sched.total_epochs) throw std::out_of_range("lr_at: epoch out of range");
  if (epoch == 0) return sched.lr_init;
  if (epoch == sched.total_epochs) return sched.lr_final;
  const double t = static_cast<double>(epoch) / static_cast<double>(sched.total_epochs);
  return sched.lr_final +
         0.5 * (sched.lr_init - sched.lr_final) * (1.0 + std::cos(std::numbers::pi * t));
}

AuxSchedule AuxSchedule::fixed(double weight, long start_epoch) {
  AuxSchedule s;
  s.start_epoch = start_epoch;
  s.target = weight;
  s.final_fraction = 1.0;
  return s;
}

double aux_weight_at(const AuxSchedule& s, long epoch) {
  if (epoch < s.start_epoch) return 0.0;
  const double t_in = static_cast<double>(epoch - s.start_epoch);
  if (t_in < s.ramp_len) return s.target * t_in / static_cast<double>(s.ramp_len);
  const double t_hold = t_in - static_cast<double>(s.ramp_len);
  if (t_hold <= s.hold_len) return s.target;
  const double t_decay = t_hold - static_cast<double>(s.hold_len);
  const double final_w = s.final_fraction * s.target;
  if (s.decay_len <= 0 || t_decay >= s.decay_len) return final_w;
  const double u = t_decay / static_cast<double>(s.decay_len);
  if (s.decay_kind == DecayKind::linear) return s.target + (final_w - s.target) * u;
  return final_w + (s.target - final_w) * 0.5 * (1.0 + std::cos(std::numbers::pi * u));
}

}  // namespace hpinn
