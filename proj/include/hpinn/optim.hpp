#pragma once

#include <functional>
#include <map>
#include <memory>
#include <string>

#include <Eigen/Dense>

namespace hpinn {

/// Bias-corrected Adam state.
struct AdamState {
  Eigen::VectorXd m;
  Eigen::VectorXd v;
  long step = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double base_lr = 1e-3;

  AdamState(std::size_t n, double beta2_, double base_lr_ = 1e-3);
};

/// Advances `state` by one step and returns the parameter delta.
/// Throws std::invalid_argument naming the first non-finite gradient index.
Eigen::VectorXd adam_step(AdamState& state, const Eigen::VectorXd& grad, double lr_now);

/// Uniform step interface shared by every optimizer slot.
class Optimizer {
 public:
  virtual ~Optimizer() = default;
  virtual std::string name() const = 0;
  virtual Eigen::VectorXd step(const Eigen::VectorXd& grad, double lr) = 0;
};

class AdamOptimizer final : public Optimizer {
 public:
  AdamOptimizer(std::string name, std::size_t n, double beta2) : name_(std::move(name)), state_(n, beta2) {}
  std::string name() const override { return name_; }
  Eigen::VectorXd step(const Eigen::VectorXd& grad, double lr) override { return adam_step(state_, grad, lr); }
  const AdamState& state() const { return state_; }

 private:
  std::string name_;
  AdamState state_;
};

enum class OptimizerKind { adam95, adam999, kourkoutas_beta };

std::string to_string(OptimizerKind k);
OptimizerKind optimizer_from_string(const std::string& name);

struct OptimizerSettings {
  /// Decay constant for the Kourkoutas-beta family; only forwarded to a plug-in.
  double kbeta_decay = 0.98;
};

/// Factory for optimizers whose update rule is not bundled here.
using OptimizerPlugin =
    std::function<std::unique_ptr<Optimizer>(std::size_t n_params, const OptimizerSettings&)>;

/// Process-wide plug-in table keyed by optimizer kind.
std::map<OptimizerKind, OptimizerPlugin>& optimizer_plugins();

/// Raised when kourkoutas_beta is requested without a registered plug-in.
class NotBundledError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::unique_ptr<Optimizer> optimizer_slot(OptimizerKind kind, std::size_t n_params,
                                          const OptimizerSettings& settings = {});

/// Cosine learning-rate decay from lr_init at epoch 0 to lr_final at total_epochs.
struct LrSchedule {
  double lr_init = 7.5e-3;
  double lr_final = 1e-5;
  long total_epochs = 1;
};

double lr_at(const LrSchedule& sched, long epoch);

enum class DecayKind { linear, cosine };

/// Auxiliary-weight schedule: 0 before start, linear ramp to target, hold,
/// then decay to final_fraction * target.
struct AuxSchedule {
  long start_epoch = 0;
  long ramp_len = 0;
  long hold_len = 0;
  long decay_len = 0;
  DecayKind decay_kind = DecayKind::linear;
  double target = 0.0;
  double final_fraction = 1.0;

  /// Constant weight from start_epoch on.
  static AuxSchedule fixed(double weight, long start_epoch = 0);
};

double aux_weight_at(const AuxSchedule& sched, long epoch);

}  // namespace hpinn
