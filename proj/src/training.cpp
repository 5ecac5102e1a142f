#include "hpinn/training.hpp"

#include <cmath>

namespace hpinn {

namespace {

double safe_validate(const TrainHooks& hooks, const NetworkParams& net) {
  try {
    return hooks.validate(net);
  } catch (const NonFiniteError&) {
    return std::numeric_limits<double>::quiet_NaN();
  }
}

}  // namespace

TrainOutcome train_loop(const NetworkParams& init, Optimizer& opt, const LrSchedule& lr,
                        long epochs, long validate_every, const TrainHooks& hooks) {
  if (epochs < 0) throw std::invalid_argument("train_loop: negative epoch count");
  if (validate_every <= 0) throw std::invalid_argument("train_loop: validate_every must be positive");
  TrainOutcome out;
  NetworkParams net = init;
  out.best = net;
  out.best_val = safe_validate(hooks, net);
  out.history.push_back({0, std::numeric_limits<double>::quiet_NaN(), out.best_val});

  if (epochs == 0) {
    out.final_loss = hooks.loss_grad(net, 0).value;
    out.last_finite_epoch = 0;
    out.final = net;
    return out;
  }

  for (long e = 0; e < epochs; ++e) {
    LossGradient lg;
    try {
      lg = hooks.loss_grad(net, e);
    } catch (const NonFiniteError& err) {
      out.failed = true;
      out.failure = "epoch " + std::to_string(e) + ": " + err.what();
      break;
    }
    out.final_loss = lg.value;
    out.last_finite_epoch = e;
    const Eigen::VectorXd delta = opt.step(lg.grad, lr_at(lr, e));
    net.assign(net.flatten() + delta);

    const long done = e + 1;
    if (done % validate_every == 0 || done == epochs) {
      const double v = safe_validate(hooks, net);
      out.history.push_back({done, lg.value, v});
      if (!std::isfinite(v)) {
        out.failed = true;
        out.failure = "epoch " + std::to_string(done) + ": non-finite validation loss";
        break;
      }
      if (v < out.best_val) {
        out.best_val = v;
        out.best = net;
        out.best_epoch = done;
      }
    }
  }
  out.final = net;
  return out;
}

}  // namespace hpinn
