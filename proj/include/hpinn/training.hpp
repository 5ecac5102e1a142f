#pragma once

#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "hpinn/diffnet.hpp"
#include "hpinn/optim.hpp"

namespace hpinn {

struct HistoryPoint {
  long epoch = 0;
  double train_loss = std::numeric_limits<double>::quiet_NaN();
  double val_loss = std::numeric_limits<double>::quiet_NaN();
};

struct TrainOutcome {
  NetworkParams best;
  NetworkParams final;
  double best_val = std::numeric_limits<double>::infinity();
  long best_epoch = 0;
  double final_loss = std::numeric_limits<double>::quiet_NaN();
  bool failed = false;
  long last_finite_epoch = -1;
  std::string failure;
  std::vector<HistoryPoint> history;
};

struct TrainHooks {
  /// Training objective and its parameter gradient at `epoch`.
  std::function<LossGradient(const NetworkParams&, long epoch)> loss_grad;
  /// Validation objective used for best-checkpoint selection.
  std::function<double(const NetworkParams&)> validate;
};

/// Full-batch loop: one optimizer step per epoch with lr_at(lr, epoch).
/// Validates the initial state, every `validate_every` epochs, and at the end;
/// keeps the parameters with the lowest validation value. A non-finite loss or
/// validation value stops the run and marks it failed.
TrainOutcome train_loop(const NetworkParams& init, Optimizer& opt, const LrSchedule& lr,
                        long epochs, long validate_every, const TrainHooks& hooks);

}  // namespace hpinn
