#pragma once

#include <functional>
#include <optional>

#include "hpinn/diffnet.hpp"

namespace hpinn {

/// Fixed affine input normalization xi = scale * (x - shift), applied before the
/// network. Derivative channels pick up the product of the per-axis scales.
struct InputMap {
  Eigen::VectorXd shift;
  Eigen::VectorXd scale;

  static InputMap identity(int dim);
  Eigen::MatrixXd apply(const Eigen::MatrixXd& points) const;
  /// Per-channel chain-rule factor (channels x 1).
  Eigen::VectorXd channel_factors(const JetLayout& layout) const;
};

/// Anything that can report derivative channels at a batch of points: a network,
/// or a closed-form oracle field used to test residual-consuming code.
class Field {
 public:
  virtual ~Field() = default;
  virtual int input_dim() const = 0;
  /// layout.size() x points.cols()
  virtual Eigen::MatrixXd jets(const Eigen::MatrixXd& points, const JetLayout& layout) const = 0;
};

class NetworkField final : public Field {
 public:
  explicit NetworkField(const NetworkParams& net, std::optional<InputMap> map = std::nullopt,
                        EvalOptions opts = {});
  int input_dim() const override { return net_.input_dim(); }
  Eigen::MatrixXd jets(const Eigen::MatrixXd& points, const JetLayout& layout) const override;

 private:
  const NetworkParams& net_;
  InputMap map_;
  EvalOptions opts_;
};

/// Closed-form field: fn(partial, x) returns the requested derivative at x.
class AnalyticField final : public Field {
 public:
  using Fn = std::function<double(const Partial&, const double* x)>;
  AnalyticField(int input_dim, Fn fn) : dim_(input_dim), fn_(std::move(fn)) {}
  int input_dim() const override { return dim_; }
  Eigen::MatrixXd jets(const Eigen::MatrixXd& points, const JetLayout& layout) const override;

 private:
  int dim_;
  Fn fn_;
};

/// Point groups plus the loss defined on their derivative channels.
struct Objective {
  std::vector<PointGroup> groups;
  LossFunctional functional;
};

/// Rewrites an objective stated in physical coordinates so a network that sees
/// map.apply(x) can be trained on it: points are mapped, incoming jets are
/// scaled back to physical derivatives and the seeds are scaled forward.
Objective map_inputs(const Objective& physical, const InputMap& map);

/// Evaluates a composite loss on any field (network or oracle).
double evaluate_functional(const Field& field, std::span<const PointGroup> groups,
                           const LossFunctional& loss);

}  // namespace hpinn
