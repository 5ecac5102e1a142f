#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace hpinn {

enum class Activation { tanh, silu };

std::string to_string(Activation a);
Activation activation_from_string(const std::string& name);

/// Dense multilayer perceptron with scalar output.
///
/// weights[l] maps layer l (size layer_sizes[l]) to layer l + 1 and has shape
/// layer_sizes[l + 1] x layer_sizes[l]. Every layer except the last applies the
/// activation; the output layer is affine.
struct NetworkParams {
  std::vector<int> layer_sizes;
  Activation activation = Activation::tanh;
  std::vector<Eigen::MatrixXd> weights;
  std::vector<Eigen::VectorXd> biases;

  int input_dim() const { return layer_sizes.front(); }
  int num_layers() const { return static_cast<int>(weights.size()); }
  std::size_t num_params() const;

  /// Flat parameter order: for each layer, W in column-major order then b.
  Eigen::VectorXd flatten() const;
  void assign(const Eigen::VectorXd& flat);

  /// Throws std::invalid_argument if shapes do not chain or entries are not finite.
  void validate() const;
};

/// Fan-in scaled uniform initialization, U(-sqrt(3/fan_in), sqrt(3/fan_in)) weights,
/// zero biases. Deterministic in (layer_sizes, activation, seed).
NetworkParams init_mlp(const std::vector<int>& layer_sizes, Activation activation,
                       std::uint64_t seed);

/// A partial derivative with respect to the inputs, of order 0..3.
/// Dimensions are kept sorted so that d(x, y) and d(y, x) compare equal.
class Partial {
 public:
  static constexpr int kMaxOrder = 3;

  Partial() = default;
  static Partial value() { return {}; }
  static Partial d(int i) { return Partial({i}); }
  static Partial d(int i, int j) { return Partial({i, j}); }
  static Partial d(int i, int j, int k) { return Partial({i, j, k}); }

  int order() const { return order_; }
  int dim(int pos) const { return dims_[pos]; }
  int max_dim() const;
  std::string str() const;

  friend bool operator==(const Partial& a, const Partial& b) {
    return a.order_ == b.order_ && a.dims_ == b.dims_;
  }
  friend bool operator<(const Partial& a, const Partial& b) {
    if (a.order_ != b.order_) return a.order_ < b.order_;
    return a.dims_ < b.dims_;
  }

 private:
  explicit Partial(std::initializer_list<int> dims);
  std::array<int, kMaxOrder> dims_{-1, -1, -1};
  int order_ = 0;

  friend class JetLayout;
};

/// Set of derivative channels propagated through the network, closed under
/// taking lower-order sub-derivatives. Channel 0 is always the value.
class JetLayout {
 public:
  JetLayout(int input_dim, const std::vector<Partial>& requested);

  /// Value plus first derivatives in every input direction.
  static JetLayout gradient(int input_dim);
  /// Value, gradient and the pure second derivatives along `dirs`.
  static JetLayout with_pure_seconds(int input_dim, const std::vector<int>& dirs);

  int input_dim() const { return input_dim_; }
  int size() const { return static_cast<int>(channels_.size()); }
  int max_order() const { return max_order_; }
  const Partial& channel(int c) const { return channels_[c]; }
  bool contains(const Partial& p) const { return index_.count(p) > 0; }
  /// Throws std::out_of_range for channels not in the layout.
  int index(const Partial& p) const;

  /// One term of the generalized chain rule:
  /// d^alpha sigma(z) = sum over set partitions P of sigma^(|P|)(z) * prod_B z_B.
  struct Term {
    int order;                 // |P|
    std::vector<int> blocks;   // channel indices of the block derivatives
  };
  const std::vector<Term>& terms(int c) const { return terms_[c]; }

 private:
  int input_dim_;
  int max_order_ = 0;
  std::vector<Partial> channels_;
  std::map<Partial, int> index_;
  std::vector<std::vector<Term>> terms_;
};

/// Parameter-shaped gradient accumulator.
struct ParamGradient {
  std::vector<Eigen::MatrixXd> weights;
  std::vector<Eigen::VectorXd> biases;

  static ParamGradient zeros_like(const NetworkParams& net);
  ParamGradient& operator+=(const ParamGradient& other);
  Eigen::VectorXd flatten() const;
};

struct EvalOptions {
  int chunk_size = 256;
  /// Worker threads for chunked evaluation. Results do not depend on this value.
  int threads = 1;
};

/// Derivative channels of the network output over a batch of points.
/// `points` is input_dim x n; the result is layout.size() x n.
Eigen::MatrixXd forward_jets(const NetworkParams& net, const Eigen::MatrixXd& points,
                             const JetLayout& layout, const EvalOptions& opts = {});

double eval(const NetworkParams& net, std::span<const double> x);

struct DerivativeBundle {
  double value = 0.0;
  std::vector<double> grad;
  std::map<int, double> second;  // pure d^2/dx_i^2 for each requested i
};

DerivativeBundle eval_with_input_derivs(const NetworkParams& net, std::span<const double> x,
                                        const std::vector<int>& second_dirs);

/// Points and derivative channels of one term of a composite loss.
struct PointGroup {
  std::string name;
  Eigen::MatrixXd points;  // input_dim x n
  JetLayout layout;
};

/// Computes a scalar loss from the jets of every group and writes dLoss/dJet
/// into `seeds` (pre-sized and zeroed, one matrix per group, same shape as jets).
using LossFunctional = std::function<double(std::span<const Eigen::MatrixXd> jets,
                                            std::span<Eigen::MatrixXd> seeds)>;

struct LossGradient {
  double value = 0.0;
  Eigen::VectorXd grad;  // flat, NetworkParams::flatten order
};

/// Thrown when a loss evaluation produces a non-finite intermediate.
class NonFiniteError : public std::runtime_error {
 public:
  NonFiniteError(std::string term, const std::string& what)
      : std::runtime_error(what), term_(std::move(term)) {}
  const std::string& term() const { return term_; }

 private:
  std::string term_;
};

/// Gradient of a composite loss with respect to every network parameter.
/// Reductions run in fixed chunk order regardless of opts.threads.
LossGradient loss_param_gradient(const NetworkParams& net, std::span<const PointGroup> groups,
                                 const LossFunctional& loss, const EvalOptions& opts = {});

/// Value of the same composite loss without the parameter gradient.
double loss_value(const NetworkParams& net, std::span<const PointGroup> groups,
                  const LossFunctional& loss, const EvalOptions& opts = {});

}  // namespace hpinn
