#include "hpinn/diffnet.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <thread>

#include "hpinn/sampling.hpp"

namespace hpinn {

std::string to_string(Activation a) { return a == Activation::tanh ? "tanh" : "silu"; }

Activation activation_from_string(const std::string& name) {
  if (name == "tanh") return Activation::tanh;
  if (name == "silu") return Activation::silu;
  throw std::invalid_argument("unknown activation '" + name + "'");
}

std::size_t NetworkParams::num_params() const {
  std::size_t n = 0;
  for (std::size_t l = 0; l < weights.size(); ++l) n += weights[l].size() + biases[l].size();
  return n;
}

Eigen::VectorXd NetworkParams::flatten() const {
  Eigen::VectorXd flat(num_params());
  Eigen::Index k = 0;
  for (std::size_t l = 0; l < weights.size(); ++l) {
    flat.segment(k, weights[l].size()) = weights[l].reshaped();
    k += weights[l].size();
    flat.segment(k, biases[l].size()) = biases[l];
    k += biases[l].size();
  }
  return flat;
}

void NetworkParams::assign(const Eigen::VectorXd& flat) {
  if (static_cast<std::size_t>(flat.size()) != num_params()) {
    throw std::invalid_argument("parameter vector length mismatch");
  }
  Eigen::Index k = 0;
  for (std::size_t l = 0; l < weights.size(); ++l) {
    weights[l].reshaped() = flat.segment(k, weights[l].size());
    k += weights[l].size();
    biases[l] = flat.segment(k, biases[l].size());
    k += biases[l].size();
  }
}

void NetworkParams::validate() const {
  if (layer_sizes.size() < 3) throw std::invalid_argument("network needs at least one hidden layer");
  if (layer_sizes.back() != 1) throw std::invalid_argument("network output dimension must be 1");
  for (int s : layer_sizes) {
    if (s <= 0) throw std::invalid_argument("layer sizes must be positive");
  }
  if (weights.size() != layer_sizes.size() - 1 || biases.size() != weights.size()) {
    throw std::invalid_argument("layer count does not match layer_sizes");
  }
  for (std::size_t l = 0; l < weights.size(); ++l) {
    if (weights[l].rows() != layer_sizes[l + 1] || weights[l].cols() != layer_sizes[l] ||
        biases[l].size() != layer_sizes[l + 1]) {
      std::ostringstream os;
      os << "layer " << l << " shape does not chain";
      throw std::invalid_argument(os.str());
    }
    if (!weights[l].allFinite() || !biases[l].allFinite()) {
      throw std::invalid_argument("network parameters must be finite");
    }
  }
}

NetworkParams init_mlp(const std::vector<int>& layer_sizes, Activation activation,
                       std::uint64_t seed) {
  if (layer_sizes.size() < 3) throw std::invalid_argument("init_mlp: empty hidden stack");
  if (layer_sizes.back() != 1) throw std::invalid_argument("init_mlp: output dimension must be 1");
  NetworkParams net;
  net.layer_sizes = layer_sizes;
  net.activation = activation;
  Rng rng(seed);
  for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l) {
    const int fan_in = layer_sizes[l];
    const int fan_out = layer_sizes[l + 1];
    if (fan_in <= 0 || fan_out <= 0) throw std::invalid_argument("init_mlp: non-positive layer size");
    const double limit = std::sqrt(3.0 / fan_in);
    Eigen::MatrixXd w(fan_out, fan_in);
    for (Eigen::Index j = 0; j < w.cols(); ++j) {
      for (Eigen::Index i = 0; i < w.rows(); ++i) w(i, j) = rng.uniform(-limit, limit);
    }
    net.weights.push_back(std::move(w));
    net.biases.push_back(Eigen::VectorXd::Zero(fan_out));
  }
  return net;
}

// ---------------------------------------------------------------------------

Partial::Partial(std::initializer_list<int> dims) {
  if (dims.size() > kMaxOrder) throw std::invalid_argument("Partial: order above 3");
  int k = 0;
  for (int d : dims) {
    if (d < 0) throw std::invalid_argument("Partial: negative input index");
    dims_[k++] = d;
  }
  order_ = k;
  std::sort(dims_.begin(), dims_.begin() + order_);
}

int Partial::max_dim() const {
  int m = -1;
  for (int k = 0; k < order_; ++k) m = std::max(m, dims_[k]);
  return m;
}

std::string Partial::str() const {
  if (order_ == 0) return "u";
  std::string s = "d";
  for (int k = 0; k < order_; ++k) s += std::to_string(dims_[k]);
  return s;
}

namespace {

using PositionBlocks = std::vector<std::vector<int>>;

const std::vector<PositionBlocks>& set_partitions(int m) {
  static const std::vector<PositionBlocks> p1 = {{{0}}};
  static const std::vector<PositionBlocks> p2 = {{{0, 1}}, {{0}, {1}}};
  static const std::vector<PositionBlocks> p3 = {
      {{0, 1, 2}}, {{0, 1}, {2}}, {{0, 2}, {1}}, {{1, 2}, {0}}, {{0}, {1}, {2}}};
  static const std::vector<PositionBlocks> none;
  switch (m) {
    case 1: return p1;
    case 2: return p2;
    case 3: return p3;
    default: return none;
  }
}

Partial sub_partial(const Partial& p, const std::vector<int>& positions) {
  switch (positions.size()) {
    case 1: return Partial::d(p.dim(positions[0]));
    case 2: return Partial::d(p.dim(positions[0]), p.dim(positions[1]));
    case 3: return Partial::d(p.dim(positions[0]), p.dim(positions[1]), p.dim(positions[2]));
    default: return Partial::value();
  }
}

void add_with_closure(const Partial& p, std::map<Partial, int>& set) {
  if (set.count(p)) return;
  set.emplace(p, 0);
  for (int drop = 0; drop < p.order(); ++drop) {
    std::vector<int> keep;
    for (int k = 0; k < p.order(); ++k) {
      if (k != drop) keep.push_back(k);
    }
    add_with_closure(sub_partial(p, keep), set);
  }
}

}  // namespace

JetLayout::JetLayout(int input_dim, const std::vector<Partial>& requested) : input_dim_(input_dim) {
  if (input_dim <= 0) throw std::invalid_argument("JetLayout: input_dim must be positive");
  add_with_closure(Partial::value(), index_);
  for (const Partial& p : requested) {
    if (p.max_dim() >= input_dim) throw std::invalid_argument("JetLayout: input index out of range");
    add_with_closure(p, index_);
  }
  int c = 0;
  for (auto& [p, idx] : index_) {
    idx = c++;
    channels_.push_back(p);
    max_order_ = std::max(max_order_, p.order());
  }
  terms_.resize(channels_.size());
  for (std::size_t ch = 0; ch < channels_.size(); ++ch) {
    const Partial& p = channels_[ch];
    for (const PositionBlocks& partition : set_partitions(p.order())) {
      Term t;
      t.order = static_cast<int>(partition.size());
      for (const auto& block : partition) t.blocks.push_back(index_.at(sub_partial(p, block)));
      terms_[ch].push_back(std::move(t));
    }
  }
}

JetLayout JetLayout::gradient(int input_dim) {
  std::vector<Partial> req;
  for (int i = 0; i < input_dim; ++i) req.push_back(Partial::d(i));
  return JetLayout(input_dim, req);
}

JetLayout JetLayout::with_pure_seconds(int input_dim, const std::vector<int>& dirs) {
  std::vector<Partial> req;
  for (int i = 0; i < input_dim; ++i) req.push_back(Partial::d(i));
  for (int i : dirs) req.push_back(Partial::d(i, i));
  return JetLayout(input_dim, req);
}

int JetLayout::index(const Partial& p) const {
  auto it = index_.find(p);
  if (it == index_.end()) throw std::out_of_range("JetLayout: channel " + p.str() + " not present");
  return it->second;
}

// ---------------------------------------------------------------------------

ParamGradient ParamGradient::zeros_like(const NetworkParams& net) {
  ParamGradient g;
  for (std::size_t l = 0; l < net.weights.size(); ++l) {
    g.weights.push_back(Eigen::MatrixXd::Zero(net.weights[l].rows(), net.weights[l].cols()));
    g.biases.push_back(Eigen::VectorXd::Zero(net.biases[l].size()));
  }
  return g;
}

ParamGradient& ParamGradient::operator+=(const ParamGradient& other) {
  for (std::size_t l = 0; l < weights.size(); ++l) {
    weights[l] += other.weights[l];
    biases[l] += other.biases[l];
  }
  return *this;
}

Eigen::VectorXd ParamGradient::flatten() const {
  Eigen::Index n = 0;
  for (std::size_t l = 0; l < weights.size(); ++l) n += weights[l].size() + biases[l].size();
  Eigen::VectorXd flat(n);
  Eigen::Index k = 0;
  for (std::size_t l = 0; l < weights.size(); ++l) {
    flat.segment(k, weights[l].size()) = weights[l].reshaped();
    k += weights[l].size();
    flat.segment(k, biases[l].size()) = biases[l];
    k += biases[l].size();
  }
  return flat;
}

// ---------------------------------------------------------------------------

namespace {

/// Eigen's double tanh is scalar; this form vectorizes. Relative error stays
/// below 1e-12, with the Taylor branch covering the cancellation near zero.
Eigen::ArrayXXd fast_tanh(const Eigen::ArrayXXd& z) {
  const Eigen::ArrayXXd a = z.abs();
  const Eigen::ArrayXXd e = (-2.0 * a).exp();
  const Eigen::ArrayXXd big = z.sign() * (1.0 - e) / (1.0 + e);
  const Eigen::ArrayXXd z2 = z.square();
  const Eigen::ArrayXXd small = z * (1.0 + z2 * (-1.0 / 3.0 + z2 * (2.0 / 15.0)));
  return (a < 1e-3).select(small, big);
}

/// sigma^(k)(z) for k = 0..max_k (max_k <= 4), written as polynomials in
/// tanh(z) or in the logistic function.
std::vector<Eigen::ArrayXXd> activation_derivatives(Activation act, const Eigen::ArrayXXd& z,
                                                    int max_k) {
  std::vector<Eigen::ArrayXXd> s(max_k + 1);
  if (act == Activation::tanh) {
    const Eigen::ArrayXXd t = fast_tanh(z);
    const Eigen::ArrayXXd t2 = t.square();
    s[0] = t;
    if (max_k >= 1) s[1] = 1.0 - t2;
    if (max_k >= 2) s[2] = -2.0 * t * (1.0 - t2);
    if (max_k >= 3) s[3] = -2.0 + t2 * (8.0 - 6.0 * t2);
    if (max_k >= 4) s[4] = t * (16.0 + t2 * (-40.0 + 24.0 * t2));
  } else {
    const Eigen::ArrayXXd g = 1.0 / (1.0 + (-z).exp());
    std::vector<Eigen::ArrayXXd> q(max_k + 1);
    q[0] = g;
    if (max_k >= 1) q[1] = g * (1.0 - g);
    if (max_k >= 2) q[2] = g * (1.0 + g * (-3.0 + 2.0 * g));
    if (max_k >= 3) q[3] = g * (1.0 + g * (-7.0 + g * (12.0 - 6.0 * g)));
    if (max_k >= 4) q[4] = g * (1.0 + g * (-15.0 + g * (50.0 + g * (-60.0 + 24.0 * g))));
    s[0] = z * g;
    for (int k = 1; k <= max_k; ++k) s[k] = z * q[k] + static_cast<double>(k) * q[k - 1];
  }
  return s;
}

struct LayerTape {
  Eigen::MatrixXd input;               // width_in x (channels * n)
  Eigen::MatrixXd pre;                 // width_out x (channels * n)
  std::vector<Eigen::ArrayXXd> sigma;  // sigma^(k)(pre value block)
};

struct ChunkTape {
  std::vector<LayerTape> layers;
  Eigen::MatrixXd last_input;
};

Eigen::MatrixXd input_channels(const Eigen::MatrixXd& points, const JetLayout& layout) {
  const Eigen::Index n = points.cols();
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(points.rows(), layout.size() * n);
  a.leftCols(n) = points;
  for (int c = 1; c < layout.size(); ++c) {
    const Partial& p = layout.channel(c);
    if (p.order() == 1) a.block(p.dim(0), c * n, 1, n).setOnes();
  }
  return a;
}

/// Runs one chunk forward; returns channels x n. Fills `tape` if non-null.
Eigen::MatrixXd forward_chunk(const NetworkParams& net, const Eigen::MatrixXd& points,
                              const JetLayout& layout, ChunkTape* tape) {
  const Eigen::Index n = points.cols();
  const int nch = layout.size();
  const int max_k = layout.max_order() + (tape ? 1 : 0);
  Eigen::MatrixXd a = input_channels(points, layout);
  const int hidden = net.num_layers() - 1;
  if (tape) tape->layers.resize(hidden);
  for (int l = 0; l < hidden; ++l) {
    Eigen::MatrixXd z = net.weights[l] * a;
    z.leftCols(n).colwise() += net.biases[l];
    std::vector<Eigen::ArrayXXd> s =
        activation_derivatives(net.activation, z.leftCols(n).array(), max_k);
    Eigen::MatrixXd next(z.rows(), nch * n);
    next.leftCols(n) = s[0].matrix();
    const Eigen::Index len = z.rows() * n;
    for (int c = 1; c < nch; ++c) {
      double* out = next.data() + c * len;
      std::fill(out, out + len, 0.0);
      for (const auto& term : layout.terms(c)) {
        const double* sk = s[term.order].data();
        const std::size_t nb = term.blocks.size();
        const double* b0 = z.data() + term.blocks[0] * len;
        const double* b1 = nb > 1 ? z.data() + term.blocks[1] * len : nullptr;
        const double* b2 = nb > 2 ? z.data() + term.blocks[2] * len : nullptr;
        if (nb == 1) {
          for (Eigen::Index e = 0; e < len; ++e) out[e] += sk[e] * b0[e];
        } else if (nb == 2) {
          for (Eigen::Index e = 0; e < len; ++e) out[e] += sk[e] * b0[e] * b1[e];
        } else {
          for (Eigen::Index e = 0; e < len; ++e) out[e] += sk[e] * b0[e] * b1[e] * b2[e];
        }
      }
    }
    if (tape) {
      tape->layers[l].input = std::move(a);
      tape->layers[l].pre = std::move(z);
      tape->layers[l].sigma = std::move(s);
    }
    a = std::move(next);
  }
  Eigen::MatrixXd out = net.weights.back() * a;
  out.leftCols(n).array() += net.biases.back()(0);
  if (tape) tape->last_input = std::move(a);
  return out.reshaped(n, nch).transpose();
}

void backward_chunk(const NetworkParams& net, const JetLayout& layout, const ChunkTape& tape,
                    const Eigen::MatrixXd& seeds, ParamGradient& grad) {
  const int nch = layout.size();
  const Eigen::Index n = seeds.cols();
  const Eigen::MatrixXd g_out = seeds.transpose().reshaped(1, nch * n);
  const int last = net.num_layers() - 1;
  grad.weights[last].noalias() += g_out * tape.last_input.transpose();
  grad.biases[last](0) += g_out.leftCols(n).sum();
  Eigen::MatrixXd da = net.weights[last].transpose() * g_out;
  for (int l = last - 1; l >= 0; --l) {
    const LayerTape& lt = tape.layers[l];
    const Eigen::MatrixXd& z = lt.pre;
    const auto& s = lt.sigma;
    Eigen::MatrixXd dz = Eigen::MatrixXd::Zero(z.rows(), nch * n);
    const Eigen::Index len = z.rows() * n;
    double* dz0 = dz.data();
    {
      const double* da0 = da.data();
      const double* s1 = s[1].data();
      for (Eigen::Index e = 0; e < len; ++e) dz0[e] += da0[e] * s1[e];
    }
    for (int c = 1; c < nch; ++c) {
      const double* dac = da.data() + c * len;
      for (const auto& term : layout.terms(c)) {
        const std::size_t nb = term.blocks.size();
        const double* sk = s[term.order].data();
        const double* sk1 = s[term.order + 1].data();
        const double* b0 = z.data() + term.blocks[0] * len;
        double* d0 = dz.data() + term.blocks[0] * len;
        if (nb == 1) {
          for (Eigen::Index e = 0; e < len; ++e) {
            dz0[e] += dac[e] * sk1[e] * b0[e];
            d0[e] += dac[e] * sk[e];
          }
        } else if (nb == 2) {
          const double* b1 = z.data() + term.blocks[1] * len;
          double* d1 = dz.data() + term.blocks[1] * len;
          for (Eigen::Index e = 0; e < len; ++e) {
            const double g = dac[e];
            dz0[e] += g * sk1[e] * b0[e] * b1[e];
            d0[e] += g * sk[e] * b1[e];
            d1[e] += g * sk[e] * b0[e];
          }
        } else {
          const double* b1 = z.data() + term.blocks[1] * len;
          const double* b2 = z.data() + term.blocks[2] * len;
          double* d1 = dz.data() + term.blocks[1] * len;
          double* d2 = dz.data() + term.blocks[2] * len;
          for (Eigen::Index e = 0; e < len; ++e) {
            const double g = dac[e];
            dz0[e] += g * sk1[e] * b0[e] * b1[e] * b2[e];
            d0[e] += g * sk[e] * b1[e] * b2[e];
            d1[e] += g * sk[e] * b0[e] * b2[e];
            d2[e] += g * sk[e] * b0[e] * b1[e];
          }
        }
      }
    }
    grad.weights[l].noalias() += dz * lt.input.transpose();
    grad.biases[l] += dz.leftCols(n).rowwise().sum();
    if (l > 0) da = net.weights[l].transpose() * dz;
  }
}

struct ChunkPlan {
  std::vector<std::pair<Eigen::Index, Eigen::Index>> ranges;  // (start, count)
};

ChunkPlan plan_chunks(Eigen::Index n, int chunk_size) {
  ChunkPlan plan;
  const Eigen::Index cs = std::max(1, chunk_size);
  for (Eigen::Index s = 0; s < n; s += cs) plan.ranges.emplace_back(s, std::min(cs, n - s));
  return plan;
}

/// Runs fn(i) for i in [0, count) on up to `threads` workers.
template <typename Fn>
void for_each_index(std::size_t count, int threads, Fn&& fn) {
  if (threads <= 1 || count <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  const std::size_t workers = std::min<std::size_t>(threads, count);
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      for (std::size_t i = w; i < count; i += workers) fn(i);
    });
  }
  for (auto& t : pool) t.join();
}

void check_input(const NetworkParams& net, const Eigen::MatrixXd& points, const JetLayout& layout) {
  if (points.rows() != net.input_dim() || layout.input_dim() != net.input_dim()) {
    throw std::invalid_argument("input dimension mismatch: network expects " +
                                std::to_string(net.input_dim()));
  }
}

void check_finite(const Eigen::MatrixXd& m, const std::string& term, const char* what) {
  if (m.allFinite()) return;
  throw NonFiniteError(term, std::string("non-finite ") + what + " in loss term '" + term + "'");
}

}  // namespace

Eigen::MatrixXd forward_jets(const NetworkParams& net, const Eigen::MatrixXd& points,
                             const JetLayout& layout, const EvalOptions& opts) {
  check_input(net, points, layout);
  const ChunkPlan plan = plan_chunks(points.cols(), opts.chunk_size);
  Eigen::MatrixXd out(layout.size(), points.cols());
  for_each_index(plan.ranges.size(), opts.threads, [&](std::size_t i) {
    const auto [start, count] = plan.ranges[i];
    out.middleCols(start, count) =
        forward_chunk(net, points.middleCols(start, count), layout, nullptr);
  });
  return out;
}

double eval(const NetworkParams& net, std::span<const double> x) {
  if (static_cast<int>(x.size()) != net.input_dim()) {
    throw std::invalid_argument("eval: input dimension mismatch");
  }
  const Eigen::MatrixXd pt = Eigen::Map<const Eigen::VectorXd>(x.data(), x.size());
  return forward_jets(net, pt, JetLayout(net.input_dim(), {}))(0, 0);
}

DerivativeBundle eval_with_input_derivs(const NetworkParams& net, std::span<const double> x,
                                        const std::vector<int>& second_dirs) {
  const int d = net.input_dim();
  if (static_cast<int>(x.size()) != d) {
    throw std::invalid_argument("eval_with_input_derivs: input dimension mismatch");
  }
  for (int i : second_dirs) {
    if (i < 0 || i >= d) throw std::invalid_argument("eval_with_input_derivs: bad direction");
  }
  const JetLayout layout = JetLayout::with_pure_seconds(d, second_dirs);
  const Eigen::MatrixXd pt = Eigen::Map<const Eigen::VectorXd>(x.data(), x.size());
  const Eigen::MatrixXd jets = forward_jets(net, pt, layout);
  DerivativeBundle b;
  b.value = jets(0, 0);
  for (int i = 0; i < d; ++i) b.grad.push_back(jets(layout.index(Partial::d(i)), 0));
  for (int i : second_dirs) b.second[i] = jets(layout.index(Partial::d(i, i)), 0);
  return b;
}

namespace {

// Above this many tape bytes the forward pass is recomputed during backward
// instead of keeping every chunk's activations alive.
constexpr double kTapeBudgetBytes = 768.0 * 1024 * 1024;

double tape_bytes(const NetworkParams& net, std::span<const PointGroup> groups) {
  double per_point_channel = 0.0;
  for (int l = 0; l + 1 < net.num_layers(); ++l) {
    per_point_channel += net.layer_sizes[l] + net.layer_sizes[l + 1];
  }
  double total = 0.0;
  for (const auto& g : groups) {
    const double sig = (g.layout.max_order() + 2.0) / g.layout.size();
    total += per_point_channel * (1.0 + sig) * g.layout.size() * g.points.cols() * 8.0;
  }
  return total;
}

struct GroupRun {
  ChunkPlan plan;
  std::vector<ChunkTape> tapes;
};

double evaluate_loss(const NetworkParams& net, std::span<const PointGroup> groups,
                     const LossFunctional& loss, const EvalOptions& opts, bool keep_tape,
                     std::vector<GroupRun>& runs, std::vector<Eigen::MatrixXd>& seeds) {
  std::vector<Eigen::MatrixXd> jets(groups.size());
  runs.assign(groups.size(), {});
  for (std::size_t gi = 0; gi < groups.size(); ++gi) {
    const PointGroup& g = groups[gi];
    check_input(net, g.points, g.layout);
    GroupRun& run = runs[gi];
    run.plan = plan_chunks(g.points.cols(), opts.chunk_size);
    if (keep_tape) run.tapes.resize(run.plan.ranges.size());
    jets[gi].resize(g.layout.size(), g.points.cols());
    for_each_index(run.plan.ranges.size(), opts.threads, [&](std::size_t i) {
      const auto [start, count] = run.plan.ranges[i];
      jets[gi].middleCols(start, count) = forward_chunk(
          net, g.points.middleCols(start, count), g.layout, keep_tape ? &run.tapes[i] : nullptr);
    });
    check_finite(jets[gi], g.name, "network output");
  }
  seeds.resize(groups.size());
  for (std::size_t gi = 0; gi < groups.size(); ++gi) {
    seeds[gi] = Eigen::MatrixXd::Zero(jets[gi].rows(), jets[gi].cols());
  }
  const double value = loss(jets, seeds);
  if (!std::isfinite(value)) {
    throw NonFiniteError("total", "non-finite loss value");
  }
  for (std::size_t gi = 0; gi < groups.size(); ++gi) {
    check_finite(seeds[gi], groups[gi].name, "loss sensitivity");
  }
  return value;
}

}  // namespace

double loss_value(const NetworkParams& net, std::span<const PointGroup> groups,
                  const LossFunctional& loss, const EvalOptions& opts) {
  std::vector<GroupRun> runs;
  std::vector<Eigen::MatrixXd> seeds;
  return evaluate_loss(net, groups, loss, opts, false, runs, seeds);
}

LossGradient loss_param_gradient(const NetworkParams& net, std::span<const PointGroup> groups,
                                 const LossFunctional& loss, const EvalOptions& opts) {
  const bool keep_tape = tape_bytes(net, groups) <= kTapeBudgetBytes;
  std::vector<GroupRun> runs;
  std::vector<Eigen::MatrixXd> seeds;
  LossGradient out;
  out.value = evaluate_loss(net, groups, loss, opts, keep_tape, runs, seeds);

  ParamGradient total = ParamGradient::zeros_like(net);
  const std::size_t window = static_cast<std::size_t>(std::max(1, opts.threads));
  std::vector<ParamGradient> slots(window, ParamGradient::zeros_like(net));
  for (std::size_t gi = 0; gi < groups.size(); ++gi) {
    const PointGroup& g = groups[gi];
    GroupRun& run = runs[gi];
    const std::size_t nchunks = run.plan.ranges.size();
    for (std::size_t base = 0; base < nchunks; base += window) {
      const std::size_t count = std::min(window, nchunks - base);
      for_each_index(count, opts.threads, [&](std::size_t w) {
        const std::size_t i = base + w;
        const auto [start, len] = run.plan.ranges[i];
        slots[w] = ParamGradient::zeros_like(net);
        ChunkTape local;
        const ChunkTape* tape = &local;
        if (keep_tape) {
          tape = &run.tapes[i];
        } else {
          forward_chunk(net, g.points.middleCols(start, len), g.layout, &local);
        }
        backward_chunk(net, g.layout, *tape, seeds[gi].middleCols(start, len), slots[w]);
      });
      for (std::size_t w = 0; w < count; ++w) total += slots[w];
    }
    run.tapes.clear();
  }
  out.grad = total.flatten();
  if (!out.grad.allFinite()) throw NonFiniteError("gradient", "non-finite parameter gradient");
  return out;
}

}  // namespace hpinn
