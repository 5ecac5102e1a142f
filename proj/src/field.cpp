#include "hpinn/field.hpp"

namespace hpinn {

InputMap InputMap::identity(int dim) {
  return {Eigen::VectorXd::Zero(dim), Eigen::VectorXd::Ones(dim)};
}

Eigen::MatrixXd InputMap::apply(const Eigen::MatrixXd& points) const {
  return ((points.colwise() - shift).array().colwise() * scale.array()).matrix();
}

Eigen::VectorXd InputMap::channel_factors(const JetLayout& layout) const {
  Eigen::VectorXd f(layout.size());
  for (int c = 0; c < layout.size(); ++c) {
    const Partial& p = layout.channel(c);
    double v = 1.0;
    for (int k = 0; k < p.order(); ++k) v *= scale(p.dim(k));
    f(c) = v;
  }
  return f;
}

NetworkField::NetworkField(const NetworkParams& net, std::optional<InputMap> map, EvalOptions opts)
    : net_(net), map_(map ? *map : InputMap::identity(net.input_dim())), opts_(opts) {}

Eigen::MatrixXd NetworkField::jets(const Eigen::MatrixXd& points, const JetLayout& layout) const {
  Eigen::MatrixXd j = forward_jets(net_, map_.apply(points), layout, opts_);
  return j.array().colwise() * map_.channel_factors(layout).array();
}

Eigen::MatrixXd AnalyticField::jets(const Eigen::MatrixXd& points, const JetLayout& layout) const {
  if (points.rows() != dim_) throw std::invalid_argument("AnalyticField: dimension mismatch");
  Eigen::MatrixXd out(layout.size(), points.cols());
  for (Eigen::Index i = 0; i < points.cols(); ++i) {
    for (int c = 0; c < layout.size(); ++c) out(c, i) = fn_(layout.channel(c), points.col(i).data());
  }
  return out;
}

Objective map_inputs(const Objective& physical, const InputMap& map) {
  Objective out;
  std::vector<Eigen::VectorXd> factors;
  for (const auto& g : physical.groups) {
    out.groups.push_back({g.name, map.apply(g.points), g.layout});
    factors.push_back(map.channel_factors(g.layout));
  }
  const LossFunctional inner = physical.functional;
  out.functional = [inner, factors](std::span<const Eigen::MatrixXd> jets,
                                    std::span<Eigen::MatrixXd> seeds) {
    std::vector<Eigen::MatrixXd> phys(jets.size());
    for (std::size_t g = 0; g < jets.size(); ++g) {
      phys[g] = jets[g].array().colwise() * factors[g].array();
    }
    const double value = inner(phys, seeds);
    for (std::size_t g = 0; g < seeds.size(); ++g) {
      seeds[g] = seeds[g].array().colwise() * factors[g].array();
    }
    return value;
  };
  return out;
}

double evaluate_functional(const Field& field, std::span<const PointGroup> groups,
                           const LossFunctional& loss) {
  std::vector<Eigen::MatrixXd> jets;
  std::vector<Eigen::MatrixXd> seeds;
  for (const auto& g : groups) {
    jets.push_back(field.jets(g.points, g.layout));
    seeds.push_back(Eigen::MatrixXd::Zero(jets.back().rows(), jets.back().cols()));
  }
  return loss(jets, seeds);
}

}  // namespace hpinn
