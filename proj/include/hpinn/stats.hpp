#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace hpinn {

/// Sum that does not depend on the order of the inputs: values are sorted
/// first, so permuted inputs give bit-identical results.
inline double order_invariant_sum(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  double s = 0.0;
  for (double v : values) s += v;
  return s;
}

inline double order_invariant_mean(std::vector<double> values) {
  if (values.empty()) throw std::invalid_argument("mean of empty set");
  const double n = static_cast<double>(values.size());
  return order_invariant_sum(std::move(values)) / n;
}

inline double rms(std::vector<double> values) {
  for (double& v : values) v *= v;
  return std::sqrt(order_invariant_mean(std::move(values)));
}

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation (n - 1); 0 for a single value
  std::size_t count = 0;
};

inline MeanStd mean_std(const std::vector<double>& values) {
  MeanStd out;
  out.count = values.size();
  if (values.empty()) return out;
  out.mean = order_invariant_mean(values);
  if (values.size() > 1) {
    std::vector<double> sq;
    for (double v : values) sq.push_back((v - out.mean) * (v - out.mean));
    out.std = std::sqrt(order_invariant_sum(sq) / static_cast<double>(values.size() - 1));
  }
  return out;
}

}  // namespace hpinn
