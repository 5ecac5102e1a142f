#include "hpinn/sampling.hpp"

#include <array>
#include <bit>
#include <stdexcept>

namespace hpinn {

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

namespace {

struct JoeKuo {
  int degree;
  std::uint32_t coeffs;
  std::array<std::uint32_t, 2> m;
};

// Dimensions 2 and 3 of the Joe-Kuo new-joe-kuo-6.21201 table.
constexpr std::array<JoeKuo, 2> kJoeKuo = {{
    {1, 0, {1, 0}},
    {2, 1, {1, 3}},
}};

std::array<std::uint32_t, 32> directions_for(int d) {
  std::array<std::uint32_t, 32> v{};
  if (d == 0) {
    for (int k = 0; k < 32; ++k) v[k] = 1u << (31 - k);
    return v;
  }
  const JoeKuo& p = kJoeKuo[d - 1];
  const int s = p.degree;
  std::array<std::uint32_t, 32> m{};
  for (int k = 0; k < s; ++k) m[k] = p.m[k];
  for (int k = s; k < 32; ++k) {
    std::uint32_t mk = m[k - s] ^ (m[k - s] << s);
    for (int i = 1; i < s; ++i) {
      if ((p.coeffs >> (s - 1 - i)) & 1u) mk ^= m[k - i] << i;
    }
    m[k] = mk;
  }
  for (int k = 0; k < 32; ++k) v[k] = m[k] << (31 - k);
  return v;
}

}  // namespace

Sobol::Sobol(int dims, std::uint64_t shift_seed) : dims_(dims) {
  if (dims < 1 || dims > kMaxDims) throw std::invalid_argument("Sobol: dims must be in [1, 3]");
  Rng rng(shift_seed);
  for (int d = 0; d < dims; ++d) {
    directions_.push_back(directions_for(d));
    state_.push_back(0);
    shift_.push_back(static_cast<std::uint32_t>(rng.next() >> 32));
  }
}

std::vector<double> Sobol::next() {
  std::vector<double> out(dims_);
  for (int d = 0; d < dims_; ++d) {
    out[d] = static_cast<double>(state_[d] ^ shift_[d]) * 0x1.0p-32;
  }
  const int c = std::countr_one(count_);
  if (c >= 32) throw std::overflow_error("Sobol: sequence exhausted");
  for (int d = 0; d < dims_; ++d) state_[d] ^= directions_[d][c];
  ++count_;
  return out;
}

Eigen::MatrixXd sobol_points(int dims, int n, std::uint64_t shift_seed) {
  Sobol seq(dims, shift_seed);
  Eigen::MatrixXd pts(dims, n);
  for (int i = 0; i < n; ++i) {
    const auto p = seq.next();
    for (int d = 0; d < dims; ++d) pts(d, i) = p[d];
  }
  return pts;
}

}  // namespace hpinn
