#pragma once

#include <array>
#include <cstdint>
#include <random>
#include <vector>

#include <Eigen/Dense>

namespace hpinn {

/// Seeded 64-bit generator. uniform() uses the top 53 bits directly so the
/// stream does not depend on the standard library's distribution code.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  std::size_t index(std::size_t n) { return static_cast<std::size_t>(uniform() * n); }

 private:
  std::mt19937_64 engine_;
};

/// Derives independent stream seeds from one user seed (splitmix64 finalizer).
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream);

/// Gray-code Sobol sequence in up to 3 dimensions (Joe-Kuo direction numbers)
/// with a seeded digital shift. Points lie in [0, 1)^dims.
class Sobol {
 public:
  static constexpr int kMaxDims = 3;

  Sobol(int dims, std::uint64_t shift_seed);
  std::vector<double> next();

 private:
  int dims_;
  std::uint32_t count_ = 0;
  std::vector<std::array<std::uint32_t, 32>> directions_;
  std::vector<std::uint32_t> state_;
  std::vector<std::uint32_t> shift_;
};

/// First n points of a shifted Sobol sequence as a dims x n matrix.
Eigen::MatrixXd sobol_points(int dims, int n, std::uint64_t shift_seed);

}  // namespace hpinn
