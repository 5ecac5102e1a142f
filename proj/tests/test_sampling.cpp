#include <gtest/gtest.h>

#include <algorithm>
#include <set>

#include "hpinn/sampling.hpp"
#include "hpinn/stats.hpp"

using namespace hpinn;

TEST(Rng, SeededAndInRange) {
  Rng a(42);
  Rng b(42);
  for (int i = 0; i < 1000; ++i) {
    const double x = a.uniform();
    EXPECT_EQ(x, b.uniform());
    EXPECT_GE(x, 0.0);
    EXPECT_LT(x, 1.0);
  }
  EXPECT_NE(mix_seed(0, 1), mix_seed(0, 2));
  EXPECT_NE(mix_seed(0, 1), mix_seed(1, 1));
}

TEST(Sobol, UnshiftedPrefixIsStratified) {
  // The first 2^k points of an unshifted 2-D Sobol sequence put exactly one
  // point in every cell of the 2^k elementary intervals along each axis.
  Sobol s(2, 0);
  const int n = 64;
  std::set<int> xs;
  std::set<int> ys;
  for (int i = 0; i < n; ++i) {
    const auto p = s.next();
    xs.insert(static_cast<int>(p[0] * n));
    ys.insert(static_cast<int>(p[1] * n));
  }
  EXPECT_EQ(xs.size(), 64u);
  EXPECT_EQ(ys.size(), 64u);
}

TEST(Sobol, ShiftKeepsPointsInUnitCubeAndDiffersBySeed) {
  const Eigen::MatrixXd a = sobol_points(3, 256, 7);
  const Eigen::MatrixXd b = sobol_points(3, 256, 7);
  const Eigen::MatrixXd c = sobol_points(3, 256, 8);
  EXPECT_EQ((a - b).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_GT((a - c).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_GE(a.minCoeff(), 0.0);
  EXPECT_LT(a.maxCoeff(), 1.0);
  // Mean of a low-discrepancy set is close to 1/2.
  for (int d = 0; d < 3; ++d) EXPECT_NEAR(a.row(d).mean(), 0.5, 0.01);
  EXPECT_THROW(Sobol(4, 0), std::invalid_argument);
}

TEST(Stats, OrderInvariantSumAndSampleStd) {
  std::vector<double> v{1e16, 1.0, -1e16, 3.0, 0.5};
  std::vector<double> w = v;
  std::reverse(w.begin(), w.end());
  EXPECT_EQ(order_invariant_sum(v), order_invariant_sum(w));
  const MeanStd ms = mean_std({2.0, 4.0, 4.0, 4.0, 5.0, 5.0, 7.0, 9.0});
  EXPECT_DOUBLE_EQ(ms.mean, 5.0);
  EXPECT_NEAR(ms.std, std::sqrt(32.0 / 7.0), 1e-15);
}
