#pragma once

// Finite-difference oracles used only by the tests. They call scalar point
// evaluators and never touch the derivative-channel machinery they check.

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include <Eigen/Dense>

namespace hpinn::testing {

using ScalarFn = std::function<double(const Eigen::VectorXd&)>;

/// Fourth-order central first derivative along axis i.
inline double fd_first(const ScalarFn& f, Eigen::VectorXd x, int i, double h = 1e-3) {
  auto at = [&](double s) {
    Eigen::VectorXd y = x;
    y(i) += s * h;
    return f(y);
  };
  return (-at(2) + 8.0 * at(1) - 8.0 * at(-1) + at(-2)) / (12.0 * h);
}

/// Fourth-order central pure second derivative along axis i.
inline double fd_second(const ScalarFn& f, Eigen::VectorXd x, int i, double h = 1e-3) {
  auto at = [&](double s) {
    Eigen::VectorXd y = x;
    y(i) += s * h;
    return f(y);
  };
  return (-at(2) + 16.0 * at(1) - 30.0 * at(0) + 16.0 * at(-1) - at(-2)) / (12.0 * h * h);
}

/// Fourth-order central pure third derivative along axis i.
inline double fd_third_raw(const ScalarFn& f, Eigen::VectorXd x, int i, double h) {
  auto at = [&](double s) {
    Eigen::VectorXd y = x;
    y(i) += s * h;
    return f(y);
  };
  return (-at(3) + 8.0 * at(2) - 13.0 * at(1) + 13.0 * at(-1) - 8.0 * at(-2) + at(-3)) /
         (8.0 * h * h * h);
}

/// One Richardson step on a fourth-order estimate D(h): (16 D(h/2) - D(h)) / 15.
template <typename Estimate>
double richardson4(Estimate&& d, double h) {
  return (16.0 * d(0.5 * h) - d(h)) / 15.0;
}

/// Sixth-order pure third derivative along axis i.
inline double fd_third(const ScalarFn& f, const Eigen::VectorXd& x, int i, double h = 1e-2) {
  return richardson4([&](double s) { return fd_third_raw(f, x, i, s); }, h);
}

/// d/dx_i of the pure second derivative along axis j (i != j), sixth order.
inline double fd_mixed_third(const ScalarFn& f, const Eigen::VectorXd& x, int i, int j,
                             double h = 1e-2) {
  return richardson4(
      [&](double s) {
        ScalarFn second_j = [&](const Eigen::VectorXd& y) { return fd_second(f, y, j, s); };
        return fd_first(second_j, x, i, s);
      },
      h);
}

/// Central-difference gradient of a scalar function of a flat parameter vector.
inline Eigen::VectorXd fd_gradient(const std::function<double(const Eigen::VectorXd&)>& f,
                                   const Eigen::VectorXd& theta, double h = 1e-3) {
  Eigen::VectorXd g(theta.size());
  for (Eigen::Index k = 0; k < theta.size(); ++k) {
    auto at = [&](double s) {
      Eigen::VectorXd t = theta;
      t(k) += s * h;
      return f(t);
    };
    g(k) = (-at(2) + 8.0 * at(1) - 8.0 * at(-1) + at(-2)) / (12.0 * h);
  }
  return g;
}

/// |a - b| <= rtol * max(|b|, floor)
inline bool close_rel(double a, double b, double rtol, double floor) {
  return std::abs(a - b) <= rtol * std::max(std::abs(b), floor);
}

}  // namespace hpinn::testing
