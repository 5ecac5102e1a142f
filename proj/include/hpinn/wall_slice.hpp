#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>

#include <Eigen/Dense>

#include "hpinn/geometry.hpp"

namespace hpinn {

/// Outer-wall temperature and wall-normal derivative on a (theta, z) grid.
/// t_wall(j, k) and dtdn(j, k) belong to (theta(j), z(k)).
struct WallSlice {
  Eigen::VectorXd theta;
  Eigen::VectorXd z;
  Eigen::MatrixXd t_wall;
  Eigen::MatrixXd dtdn;
  std::uint64_t geometry_hash = 0;
  FluxProfile flux;

  /// Throws if the arrays do not agree on (N_theta, N_z).
  void validate() const;
};

/// Wall slice file, little-endian:
///
///   bytes       field
///   8           magic "HPINNWAL"
///   1           format version (kWallSliceVersion)
///   3           reserved, zero
///   4           u32 N_theta
///   4           u32 N_z
///   8           u64 geometry hash (AnnulusGeometry::hash)
///   8 x 3       f64 flux z_start, z_end, q_max
///   8 N_theta   f64 theta nodes
///   8 N_z       f64 z nodes
///   8 N_theta N_z  f64 T_wall, theta-major (index j * N_z + k)
///   8 N_theta N_z  f64 dT/dn, same order
inline constexpr std::uint8_t kWallSliceVersion = 1;

void write_wall_slice(std::ostream& os, const WallSlice& slice);
WallSlice read_wall_slice(std::istream& is);
void save_wall_slice(const std::filesystem::path& path, const WallSlice& slice);
WallSlice load_wall_slice(const std::filesystem::path& path);

}  // namespace hpinn
