#pragma once

#include <cstdint>

namespace hpinn {

/// Annulus r_min <= r <= r_o(theta), 0 <= z <= length, with a wavy outer wall
/// r_o(theta) = r_max + amplitude * sin(lobes * theta).
struct AnnulusGeometry {
  double r_min = 0.2;
  double r_max = 1.0;
  double length = 10.0;
  double amplitude = 0.25;
  int lobes = 3;

  double outer_radius(double theta) const;
  double outer_radius_deriv(double theta) const;
  double outer_radius_deriv2(double theta) const;
  /// Largest outer radius over theta.
  double r_outer_max() const;

  /// r(s, theta) = r_min + s (r_o(theta) - r_min); throws for s outside [0, 1].
  double map_s_to_r(double s, double theta) const;
  /// Inverse of map_s_to_r for fixed theta.
  double map_r_to_s(double r, double theta) const;

  /// Throws unless the outer wall stays outside r_min and the length is positive.
  void validate() const;
  /// FNV-1a over the little-endian bytes of every field; stored in wall slices.
  std::uint64_t hash() const;
};

/// Prescribed outer-wall flux dT/dn = q(z): zero before z_start, a linear ramp
/// to q_max at z_end, then constant. z_end <= z_start gives a step at z_start.
struct FluxProfile {
  double z_start = 2.0;
  double z_end = 4.0;
  double q_max = 1.0;

  /// Ramp over [0.2 L, 0.4 L] with unit plateau.
  static FluxProfile default_ramp(const AnnulusGeometry& g);
  /// q(z) = q for every z.
  static FluxProfile constant(double q);

  /// Throws for z outside [0, length].
  double at(double z, double length) const;
  double at(double z) const;
};

}  // namespace hpinn
