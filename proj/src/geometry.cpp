#include "hpinn/geometry.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <stdexcept>

namespace hpinn {

double AnnulusGeometry::outer_radius(double theta) const {
  return r_max + amplitude * std::sin(lobes * theta);
}

double AnnulusGeometry::outer_radius_deriv(double theta) const {
  return amplitude * lobes * std::cos(lobes * theta);
}

double AnnulusGeometry::outer_radius_deriv2(double theta) const {
  return -amplitude * lobes * lobes * std::sin(lobes * theta);
}

double AnnulusGeometry::r_outer_max() const { return r_max + std::abs(amplitude); }

double AnnulusGeometry::map_s_to_r(double s, double theta) const {
  if (!(s >= 0.0 && s <= 1.0)) throw std::out_of_range("map_s_to_r: s outside [0, 1]");
  return r_min + s * (outer_radius(theta) - r_min);
}

double AnnulusGeometry::map_r_to_s(double r, double theta) const {
  return (r - r_min) / (outer_radius(theta) - r_min);
}

void AnnulusGeometry::validate() const {
  if (!(r_min > 0.0)) throw std::invalid_argument("geometry: r_min must be positive");
  if (!(r_max - std::abs(amplitude) > r_min)) {
    throw std::invalid_argument("geometry: outer wall must stay outside r_min");
  }
  if (!(length > 0.0)) throw std::invalid_argument("geometry: length must be positive");
  if (lobes < 0) throw std::invalid_argument("geometry: negative lobe count");
}

std::uint64_t AnnulusGeometry::hash() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&](std::uint64_t word) {
    for (int i = 0; i < 8; ++i) {
      h ^= (word >> (8 * i)) & 0xFF;
      h *= 0x100000001b3ULL;
    }
  };
  for (double v : {r_min, r_max, length, amplitude, static_cast<double>(lobes)}) {
    mix(std::bit_cast<std::uint64_t>(v));
  }
  return h;
}

FluxProfile FluxProfile::default_ramp(const AnnulusGeometry& g) {
  return {0.2 * g.length, 0.4 * g.length, 1.0};
}

FluxProfile FluxProfile::constant(double q) { return {0.0, 0.0, q}; }

double FluxProfile::at(double z) const {
  if (z_end <= z_start) return z >= z_start ? q_max : 0.0;
  return q_max * std::clamp((z - z_start) / (z_end - z_start), 0.0, 1.0);
}

double FluxProfile::at(double z, double length) const {
  if (!(z >= 0.0 && z <= length)) throw std::out_of_range("flux profile: z outside [0, L]");
  return at(z);
}

}  // namespace hpinn
