#include <fstream>
#include <stdexcept>

#include "hpinn/binary_io.hpp"
#include "hpinn/wall_slice.hpp"

namespace hpinn {

namespace {
constexpr char kMagic[9] = "HPINNWAL";
}

void WallSlice::validate() const {
  const Eigen::Index nt = theta.size();
  const Eigen::Index nz = z.size();
  if (nt == 0 || nz == 0) throw std::invalid_argument("wall slice: empty grid");
  if (t_wall.rows() != nt || t_wall.cols() != nz || dtdn.rows() != nt || dtdn.cols() != nz) {
    throw std::invalid_argument("wall slice: array shapes do not match (N_theta, N_z)");
  }
}

void write_wall_slice(std::ostream& os, const WallSlice& s) {
  s.validate();
  using namespace binio;
  put_magic(os, kMagic);
  put_u8(os, kWallSliceVersion);
  for (int i = 0; i < 3; ++i) put_u8(os, 0);
  put_u32(os, static_cast<std::uint32_t>(s.theta.size()));
  put_u32(os, static_cast<std::uint32_t>(s.z.size()));
  put_u64(os, s.geometry_hash);
  put_f64(os, s.flux.z_start);
  put_f64(os, s.flux.z_end);
  put_f64(os, s.flux.q_max);
  for (double v : s.theta) put_f64(os, v);
  for (double v : s.z) put_f64(os, v);
  for (const Eigen::MatrixXd* m : {&s.t_wall, &s.dtdn}) {
    for (Eigen::Index j = 0; j < m->rows(); ++j) {
      for (Eigen::Index k = 0; k < m->cols(); ++k) put_f64(os, (*m)(j, k));
    }
  }
  if (!os) throw std::runtime_error("failed to write wall slice");
}

WallSlice read_wall_slice(std::istream& is) {
  using namespace binio;
  expect_magic(is, kMagic, "wall slice header");
  const std::uint8_t version = get_u8(is, "wall slice version");
  if (version != kWallSliceVersion) {
    throw std::runtime_error("unsupported wall slice version " + std::to_string(version));
  }
  for (int i = 0; i < 3; ++i) get_u8(is, "wall slice header");
  const std::uint32_t nt = get_u32(is, "wall slice N_theta");
  const std::uint32_t nz = get_u32(is, "wall slice N_z");
  if (nt == 0 || nz == 0 || static_cast<std::uint64_t>(nt) * nz > (1ULL << 28)) {
    throw std::runtime_error("wall slice: implausible grid size");
  }
  WallSlice s;
  s.geometry_hash = get_u64(is, "wall slice geometry hash");
  s.flux.z_start = get_f64(is, "wall slice flux");
  s.flux.z_end = get_f64(is, "wall slice flux");
  s.flux.q_max = get_f64(is, "wall slice flux");
  s.theta.resize(nt);
  s.z.resize(nz);
  for (auto& v : s.theta) v = get_f64(is, "wall slice theta");
  for (auto& v : s.z) v = get_f64(is, "wall slice z");
  s.t_wall.resize(nt, nz);
  s.dtdn.resize(nt, nz);
  for (Eigen::MatrixXd* m : {&s.t_wall, &s.dtdn}) {
    for (Eigen::Index j = 0; j < m->rows(); ++j) {
      for (Eigen::Index k = 0; k < m->cols(); ++k) (*m)(j, k) = get_f64(is, "wall slice values");
    }
  }
  return s;
}

void save_wall_slice(const std::filesystem::path& path, const WallSlice& slice) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
  write_wall_slice(os, slice);
}

WallSlice load_wall_slice(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + path.string());
  return read_wall_slice(is);
}

}  // namespace hpinn
