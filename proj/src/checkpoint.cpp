#include "hpinn/checkpoint.hpp"

#include <fstream>

#include "hpinn/binary_io.hpp"

namespace hpinn {

namespace {
constexpr char kMagic[9] = "HPINNCKP";
}

void write_checkpoint(std::ostream& os, const NetworkParams& net) {
  net.validate();
  binio::put_magic(os, kMagic);
  binio::put_u8(os, kCheckpointVersion);
  binio::put_u8(os, net.activation == Activation::tanh ? 0 : 1);
  binio::put_u8(os, 0);
  binio::put_u8(os, 0);
  binio::put_u32(os, static_cast<std::uint32_t>(net.layer_sizes.size()));
  for (int s : net.layer_sizes) binio::put_u32(os, static_cast<std::uint32_t>(s));
  const Eigen::VectorXd flat = net.flatten();
  binio::put_u64(os, static_cast<std::uint64_t>(flat.size()));
  for (double v : flat) binio::put_f64(os, v);
}

NetworkParams read_checkpoint(std::istream& is) {
  binio::expect_magic(is, kMagic, "checkpoint");
  const auto version = binio::get_u8(is, "checkpoint version");
  if (version != kCheckpointVersion) {
    throw std::runtime_error("unsupported checkpoint version " + std::to_string(version));
  }
  const auto act = binio::get_u8(is, "checkpoint activation");
  if (act > 1) throw std::runtime_error("unknown activation tag in checkpoint");
  binio::get_u8(is, "checkpoint header");
  binio::get_u8(is, "checkpoint header");
  const auto nsizes = binio::get_u32(is, "layer count");
  if (nsizes < 3 || nsizes > 4096) throw std::runtime_error("implausible layer count in checkpoint");
  std::vector<int> sizes;
  for (std::uint32_t i = 0; i < nsizes; ++i) {
    sizes.push_back(static_cast<int>(binio::get_u32(is, "layer sizes")));
  }
  NetworkParams net = init_mlp(sizes, act == 0 ? Activation::tanh : Activation::silu, 0);
  const auto count = binio::get_u64(is, "parameter count");
  if (count != net.num_params()) throw std::runtime_error("checkpoint parameter count mismatch");
  Eigen::VectorXd flat(static_cast<Eigen::Index>(count));
  for (auto& v : flat) v = binio::get_f64(is, "parameters");
  net.assign(flat);
  net.validate();
  return net;
}

void save_checkpoint(const std::filesystem::path& path, const NetworkParams& net) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
  write_checkpoint(os, net);
}

NetworkParams load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + path.string());
  return read_checkpoint(is);
}

}  // namespace hpinn
