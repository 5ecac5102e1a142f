#pragma once

#include <filesystem>
#include <iosfwd>

#include "hpinn/diffnet.hpp"

namespace hpinn {

/// Network checkpoint, little-endian:
///
///   bytes  field
///   8      magic "HPINNCKP"
///   1      format version (kCheckpointVersion)
///   1      activation (0 = tanh, 1 = silu)
///   2      reserved, zero
///   4      u32 number of layer sizes L
///   4*L    u32 layer sizes, input first
///   8      u64 parameter count P
///   8*P    f64 parameters in NetworkParams::flatten order
inline constexpr std::uint8_t kCheckpointVersion = 1;

void write_checkpoint(std::ostream& os, const NetworkParams& net);
NetworkParams read_checkpoint(std::istream& is);

void save_checkpoint(const std::filesystem::path& path, const NetworkParams& net);
NetworkParams load_checkpoint(const std::filesystem::path& path);

}  // namespace hpinn
