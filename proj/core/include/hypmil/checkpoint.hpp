#pragma once

// Parameter checkpoints, little-endian:
//   "HPCK1" | u32 version | u32 record count |
//   per record: u32 name length | name (UTF-8) | u32 rank | u64 extents[rank]
//               | float64 payload (row-major)
// Records follow ModelParams::named_tensors() order.

#include <string>

#include "hypmil/model.hpp"

namespace hypmil::model {

inline constexpr char kCheckpointMagic[] = "HPCK1";
inline constexpr std::uint32_t kCheckpointVersion = 1;

std::string encode_checkpoint(const ModelParams& params);
// kBadMagic, kVersionMismatch, kTruncated, kManifest (unknown/missing
// records or inconsistent shapes).
ModelParams decode_checkpoint(std::string_view bytes);

void save_checkpoint(const ModelParams& params, const std::string& path);
ModelParams load_checkpoint(const std::string& path);

}  // namespace hypmil::model
