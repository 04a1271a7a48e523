#pragma once

#include <string>

#include "deter/nn.hpp"

namespace deter {

// Checkpoint layout, all little-endian:
//   "DETM" | u32 version (=1)
//   config: u64 d_tsdae | u64 d_use | u32 n | n x u64 tsdae widths | u32 n | n x u64 use widths
//           | f64 dropout | u64 n_classes | u32 activation | u64 seed
//   u64 total parameter count
//   per layer in declaration order (TSDAE branch, USE branch, head):
//           in*out f32 weights (row-major, in rows) | out f32 biases
inline constexpr std::uint32_t kCheckpointVersion = 1;

std::string serialize_model(const Model& m);
Model deserialize_model(const std::string& bytes);

void save_model(const Model& m, const std::string& path);
Model load_model(const std::string& path);

}  // namespace deter
