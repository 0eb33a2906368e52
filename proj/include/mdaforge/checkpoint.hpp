#pragma once

#include <filesystem>

#include "json.hpp"
#include "mdaforge/model.hpp"

namespace mdaforge {

// Binary container, little endian:
//   "MDAFCKPT" | u32 version | u64 header length | header JSON
//   then per parameter (ModelBundle::parameters() order): u64 rows | u64 cols | rows*cols f64
// The header always carries "dims" and "seed"; callers add their own keys.
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  ModelBundle model;
  nlohmann::json header;
};

void save_checkpoint(const std::filesystem::path& path, const ModelBundle& model, nlohmann::json header);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace mdaforge
