#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "evhdr/network.hpp"

namespace evhdr::net {

// Checkpoint archive: "EVHC", u32 version, u64 manifest length, a JSON
// manifest (network config, ablation, step, tensor names/shapes/offsets),
// then every tensor as raw little-endian float32 in manifest order.
struct CheckpointInfo {
  NetworkConfig network;
  AblationConfig ablation;
  int64_t step = 0;
};

void save_checkpoint(const std::filesystem::path& path, HdrNet& model, int64_t step);
CheckpointInfo read_checkpoint_info(const std::filesystem::path& path);
/// Rebuilds the model recorded in the archive and restores its parameters.
HdrNet load_checkpoint(const std::filesystem::path& path, CheckpointInfo* info = nullptr);

std::string network_config_json(const NetworkConfig& cfg);
NetworkConfig network_config_from_json(const std::string& text);

}  // namespace evhdr::net
