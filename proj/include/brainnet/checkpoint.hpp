#pragma once

#include <string>

#include "brainnet/model.hpp"

namespace brainnet {

// Checkpoint = JSON manifest at `path` (tensor names, shapes, dtype, byte
// offsets, model config) plus a raw blob of little-endian 64-bit floats at
// `path` + ".bin", concatenated in manifest order. Round-trips bit-exactly.
void save_checkpoint(const BrainNetMoE& model, const std::string& path);
BrainNetMoE load_checkpoint(const std::string& path);

std::string blob_path_for(const std::string& manifest_path);

}  // namespace brainnet
