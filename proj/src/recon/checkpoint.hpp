#pragma once

#include <cstdint>
#include <string>

#include "recon/model.hpp"

namespace mvb::recon {

// Versioned binary checkpoints. Layout, little endian:
//   magic (8 bytes) | config hash (u64) | array count (u32) |
//   per array: name length (u32), name bytes, ndim (u32), dims (u32 each),
//              values (f64 each)
// Base weights and adapters live in separate files with distinct magics;
// loading verifies the magic, the config hash and every shape, so weights can
// never silently attach to the wrong architecture.

void save_base_checkpoint(const std::string& path, const ReconstructorParams& params);
ReconstructorParams load_base_checkpoint(const std::string& path, const ModelConfig& cfg);

void save_lora_checkpoint(const std::string& path, const LoraParams& params);
LoraParams load_lora_checkpoint(const std::string& path, const ModelConfig& cfg);

// Order-independent digest of parameter values (name + data), used by the
// freeze contract to prove base weights never move during boost training.
std::uint64_t params_digest(const ReconstructorParams& params);

}  // namespace mvb::recon
