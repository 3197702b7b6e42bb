#pragma once

#include <filesystem>
#include <string>

#include "neid/adam.hpp"
#include "neid/model.hpp"

namespace neid {

/// On-disk format: <dir>/manifest.json plus <dir>/params.bin of little-endian
/// IEEE-754 32-bit values concatenated in manifest entry order. Optimizer
/// moments live under the reserved "adam.m/" and "adam.v/" name prefixes.
struct Checkpoint {
  ArchConfig arch;
  ParamMap<float> params;
  AdamState<float> adam;
  std::int64_t epoch = 0;
  std::string sampler_state;  // serialized Rng, empty if not training
  std::string config_json;    // training config snapshot, may be empty
};

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& dir);

/// Throws CorruptCheckpoint on version, offset, or length inconsistency.
Checkpoint load_checkpoint(const std::filesystem::path& dir);

}  // namespace neid
