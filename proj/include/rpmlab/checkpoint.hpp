#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>

#include "rpmlab/adam.hpp"
#include "rpmlab/network.hpp"

namespace rpmlab {

struct CheckpointError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct LoadedCheckpoint {
  Network<float> net;
  std::optional<AdamState<float>> adam;
  uint64_t seed = 0;
};

// Binary checkpoint, magic "RPMC", version 1, little-endian: spec JSON, named
// f32 arrays, optional Adam moments, RNG seed. save -> load -> save is
// byte-identical.
void save_checkpoint(const std::string& path, const Network<float>& net,
                     const AdamState<float>* adam, uint64_t seed);

LoadedCheckpoint load_checkpoint(const std::string& path);

}  // namespace rpmlab
