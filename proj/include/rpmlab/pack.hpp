#pragma once

#include <array>
#include <stdexcept>
#include <string>
#include <vector>

#include "rpmlab/generator.hpp"
#include "rpmlab/puzzle.hpp"

namespace rpmlab {

struct PackError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct PackEntry {
  RpmProblem problem;
  // 16 grayscale images, x1..x8 then y1..y8, each resolution*resolution bytes
  std::array<std::vector<uint8_t>, 16> images;
};

struct Pack {
  int height = 0, width = 0;
  std::vector<PackEntry> entries;
};

struct DatasetSpec {
  std::vector<std::pair<Config, int>> configs;  // (configuration, problem count)
  uint64_t seed = 0;
  int resolution = 32;
  GeneratorOptions gen;
};

// Generates and rasterizes all problems. Per-problem seeds derive from the
// master seed and the global ordinal, so the result is bit-reproducible.
Pack build_dataset(const DatasetSpec& spec);

// Dataset pack file, magic "RPMD", version 1, little-endian throughout.
void write_pack(const Pack& pack, const std::string& path);
Pack load_pack(const std::string& path);

// u8 images scale to [0,1] by division by 255.
inline float to_unit(uint8_t v) { return static_cast<float>(v) / 255.0f; }

}  // namespace rpmlab
