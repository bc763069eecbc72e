#include "rpmlab/pack.hpp"

#include <cstring>
#include <fstream>

#include "rpmlab/raster.hpp"

namespace rpmlab {

namespace {

constexpr char kMagic[4] = {'R', 'P', 'M', 'D'};
constexpr uint16_t kVersion = 1;

template <typename U>
void write_le(std::ofstream& out, U v) {
  uint8_t buf[sizeof(U)];
  for (size_t i = 0; i < sizeof(U); ++i) buf[i] = static_cast<uint8_t>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(buf), sizeof(U));
}

template <typename U>
U read_le(std::ifstream& in, const std::string& path) {
  uint8_t buf[sizeof(U)];
  in.read(reinterpret_cast<char*>(buf), sizeof(U));
  if (in.gcount() != sizeof(U)) throw PackError("truncated pack file '" + path + "'");
  U v = 0;
  for (size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(buf[i]) << (8 * i);
  return v;
}

}  // namespace

Pack build_dataset(const DatasetSpec& spec) {
  for (const auto& [config, count] : spec.configs) {
    (void)config;
    if (count < 1) throw std::invalid_argument("build_dataset: counts must be >= 1");
  }
  Pack pack;
  pack.height = pack.width = spec.resolution;
  uint64_t ordinal = 0;
  for (const auto& [config, count] : spec.configs)
    for (int i = 0; i < count; ++i, ++ordinal) {
      PackEntry entry;
      entry.problem = generate_problem(config, problem_seed(spec.seed, ordinal), spec.gen);
      for (int k = 0; k < 8; ++k)
        entry.images[k] = render_panel(entry.problem.context[k], spec.resolution).px;
      for (int k = 0; k < 8; ++k)
        entry.images[8 + k] = render_panel(entry.problem.candidates[k], spec.resolution).px;
      pack.entries.push_back(std::move(entry));
    }
  return pack;
}

void write_pack(const Pack& pack, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw PackError("cannot open '" + path + "' for writing");
  out.write(kMagic, 4);
  write_le(out, kVersion);
  write_le(out, static_cast<uint32_t>(pack.entries.size()));
  write_le(out, static_cast<uint16_t>(pack.height));
  write_le(out, static_cast<uint16_t>(pack.width));
  const size_t image_bytes = static_cast<size_t>(pack.height) * pack.width;
  for (const auto& entry : pack.entries) {
    write_le(out, static_cast<uint8_t>(entry.problem.config));
    write_le(out, static_cast<uint8_t>(entry.problem.answer));
    std::string blob = problem_to_json(entry.problem).dump();
    write_le(out, static_cast<uint32_t>(blob.size()));
    out.write(blob.data(), static_cast<std::streamsize>(blob.size()));
    for (const auto& img : entry.images) {
      if (img.size() != image_bytes)
        throw PackError("image size mismatch while writing '" + path + "'");
      out.write(reinterpret_cast<const char*>(img.data()),
                static_cast<std::streamsize>(img.size()));
    }
  }
  if (!out) throw PackError("write failed for '" + path + "'");
}

Pack load_pack(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw PackError("cannot open '" + path + "' for reading");
  char magic[4];
  in.read(magic, 4);
  if (in.gcount() != 4 || std::memcmp(magic, kMagic, 4) != 0)
    throw PackError("'" + path + "' is not a dataset pack (bad magic)");
  uint16_t version = read_le<uint16_t>(in, path);
  if (version != kVersion)
    throw PackError("'" + path + "' has unsupported pack version " + std::to_string(version));
  uint32_t count = read_le<uint32_t>(in, path);
  Pack pack;
  pack.height = read_le<uint16_t>(in, path);
  pack.width = read_le<uint16_t>(in, path);
  if (pack.height == 0 || pack.width == 0)
    throw PackError("'" + path + "' declares an empty resolution");
  const size_t image_bytes = static_cast<size_t>(pack.height) * pack.width;
  pack.entries.reserve(count);
  for (uint32_t i = 0; i < count; ++i) {
    PackEntry entry;
    uint8_t config_id = read_le<uint8_t>(in, path);
    uint8_t answer = read_le<uint8_t>(in, path);
    if (config_id >= kAllConfigs.size() || answer >= 8)
      throw PackError("'" + path + "' has a corrupt problem header at ordinal " +
                      std::to_string(i));
    uint32_t blob_len = read_le<uint32_t>(in, path);
    if (blob_len > (1u << 24))
      throw PackError("'" + path + "' has a corrupt annotation length at ordinal " +
                      std::to_string(i));
    std::string blob(blob_len, '\0');
    in.read(blob.data(), blob_len);
    if (in.gcount() != static_cast<std::streamsize>(blob_len))
      throw PackError("truncated pack file '" + path + "'");
    try {
      entry.problem = problem_from_json(nlohmann::json::parse(blob));
    } catch (const std::exception& e) {
      throw PackError("'" + path + "' has a corrupt annotation at ordinal " + std::to_string(i) +
                      ": " + e.what());
    }
    if (entry.problem.config != static_cast<Config>(config_id) ||
        entry.problem.answer != answer)
      throw PackError("'" + path + "' annotation disagrees with header at ordinal " +
                      std::to_string(i));
    for (auto& img : entry.images) {
      img.resize(image_bytes);
      in.read(reinterpret_cast<char*>(img.data()), static_cast<std::streamsize>(image_bytes));
      if (in.gcount() != static_cast<std::streamsize>(image_bytes))
        throw PackError("truncated pack file '" + path + "'");
    }
    pack.entries.push_back(std::move(entry));
  }
  return pack;
}

}  // namespace rpmlab
