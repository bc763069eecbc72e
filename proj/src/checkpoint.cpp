#include "rpmlab/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <vector>

#include <nlohmann/json.hpp>

namespace rpmlab {

namespace {

constexpr char kMagic[4] = {'R', 'P', 'M', 'C'};
constexpr uint16_t kVersion = 1;

class Writer {
 public:
  explicit Writer(const std::string& path) : out_(path, std::ios::binary) {
    if (!out_) throw CheckpointError("cannot open '" + path + "' for writing");
  }
  void bytes(const void* p, size_t n) { out_.write(static_cast<const char*>(p), n); }
  void u8(uint8_t v) { bytes(&v, 1); }
  void u16(uint16_t v) { le(v); }
  void u32(uint32_t v) { le(v); }
  void u64(uint64_t v) { le(v); }
  void f32(float v) {
    uint32_t bits;
    std::memcpy(&bits, &v, 4);
    le(bits);
  }
  void f64(double v) {
    uint64_t bits;
    std::memcpy(&bits, &v, 8);
    le(bits);
  }
  void str(const std::string& s) {
    u32(static_cast<uint32_t>(s.size()));
    bytes(s.data(), s.size());
  }
  bool ok() const { return static_cast<bool>(out_); }

 private:
  template <typename U>
  void le(U v) {
    uint8_t buf[sizeof(U)];
    for (size_t i = 0; i < sizeof(U); ++i) buf[i] = static_cast<uint8_t>(v >> (8 * i));
    bytes(buf, sizeof(U));
  }
  std::ofstream out_;
};

class Reader {
 public:
  explicit Reader(const std::string& path) : in_(path, std::ios::binary), path_(path) {
    if (!in_) throw CheckpointError("cannot open '" + path + "' for reading");
  }
  void bytes(void* p, size_t n) {
    in_.read(static_cast<char*>(p), n);
    if (in_.gcount() != static_cast<std::streamsize>(n))
      throw CheckpointError("truncated checkpoint file '" + path_ + "'");
  }
  uint8_t u8() {
    uint8_t v;
    bytes(&v, 1);
    return v;
  }
  uint16_t u16() { return le<uint16_t>(); }
  uint32_t u32() { return le<uint32_t>(); }
  uint64_t u64() { return le<uint64_t>(); }
  float f32() {
    uint32_t bits = le<uint32_t>();
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
  }
  double f64() {
    uint64_t bits = le<uint64_t>();
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
  }
  std::string str() {
    uint32_t n = u32();
    if (n > (1u << 24)) throw CheckpointError("corrupt string length in '" + path_ + "'");
    std::string s(n, '\0');
    bytes(s.data(), n);
    return s;
  }

 private:
  template <typename U>
  U le() {
    uint8_t buf[sizeof(U)];
    bytes(buf, sizeof(U));
    U v = 0;
    for (size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(buf[i]) << (8 * i);
    return v;
  }
  std::ifstream in_;
  std::string path_;
};

}  // namespace

void save_checkpoint(const std::string& path, const Network<float>& net,
                     const AdamState<float>* adam, uint64_t seed) {
  Writer w(path);
  w.bytes(kMagic, 4);
  w.u16(kVersion);
  w.str(spec_to_json(net.spec()).dump());

  auto arrays = net.export_state();
  w.u32(static_cast<uint32_t>(arrays.size()));
  for (const auto& a : arrays) {
    w.str(a.name);
    w.u32(static_cast<uint32_t>(a.shape.size()));
    for (int d : a.shape) w.u32(static_cast<uint32_t>(d));
    for (float v : a.data) w.f32(v);
  }

  w.u8(adam ? 1 : 0);
  if (adam) {
    w.u64(static_cast<uint64_t>(adam->t));
    w.f64(adam->cfg.beta1);
    w.f64(adam->cfg.beta2);
    w.f64(adam->cfg.eps);
    w.u32(static_cast<uint32_t>(adam->m.size()));
    for (size_t i = 0; i < adam->m.size(); ++i) {
      w.u32(static_cast<uint32_t>(adam->m[i].size()));
      for (float v : adam->m[i]) w.f32(v);
      for (float v : adam->v[i]) w.f32(v);
    }
  }
  w.u64(seed);
  if (!w.ok()) throw CheckpointError("write failed for '" + path + "'");
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
  Reader r(path);
  char magic[4];
  r.bytes(magic, 4);
  if (std::memcmp(magic, kMagic, 4) != 0)
    throw CheckpointError("'" + path + "' is not a checkpoint file (bad magic)");
  uint16_t version = r.u16();
  if (version != kVersion)
    throw CheckpointError("'" + path + "' has unsupported checkpoint version " +
                          std::to_string(version) + " (expected " + std::to_string(kVersion) +
                          ")");

  NetworkSpec spec;
  try {
    spec = spec_from_json(nlohmann::json::parse(r.str()));
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError("'" + path + "' has a corrupt spec block: " + e.what());
  }

  Rng rng(0);
  LoadedCheckpoint loaded{Network<float>(spec, rng), std::nullopt, 0};

  uint32_t count = r.u32();
  std::vector<Network<float>::StateArray> arrays;
  arrays.reserve(count);
  for (uint32_t i = 0; i < count; ++i) {
    Network<float>::StateArray a;
    a.name = r.str();
    uint32_t ndim = r.u32();
    if (ndim > 8) throw CheckpointError("corrupt array rank in '" + path + "'");
    int64_t numel = 1;
    for (uint32_t d = 0; d < ndim; ++d) {
      a.shape.push_back(static_cast<int>(r.u32()));
      numel *= a.shape.back();
    }
    if (numel < 0 || numel > (int64_t(1) << 28))
      throw CheckpointError("corrupt array size in '" + path + "'");
    a.data.resize(static_cast<size_t>(numel));
    for (auto& v : a.data) v = r.f32();
    arrays.push_back(std::move(a));
  }
  try {
    loaded.net.import_state(arrays);
  } catch (const std::runtime_error& e) {
    throw CheckpointError("'" + path + "': " + e.what());
  }

  if (r.u8()) {
    AdamState<float> adam;
    adam.t = static_cast<int64_t>(r.u64());
    adam.cfg.beta1 = r.f64();
    adam.cfg.beta2 = r.f64();
    adam.cfg.eps = r.f64();
    uint32_t nparams = r.u32();
    auto params = loaded.net.parameters();
    if (nparams != params.size())
      throw CheckpointError("'" + path + "': optimizer state holds " + std::to_string(nparams) +
                            " moment pairs for " + std::to_string(params.size()) + " parameters");
    for (uint32_t i = 0; i < nparams; ++i) {
      uint32_t len = r.u32();
      if (len != params[i].tensor.numel())
        throw CheckpointError("'" + path + "': optimizer moment length mismatch for '" +
                              params[i].name + "'");
      std::vector<float> m(len), v(len);
      for (auto& x : m) x = r.f32();
      for (auto& x : v) x = r.f32();
      adam.m.push_back(std::move(m));
      adam.v.push_back(std::move(v));
    }
    loaded.adam = std::move(adam);
  }
  loaded.seed = r.u64();
  return loaded;
}

}  // namespace rpmlab
