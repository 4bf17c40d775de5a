#include "pillarcast/nn.hpp"

#include <cstring>
#include <fstream>

namespace pillarcast::nn {

namespace {

constexpr char kMagic[4] = {'S', 'T', 'P', 'N'};
constexpr uint32_t kVersion = 1;

void write_u32(std::ostream& out, uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                        static_cast<unsigned char>((v >> 8) & 0xff),
                        static_cast<unsigned char>((v >> 16) & 0xff),
                        static_cast<unsigned char>((v >> 24) & 0xff)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

uint32_t read_u32(std::istream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
         (static_cast<uint32_t>(b[2]) << 16) |
         (static_cast<uint32_t>(b[3]) << 24);
}

void write_f32(std::ostream& out, float v) {
  uint32_t bits;
  std::memcpy(&bits, &v, 4);
  write_u32(out, bits);
}

float read_f32(std::istream& in) {
  const uint32_t bits = read_u32(in);
  float v;
  std::memcpy(&v, &bits, 4);
  return v;
}

}  // namespace

void save_checkpoint(const ParamStore<float>& store, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ContractError("cannot open checkpoint for writing: " + path);
  out.write(kMagic, 4);
  write_u32(out, kVersion);
  write_u32(out, static_cast<uint32_t>(store.size()));
  for (const auto& e : store.entries()) {
    write_u32(out, static_cast<uint32_t>(e.name.size()));
    out.write(e.name.data(), static_cast<std::streamsize>(e.name.size()));
    write_u32(out, static_cast<uint32_t>(e.tensor.shape.rank));
    for (int i = 0; i < e.tensor.shape.rank; ++i)
      write_u32(out, static_cast<uint32_t>(e.tensor.shape.dims[i]));
    for (float v : e.tensor.data) write_f32(out, v);
  }
  if (!out) throw ContractError("checkpoint write failed: " + path);
}

void load_checkpoint(ParamStore<float>& store, const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ContractError("cannot open checkpoint: " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0)
    throw ContractError("bad checkpoint magic: " + path);
  const uint32_t version = read_u32(in);
  if (version != kVersion)
    throw ContractError("unsupported checkpoint version " +
                        std::to_string(version));
  const uint32_t count = read_u32(in);
  size_t loaded = 0;
  for (uint32_t i = 0; i < count; ++i) {
    const uint32_t name_len = read_u32(in);
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    const uint32_t rank = read_u32(in);
    if (rank > 4) throw ContractError("checkpoint rank > 4 for " + name);
    Shape s;
    s.rank = static_cast<int>(rank);
    for (uint32_t d = 0; d < rank; ++d)
      s.dims[d] = static_cast<int>(read_u32(in));
    if (!store.has(name))
      throw ContractError("checkpoint has unknown array: " + name);
    Tensor<float>& t = store.at(name);
    if (t.shape != s)
      throw ContractError("checkpoint shape mismatch for " + name + ": file " +
                          s.str() + " vs model " + t.shape.str());
    for (float& v : t.data) v = read_f32(in);
    ++loaded;
    if (!in) throw ContractError("truncated checkpoint: " + path);
  }
  if (loaded != store.size())
    throw ContractError("checkpoint is missing arrays: expected " +
                        std::to_string(store.size()) + ", found " +
                        std::to_string(loaded));
}

}  // namespace pillarcast::nn
