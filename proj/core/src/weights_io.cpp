#include "gramsnn/weights_io.hpp"

#include <fstream>

namespace gramsnn {

namespace {

constexpr char kMagic[4] = {'S', 'N', 'N', 'W'};
constexpr uint32_t kVersion = 1;

void write_u32(std::ofstream& out, uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16),
                        static_cast<unsigned char>(v >> 24)};
  out.write(reinterpret_cast<char*>(b), 4);
}

void write_u64(std::ofstream& out, uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<char*>(b), 8);
}

uint32_t read_u32(std::ifstream& in, const std::string& path) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4))
    throw DataError(DataError::Kind::Truncated, "truncated weights file: " + path);
  return uint32_t(b[0]) | (uint32_t(b[1]) << 8) | (uint32_t(b[2]) << 16) |
         (uint32_t(b[3]) << 24);
}

uint64_t read_u64(std::ifstream& in, const std::string& path) {
  unsigned char b[8];
  if (!in.read(reinterpret_cast<char*>(b), 8))
    throw DataError(DataError::Kind::Truncated, "truncated weights file: " + path);
  uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= uint64_t(b[i]) << (8 * i);
  return v;
}

}  // namespace

void save_weights_file(const std::string& path, const std::vector<SavedParam>& params) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError(DataError::Kind::Missing, "cannot write " + path);
  out.write(kMagic, 4);
  write_u32(out, kVersion);
  write_u32(out, static_cast<uint32_t>(params.size()));
  for (const auto& p : params) {
    out.put(static_cast<char>(p.dtype_size));
    out.put(static_cast<char>(p.dims.size()));
    for (auto d : p.dims) write_u64(out, d);
    out.write(reinterpret_cast<const char*>(p.raw.data()),
              static_cast<std::streamsize>(p.raw.size()));
  }
}

std::vector<SavedParam> load_weights_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(DataError::Kind::Missing, "cannot open " + path);
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0)
    throw DataError(DataError::Kind::BadMagic, "not a SNNW weights file: " + path);
  const uint32_t version = read_u32(in, path);
  if (version != kVersion)
    throw DataError(DataError::Kind::BadMagic,
                    "unsupported weights version " + std::to_string(version));
  const uint32_t count = read_u32(in, path);
  std::vector<SavedParam> out(count);
  for (auto& p : out) {
    const int dtype = in.get();
    const int ndim = in.get();
    if (dtype == EOF || ndim == EOF)
      throw DataError(DataError::Kind::Truncated, "truncated weights file: " + path);
    p.dtype_size = dtype;
    uint64_t n = 1;
    p.dims.resize(ndim);
    for (int i = 0; i < ndim; ++i) {
      p.dims[i] = read_u64(in, path);
      n *= p.dims[i];
    }
    p.raw.resize(n * static_cast<uint64_t>(dtype));
    if (!in.read(reinterpret_cast<char*>(p.raw.data()),
                 static_cast<std::streamsize>(p.raw.size())))
      throw DataError(DataError::Kind::Truncated, "truncated weights file: " + path);
  }
  return out;
}

}  // namespace gramsnn
