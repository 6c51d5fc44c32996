#pragma once

#include <cstring>
#include <string>
#include <vector>

#include "gramsnn/runtime.hpp"

namespace gramsnn {

// Flat binary container: magic "SNNW", u32 version, u32 entry count, then per
// entry: u8 dtype size (4|8), u8 ndim, u64 dims..., raw little-endian data.
struct SavedParam {
  std::string name;
  int dtype_size = 4;
  std::vector<uint64_t> dims;
  std::vector<unsigned char> raw;
};

void save_weights_file(const std::string& path, const std::vector<SavedParam>& params);
std::vector<SavedParam> load_weights_file(const std::string& path);

template <class T>
std::vector<SavedParam> collect_weights(NetworkRuntime<T>& runtime) {
  std::vector<SavedParam> out;
  for (const auto& p : runtime.params()) {
    SavedParam sp;
    sp.name = p.name;
    sp.dtype_size = sizeof(T);
    sp.dims.assign(p.dims.begin(), p.dims.end());
    sp.raw.resize(p.n * sizeof(T));
    std::memcpy(sp.raw.data(), p.value, sp.raw.size());
    out.push_back(std::move(sp));
  }
  return out;
}

template <class T>
void restore_weights(NetworkRuntime<T>& runtime, const std::vector<SavedParam>& saved) {
  auto params = runtime.params();
  if (params.size() != saved.size())
    throw DataError(DataError::Kind::CountMismatch,
                    "weight container holds " + std::to_string(saved.size()) +
                        " entries, network has " + std::to_string(params.size()));
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (saved[i].dtype_size != sizeof(T) ||
        saved[i].raw.size() != params[i].n * sizeof(T))
      throw DataError(DataError::Kind::CountMismatch,
                      "weight entry " + std::to_string(i) + " shape/dtype mismatch");
    std::memcpy(params[i].value, saved[i].raw.data(), saved[i].raw.size());
  }
}

}  // namespace gramsnn
