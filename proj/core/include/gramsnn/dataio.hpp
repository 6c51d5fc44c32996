#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "gramsnn/rng.hpp"
#include "gramsnn/tensor.hpp"

namespace gramsnn {

struct ImageDataset {
  std::string name;
  int n = 0, c = 1, h = 28, w = 28;
  std::vector<float> images;  // normalized to [0,1], row-major [n,c,h,w]
  std::vector<uint8_t> labels;

  const float* image(int i) const {
    return images.data() + static_cast<std::size_t>(i) * c * h * w;
  }
};

// Big-endian IDX files (magic 0x803 for images, 0x801 for labels); pixels are
// normalized by 255.
ImageDataset load_idx(const std::string& images_path, const std::string& labels_path);

struct SplitSet {
  std::vector<int> evo_train;  // 70% of the train set
  std::vector<int> fitness;    // remaining 30%
  uint64_t seed = 0;
};

// Seeded uniform shuffle, then a 70/30 cut; not stratified.
SplitSet make_splits(int n_train, uint64_t seed);

// Every (t, pixel) cell is an independent Bernoulli draw with the pixel value
// as probability. Output is [T, B, c, h, w].
template <class T>
Tensor<T> rate_encode_batch(const ImageDataset& ds, std::span<const int> indices, int t_steps,
                            Rng& rng) {
  const std::size_t b = indices.size();
  const std::size_t pix = static_cast<std::size_t>(ds.c) * ds.h * ds.w;
  Tensor<T> out({static_cast<std::size_t>(t_steps), b, static_cast<std::size_t>(ds.c),
                 static_cast<std::size_t>(ds.h), static_cast<std::size_t>(ds.w)});
  std::uniform_real_distribution<float> uni(0.0f, 1.0f);
  for (int t = 0; t < t_steps; ++t)
    for (std::size_t i = 0; i < b; ++i) {
      const float* img = ds.image(indices[i]);
      T* dst = out.data.data() + (static_cast<std::size_t>(t) * b + i) * pix;
      for (std::size_t p = 0; p < pix; ++p) dst[p] = uni(rng) < img[p] ? T(1) : T(0);
    }
  return out;
}

// Same distribution, but each sample's spike train depends only on
// (seed, global_offset + i), so results are independent of batching.
template <class T>
Tensor<T> rate_encode_batch_stable(const ImageDataset& ds, std::span<const int> indices,
                                   int t_steps, uint64_t seed, std::size_t global_offset) {
  const std::size_t b = indices.size();
  const std::size_t pix = static_cast<std::size_t>(ds.c) * ds.h * ds.w;
  Tensor<T> out({static_cast<std::size_t>(t_steps), b, static_cast<std::size_t>(ds.c),
                 static_cast<std::size_t>(ds.h), static_cast<std::size_t>(ds.w)});
  std::uniform_real_distribution<float> uni(0.0f, 1.0f);
  for (std::size_t i = 0; i < b; ++i) {
    Rng rng(mix_seed(seed, global_offset + i, 0x5A3E));
    const float* img = ds.image(indices[i]);
    for (int t = 0; t < t_steps; ++t) {
      T* dst = out.data.data() + (static_cast<std::size_t>(t) * b + i) * pix;
      for (std::size_t p = 0; p < pix; ++p) dst[p] = uni(rng) < img[p] ? T(1) : T(0);
    }
  }
  return out;
}

}  // namespace gramsnn
