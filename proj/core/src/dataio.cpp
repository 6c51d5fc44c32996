#include "gramsnn/dataio.hpp"

#include <algorithm>
#include <fstream>

#include "gramsnn/errors.hpp"

namespace gramsnn {

namespace {

uint32_t read_be32(std::ifstream& in, const std::string& path) {
  unsigned char buf[4];
  if (!in.read(reinterpret_cast<char*>(buf), 4))
    throw DataError(DataError::Kind::Truncated, "truncated IDX header: " + path);
  return (uint32_t(buf[0]) << 24) | (uint32_t(buf[1]) << 16) | (uint32_t(buf[2]) << 8) |
         uint32_t(buf[3]);
}

}  // namespace

ImageDataset load_idx(const std::string& images_path, const std::string& labels_path) {
  std::ifstream img(images_path, std::ios::binary);
  if (!img) throw DataError(DataError::Kind::Missing, "cannot open " + images_path);
  std::ifstream lbl(labels_path, std::ios::binary);
  if (!lbl) throw DataError(DataError::Kind::Missing, "cannot open " + labels_path);

  const uint32_t img_magic = read_be32(img, images_path);
  if (img_magic != 0x00000803)
    throw DataError(DataError::Kind::BadMagic,
                    "bad image magic in " + images_path + ": " + std::to_string(img_magic));
  const uint32_t n_img = read_be32(img, images_path);
  const uint32_t rows = read_be32(img, images_path);
  const uint32_t cols = read_be32(img, images_path);

  const uint32_t lbl_magic = read_be32(lbl, labels_path);
  if (lbl_magic != 0x00000801)
    throw DataError(DataError::Kind::BadMagic,
                    "bad label magic in " + labels_path + ": " + std::to_string(lbl_magic));
  const uint32_t n_lbl = read_be32(lbl, labels_path);
  if (n_img != n_lbl)
    throw DataError(DataError::Kind::CountMismatch,
                    "image count " + std::to_string(n_img) + " != label count " +
                        std::to_string(n_lbl));

  ImageDataset ds;
  ds.n = static_cast<int>(n_img);
  ds.h = static_cast<int>(rows);
  ds.w = static_cast<int>(cols);
  const std::size_t pix = static_cast<std::size_t>(n_img) * rows * cols;
  std::vector<unsigned char> raw(pix);
  if (!img.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(pix)))
    throw DataError(DataError::Kind::Truncated, "truncated image data: " + images_path);
  ds.images.resize(pix);
  for (std::size_t i = 0; i < pix; ++i) ds.images[i] = raw[i] / 255.0f;

  ds.labels.resize(n_lbl);
  if (!lbl.read(reinterpret_cast<char*>(ds.labels.data()),
                static_cast<std::streamsize>(n_lbl)))
    throw DataError(DataError::Kind::Truncated, "truncated label data: " + labels_path);
  return ds;
}

SplitSet make_splits(int n_train, uint64_t seed) {
  std::vector<int> idx(n_train);
  for (int i = 0; i < n_train; ++i) idx[i] = i;
  Rng rng(mix_seed(seed, 0x5B117));
  std::shuffle(idx.begin(), idx.end(), rng);
  const std::size_t cut = static_cast<std::size_t>(n_train) * 7 / 10;
  SplitSet out;
  out.seed = seed;
  out.evo_train.assign(idx.begin(), idx.begin() + cut);
  out.fitness.assign(idx.begin() + cut, idx.end());
  return out;
}

}  // namespace gramsnn
