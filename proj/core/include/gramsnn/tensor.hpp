#pragma once

#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <vector>

#include "gramsnn/errors.hpp"

namespace gramsnn {

// Dense row-major numeric array.
template <class T>
struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<T> data;

  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> s) : shape(std::move(s)) {
    data.assign(numel_of(shape), T(0));
  }
  Tensor(std::initializer_list<std::size_t> s) : Tensor(std::vector<std::size_t>(s)) {}

  static std::size_t numel_of(const std::vector<std::size_t>& s) {
    std::size_t n = 1;
    for (auto d : s) n *= d;
    return n;
  }

  std::size_t numel() const { return data.size(); }
  T* ptr() { return data.data(); }
  const T* ptr() const { return data.data(); }

  void fill(T v) { std::fill(data.begin(), data.end(), v); }

  void reshape(std::vector<std::size_t> s) {
    if (numel_of(s) != data.size()) throw ShapeError("reshape: element count mismatch");
    shape = std::move(s);
  }

  T& operator[](std::size_t i) { return data[i]; }
  const T& operator[](std::size_t i) const { return data[i]; }
};

}  // namespace gramsnn
