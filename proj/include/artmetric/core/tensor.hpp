#pragma once

#include <cassert>
#include <cstddef>
#include <numeric>
#include <vector>

namespace artmetric {

// Dense float tensor, NCHW for images, (N, C) for feature matrices.
struct Tensor {
  std::vector<int> shape;
  std::vector<float> data;

  Tensor() = default;
  explicit Tensor(std::vector<int> s) : shape(std::move(s)) {
    data.assign(static_cast<size_t>(count(shape)), 0.0f);
  }

  static long long count(const std::vector<int>& s) {
    long long n = 1;
    for (int d : s) n *= d;
    return n;
  }

  size_t size() const { return data.size(); }
  bool empty() const { return data.empty(); }

  int dim(int i) const { return shape[static_cast<size_t>(i)]; }

  float* ptr() { return data.data(); }
  const float* ptr() const { return data.data(); }

  // NCHW access
  float& at(int n, int c, int h, int w) {
    return data[((static_cast<size_t>(n) * shape[1] + c) * shape[2] + h) * shape[3] + w];
  }
  float at(int n, int c, int h, int w) const {
    return data[((static_cast<size_t>(n) * shape[1] + c) * shape[2] + h) * shape[3] + w];
  }

  // (N, C) access
  float& at(int n, int c) { return data[static_cast<size_t>(n) * shape[1] + c]; }
  float at(int n, int c) const { return data[static_cast<size_t>(n) * shape[1] + c]; }

  void zero() { std::fill(data.begin(), data.end(), 0.0f); }
};

}  // namespace artmetric
