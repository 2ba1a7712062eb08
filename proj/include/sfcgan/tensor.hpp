#pragma once

#include <cstdint>
#include <initializer_list>
#include <vector>

#include "sfcgan/common.hpp"

namespace sfcgan::nn {

/// Dense row-major tensor of doubles. Rank is 2 (batch, features) or
/// 4 (batch, channels, height, width) in practice, but any rank works.
struct Tensor {
  std::vector<int> shape;
  std::vector<double> data;

  Tensor() = default;
  explicit Tensor(std::vector<int> s) : shape(std::move(s)) {
    data.assign(size_t(numel_of(shape)), 0.0);
  }

  static int64_t numel_of(const std::vector<int>& s) {
    int64_t n = 1;
    for (int d : s) n *= d;
    return n;
  }

  static Tensor zeros(std::vector<int> s) { return Tensor(std::move(s)); }

  static Tensor from(std::vector<int> s, std::vector<double> values) {
    Tensor t;
    t.shape = std::move(s);
    if (int64_t(values.size()) != numel_of(t.shape))
      throw ValidationError("tensor data length does not match shape");
    t.data = std::move(values);
    return t;
  }

  int64_t numel() const { return int64_t(data.size()); }
  int rank() const { return int(shape.size()); }
  int dim(int i) const { return shape[size_t(i)]; }

  double* ptr() { return data.data(); }
  const double* ptr() const { return data.data(); }

  bool same_shape(const Tensor& o) const { return shape == o.shape; }

  // 2-D and 4-D accessors, used in tests and cold paths.
  double& at(int i, int j) { return data[size_t(i) * size_t(shape[1]) + size_t(j)]; }
  double at(int i, int j) const { return data[size_t(i) * size_t(shape[1]) + size_t(j)]; }
  double& at(int b, int c, int y, int x) {
    return data[((size_t(b) * size_t(shape[1]) + size_t(c)) * size_t(shape[2]) + size_t(y)) *
                    size_t(shape[3]) +
                size_t(x)];
  }
  double at(int b, int c, int y, int x) const {
    return const_cast<Tensor*>(this)->at(b, c, y, x);
  }

  void fill(double v) { data.assign(data.size(), v); }

  void fill_uniform(Rng& rng, double lo, double hi) {
    for (double& v : data) v = rng.uniform(lo, hi);
  }

  /// Rounds every entry to the nearest float32 value in place.
  void quantize_f32_grid() {
    for (double& v : data) v = quantize_f32(v);
  }

  bool all_finite() const;
  double max_abs() const;
};

}  // namespace sfcgan::nn
