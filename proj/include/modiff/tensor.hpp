#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "modiff/common.hpp"
#include "modiff/rng.hpp"

namespace modiff {

// Dense row-major 2-D tensor. All model math in this project runs on rank-2
// views: motion as frames x channels, feature maps as channels x frames.
template <typename T>
struct Tensor {
  int rows = 0;
  int cols = 0;
  std::vector<T> v;

  Tensor() = default;
  Tensor(int r, int c) : rows(r), cols(c), v(checked_numel(r, c), T(0)) {}

  static size_t checked_numel(int r, int c) {
    if (r < 0 || c < 0) throw DimensionError("tensor dims must be non-negative");
    return size_t(r) * size_t(c);
  }

  size_t numel() const { return v.size(); }
  T* row(int r) { return v.data() + size_t(r) * cols; }
  const T* row(int r) const { return v.data() + size_t(r) * cols; }
  T& at(int r, int c) { return v[size_t(r) * cols + c]; }
  const T& at(int r, int c) const { return v[size_t(r) * cols + c]; }

  bool same_shape(const Tensor& o) const { return rows == o.rows && cols == o.cols; }

  void fill(T x) { std::fill(v.begin(), v.end(), x); }

  static Tensor full(int r, int c, T x) {
    Tensor t(r, c);
    t.fill(x);
    return t;
  }
};

template <typename T>
void require_shape(const Tensor<T>& t, int r, int c, const std::string& what) {
  if (t.rows != r || t.cols != c)
    throw DimensionError(what + ": expected " + std::to_string(r) + "x" + std::to_string(c) +
                         ", got " + std::to_string(t.rows) + "x" + std::to_string(t.cols));
}

template <typename T>
void fill_normal(Tensor<T>& t, NormalSampler& rng) {
  for (auto& x : t.v) x = T(rng.next());
}

template <typename T>
bool all_finite(const Tensor<T>& t) {
  for (auto x : t.v)
    if (!std::isfinite(double(x))) return false;
  return true;
}

template <typename To, typename From>
Tensor<To> tensor_cast(const Tensor<From>& a) {
  Tensor<To> out(a.rows, a.cols);
  for (size_t i = 0; i < a.v.size(); ++i) out.v[i] = To(a.v[i]);
  return out;
}

}  // namespace modiff
