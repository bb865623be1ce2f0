#include <doctest.h>

#include <cmath>

#include "modiff/tensor.hpp"

using namespace modiff;

TEST_CASE("tensor construction and element access") {
  Tensor<double> t(3, 4);
  CHECK(t.rows == 3);
  CHECK(t.cols == 4);
  CHECK(t.numel() == 12);
  for (size_t i = 0; i < t.numel(); ++i) CHECK(t.v[i] == 0.0);

  t.at(1, 2) = 5.5;
  CHECK(t.row(1)[2] == 5.5);
  CHECK(t.v[1 * 4 + 2] == 5.5);  // row-major layout

  CHECK_THROWS_AS(Tensor<double>(-1, 2), DimensionError);
}

TEST_CASE("full, fill and same_shape") {
  auto a = Tensor<float>::full(2, 3, 7.0f);
  for (auto x : a.v) CHECK(x == 7.0f);
  a.fill(-1.0f);
  for (auto x : a.v) CHECK(x == -1.0f);

  Tensor<float> b(2, 3), c(3, 2);
  CHECK(a.same_shape(b));
  CHECK_FALSE(a.same_shape(c));
}

TEST_CASE("require_shape raises on mismatch only") {
  Tensor<double> t(2, 5);
  CHECK_NOTHROW(require_shape(t, 2, 5, "t"));
  CHECK_THROWS_AS(require_shape(t, 5, 2, "t"), DimensionError);
}

TEST_CASE("fill_normal is seed-deterministic and near standard-normal") {
  Tensor<double> a(100, 100), b(100, 100);
  NormalSampler ra(31), rb(31);
  fill_normal(a, ra);
  fill_normal(b, rb);
  CHECK(a.v == b.v);

  double sum = 0.0, sq = 0.0;
  for (auto x : a.v) {
    sum += x;
    sq += x * x;
  }
  const double n = double(a.numel());
  const double mean = sum / n;
  CHECK(std::abs(mean) < 3.0 / std::sqrt(n));
  CHECK(std::abs(sq / n - 1.0) < 3.0 * std::sqrt(2.0 / n));
}

TEST_CASE("all_finite flags NaN and infinity") {
  Tensor<double> t(2, 2);
  CHECK(all_finite(t));
  t.at(0, 1) = std::nan("");
  CHECK_FALSE(all_finite(t));
  t.at(0, 1) = 0.0;
  t.at(1, 0) = HUGE_VAL;
  CHECK_FALSE(all_finite(t));
}

TEST_CASE("tensor_cast converts element type and keeps shape") {
  Tensor<double> d(2, 2);
  d.at(0, 0) = 1.25;
  d.at(0, 1) = -3.5;
  d.at(1, 0) = 0.1;  // not exactly representable; cast truncates to f32
  auto f = tensor_cast<float>(d);
  CHECK(f.rows == 2);
  CHECK(f.cols == 2);
  CHECK(f.at(0, 0) == 1.25f);
  CHECK(f.at(0, 1) == -3.5f);
  CHECK(f.at(1, 0) == float(0.1));
  auto back = tensor_cast<double>(f);
  CHECK(back.at(0, 0) == 1.25);
}
