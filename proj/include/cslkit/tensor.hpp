// Copyright 2026 The cslkit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace csl {

enum class DType { f32, f64 };

template <typename T>
constexpr DType dtype_of();
template <>
constexpr DType dtype_of<float>() { return DType::f32; }
template <>
constexpr DType dtype_of<double>() { return DType::f64; }

const char* to_string(DType d);

/// Rank-4 extent. Activations use (batch, channels, height, width); filter banks
/// reuse the same four slots as (K, K, C, N).
struct Shape {
  std::size_t n = 1;
  std::size_t c = 1;
  std::size_t h = 1;
  std::size_t w = 1;

  std::size_t numel() const { return n * c * h * w; }
  std::size_t plane() const { return h * w; }
  std::array<std::size_t, 4> dims() const { return {n, c, h, w}; }
  std::string str() const;

  friend bool operator==(const Shape&, const Shape&) = default;
};

/// Dense row-major tensor in (n, c, h, w) order. Copyable value type; all
/// dimensions are at least 1.
template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() : Tensor(Shape{}) {}
  explicit Tensor(Shape shape);
  Tensor(Shape shape, std::vector<T> data);

  static Tensor filled(Shape shape, T value);

  const Shape& shape() const { return shape_; }
  std::size_t size() const { return data_.size(); }
  static constexpr DType dtype() { return dtype_of<T>(); }

  std::span<const T> data() const { return data_; }
  std::span<T> data() { return data_; }
  const std::vector<T>& vec() const { return data_; }

  std::size_t index(std::size_t n, std::size_t c, std::size_t y, std::size_t x) const {
    return ((n * shape_.c + c) * shape_.h + y) * shape_.w + x;
  }
  T& at(std::size_t n, std::size_t c, std::size_t y, std::size_t x) { return data_[index(n, c, y, x)]; }
  T at(std::size_t n, std::size_t c, std::size_t y, std::size_t x) const { return data_[index(n, c, y, x)]; }
  T& operator[](std::size_t i) { return data_[i]; }
  T operator[](std::size_t i) const { return data_[i]; }

  // One (height x width) plane.
  const T* plane(std::size_t n, std::size_t c) const { return data_.data() + index(n, c, 0, 0); }
  T* plane(std::size_t n, std::size_t c) { return data_.data() + index(n, c, 0, 0); }

  template <typename U>
  Tensor<U> cast() const {
    std::vector<U> out(data_.begin(), data_.end());
    return Tensor<U>(shape_, std::move(out));
  }

  T sum() const;

 private:
  Shape shape_;
  std::vector<T> data_;
};

void validate_shape(const Shape& s);

extern template class Tensor<float>;
extern template class Tensor<double>;

}  // namespace csl
