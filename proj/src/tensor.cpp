// Copyright 2026 The cslkit Authors
// SPDX-License-Identifier: Apache-2.0

#include "cslkit/tensor.hpp"

#include <numeric>

#include "cslkit/error.hpp"

namespace csl {

const char* to_string(DType d) { return d == DType::f32 ? "f32" : "f64"; }

std::string Shape::str() const {
  return "(" + std::to_string(n) + "," + std::to_string(c) + "," + std::to_string(h) + "," +
         std::to_string(w) + ")";
}

void validate_shape(const Shape& s) {
  if (s.n == 0 || s.c == 0 || s.h == 0 || s.w == 0) {
    throw ShapeError("tensor dimensions must be >= 1, got " + s.str());
  }
}

template <typename T>
Tensor<T>::Tensor(Shape shape) : shape_(shape) {
  validate_shape(shape_);
  data_.assign(shape_.numel(), T{0});
}

template <typename T>
Tensor<T>::Tensor(Shape shape, std::vector<T> data) : shape_(shape), data_(std::move(data)) {
  validate_shape(shape_);
  if (data_.size() != shape_.numel()) {
    throw ShapeError("tensor data length " + std::to_string(data_.size()) + " does not match shape " +
                     shape_.str());
  }
}

template <typename T>
Tensor<T> Tensor<T>::filled(Shape shape, T value) {
  Tensor t(shape);
  std::fill(t.data_.begin(), t.data_.end(), value);
  return t;
}

template <typename T>
T Tensor<T>::sum() const {
  return std::accumulate(data_.begin(), data_.end(), T{0});
}

template class Tensor<float>;
template class Tensor<double>;

}  // namespace csl
