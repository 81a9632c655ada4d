// Copyright 2026 The camret Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstddef>
#include <cstring>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "camret/errors.hpp"

namespace camret {

/// Dense row-major array of 32-bit reals with 1 to 4 dimensions.
///
/// Carries feature maps (K x H x W), CAMs (H x W), classifier weights
/// (C x K), score vectors (C) and descriptor matrices (N x K). A
/// default-constructed Tensor has no shape and only serves as a placeholder
/// to be assigned over.
class Tensor {
 public:
  using Shape = std::vector<std::size_t>;

  static constexpr std::size_t kMaxDims = 4;

  Tensor() = default;

  /// Zero-filled tensor of the given shape.
  explicit Tensor(Shape shape) : shape_(std::move(shape)) {
    ValidateShape(shape_);
    data_.assign(Product(shape_), 0.0f);
  }

  Tensor(Shape shape, std::vector<float> data)
      : shape_(std::move(shape)), data_(std::move(data)) {
    ValidateShape(shape_);
    if (data_.size() != Product(shape_)) {
      throw ShapeError("tensor data length " + std::to_string(data_.size()) +
                       " does not match shape product " +
                       std::to_string(Product(shape_)));
    }
  }

  const Shape& shape() const noexcept { return shape_; }
  std::size_t ndim() const noexcept { return shape_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return shape_.empty(); }

  std::span<const float> data() const noexcept { return data_; }
  std::span<float> data() noexcept { return data_; }
  std::vector<float> release() && { return std::move(data_); }

  float& operator[](std::size_t i) { return data_[i]; }
  float operator[](std::size_t i) const { return data_[i]; }

  float& at(std::size_t i, std::size_t j) { return data_[i * shape_[1] + j]; }
  float at(std::size_t i, std::size_t j) const { return data_[i * shape_[1] + j]; }

  float& at(std::size_t k, std::size_t i, std::size_t j) {
    return data_[(k * shape_[1] + i) * shape_[2] + j];
  }
  float at(std::size_t k, std::size_t i, std::size_t j) const {
    return data_[(k * shape_[1] + i) * shape_[2] + j];
  }

  /// Contiguous slice along the leading axis: a row of a matrix or one
  /// H x W plane of a K x H x W stack.
  std::span<const float> slab(std::size_t index) const {
    const std::size_t stride = data_.size() / shape_.at(0);
    return std::span<const float>(data_).subspan(index * stride, stride);
  }
  std::span<float> slab(std::size_t index) {
    const std::size_t stride = data_.size() / shape_.at(0);
    return std::span<float>(data_).subspan(index * stride, stride);
  }

  /// Bit-exact comparison of shape and payload.
  friend bool operator==(const Tensor& a, const Tensor& b) {
    return a.shape_ == b.shape_ &&
           (a.data_.empty() ||
            std::memcmp(a.data_.data(), b.data_.data(),
                        a.data_.size() * sizeof(float)) == 0);
  }

  static std::size_t Product(const Shape& shape) {
    std::size_t n = 1;
    for (auto d : shape) n *= d;
    return n;
  }

 private:
  static void ValidateShape(const Shape& shape) {
    if (shape.empty() || shape.size() > kMaxDims) {
      throw ShapeError("tensor must have 1 to 4 dimensions, got " +
                       std::to_string(shape.size()));
    }
    for (auto d : shape) {
      if (d == 0) throw ShapeError("tensor dimensions must be >= 1");
    }
  }

  Shape shape_;
  std::vector<float> data_;
};

inline std::string ShapeString(const Tensor::Shape& shape) {
  std::string out = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(shape[i]);
  }
  return out + "]";
}

inline void RequireRank(const Tensor& t, std::size_t ndim, const char* what) {
  if (t.ndim() != ndim) {
    throw ShapeError(std::string(what) + " must have " + std::to_string(ndim) +
                     " dimensions, got shape " + ShapeString(t.shape()));
  }
}

}  // namespace camret
