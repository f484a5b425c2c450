#pragma once

#include <algorithm>
#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "common/error.hpp"

namespace fer {

// Extents of a dense row-major array, rank 1 to 4, every extent >= 1.
class Shape {
 public:
  static constexpr std::size_t kMaxRank = 4;

  Shape() = default;
  Shape(std::initializer_list<std::size_t> extents) : extents_(extents) {
    validate();
  }
  explicit Shape(std::vector<std::size_t> extents)
      : extents_(std::move(extents)) {
    validate();
  }

  std::size_t rank() const noexcept { return extents_.size(); }
  std::size_t operator[](std::size_t axis) const { return extents_.at(axis); }
  std::span<const std::size_t> extents() const noexcept { return extents_; }

  std::size_t size() const noexcept {
    return std::accumulate(extents_.begin(), extents_.end(), std::size_t{1},
                           std::multiplies<>());
  }

  // Product of all extents but the first; the per-sample element count of a
  // batch tensor.
  std::size_t inner_size() const noexcept {
    return extents_.empty() ? 0 : size() / extents_.front();
  }

  std::string str() const;

  friend bool operator==(const Shape&, const Shape&) = default;

 private:
  void validate() const {
    if (extents_.empty() || extents_.size() > kMaxRank)
      fail(ErrorCode::shape_mismatch,
           "tensor rank must be 1..4, got " + std::to_string(extents_.size()));
    for (std::size_t i = 0; i < extents_.size(); ++i)
      if (extents_[i] == 0)
        fail(ErrorCode::shape_mismatch,
             "tensor extent " + std::to_string(i) + " must be >= 1");
  }

  std::vector<std::size_t> extents_;
};

inline std::string Shape::str() const {
  std::string s = "[";
  for (std::size_t i = 0; i < extents_.size(); ++i) {
    if (i) s += "x";
    s += std::to_string(extents_[i]);
  }
  return s + "]";
}

// Dense tensor with value semantics. Production paths use float; gradient
// checking instantiates the same kernels with double.
template <typename T>
class BasicTensor {
 public:
  using value_type = T;

  BasicTensor() = default;
  explicit BasicTensor(Shape shape, T fill = T{})
      : shape_(std::move(shape)), data_(shape_.size(), fill) {}
  BasicTensor(Shape shape, std::vector<T> data)
      : shape_(std::move(shape)), data_(std::move(data)) {
    if (data_.size() != shape_.size())
      fail(ErrorCode::shape_mismatch,
           "tensor data length " + std::to_string(data_.size()) +
               " does not match shape " + shape_.str());
  }

  const Shape& shape() const noexcept { return shape_; }
  std::size_t size() const noexcept { return data_.size(); }
  std::size_t rank() const noexcept { return shape_.rank(); }
  std::size_t dim(std::size_t axis) const { return shape_[axis]; }
  bool empty() const noexcept { return data_.empty(); }

  std::span<T> data() noexcept { return data_; }
  std::span<const T> data() const noexcept { return data_; }
  std::vector<T>& storage() noexcept { return data_; }
  const std::vector<T>& storage() const noexcept { return data_; }

  T& operator[](std::size_t flat) { return data_[flat]; }
  const T& operator[](std::size_t flat) const { return data_[flat]; }

  // Row-major multi-index access; the index count must equal the rank.
  template <typename... I>
  T& at(I... idx) {
    return data_[offset({static_cast<std::size_t>(idx)...})];
  }
  template <typename... I>
  const T& at(I... idx) const {
    return data_[offset({static_cast<std::size_t>(idx)...})];
  }

  std::size_t offset(std::initializer_list<std::size_t> idx) const {
    if (idx.size() != shape_.rank())
      fail(ErrorCode::invalid_argument, "index rank does not match tensor rank");
    std::size_t flat = 0;
    std::size_t axis = 0;
    for (std::size_t i : idx) {
      if (i >= shape_[axis])
        fail(ErrorCode::invalid_argument,
             "index " + std::to_string(i) + " out of range on axis " +
                 std::to_string(axis));
      flat = flat * shape_[axis] + i;
      ++axis;
    }
    return flat;
  }

  // Same data under a new shape of equal element count.
  BasicTensor reshaped(Shape shape) const& {
    return BasicTensor(std::move(shape), data_);
  }
  BasicTensor reshaped(Shape shape) && {
    return BasicTensor(std::move(shape), std::move(data_));
  }

  template <typename U>
  BasicTensor<U> cast() const {
    std::vector<U> out(data_.begin(), data_.end());
    return BasicTensor<U>(shape_, std::move(out));
  }

  friend bool operator==(const BasicTensor&, const BasicTensor&) = default;

 private:
  Shape shape_;
  std::vector<T> data_;
};

using Tensor = BasicTensor<float>;
using Tensor64 = BasicTensor<double>;

}  // namespace fer
