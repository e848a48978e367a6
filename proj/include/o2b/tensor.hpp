#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

#include "o2b/error.hpp"

namespace o2b {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape) noexcept;
std::string shape_str(const Shape& shape);

/// Dense row-major array with an explicit shape. Values are always finite:
/// construction rejects NaN/Inf, so a Tensor that exists is a valid Tensor.
template <typename T>
class Tensor {
  static_assert(std::is_floating_point_v<T>, "Tensor holds float or double");

 public:
  using value_type = T;

  Tensor() : shape_{0} {}

  explicit Tensor(Shape shape) : shape_(std::move(shape)), data_(shape_numel(shape_), T(0)) {}

  Tensor(Shape shape, std::vector<T> data) : shape_(std::move(shape)), data_(std::move(data)) {
    if (shape_numel(shape_) != data_.size()) {
      throw Error(Errc::shape_mismatch, "tensor of shape " + shape_str(shape_) + " given " +
                                            std::to_string(data_.size()) + " values");
    }
    validate();
  }

  static Tensor filled(Shape shape, T value) {
    const auto n = shape_numel(shape);
    return Tensor(std::move(shape), std::vector<T>(n, value));
  }

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
  std::size_t numel() const noexcept { return data_.size(); }

  std::span<const T> data() const noexcept { return data_; }
  T operator[](std::size_t i) const { return data_[i]; }

  // CHW accessor; only meaningful for rank-3 tensors.
  T at(std::size_t c, std::size_t h, std::size_t w) const {
    return data_[(c * shape_[1] + h) * shape_[2] + w];
  }

  bool all_finite() const noexcept {
    return std::all_of(data_.begin(), data_.end(), [](T v) { return std::isfinite(v); });
  }

  void validate() const {
    if (!all_finite()) {
      throw Error(Errc::non_finite, "tensor of shape " + shape_str(shape_) + " holds NaN/Inf");
    }
  }

  Tensor reshaped(Shape shape) const {
    if (shape_numel(shape) != data_.size()) {
      throw Error(Errc::shape_mismatch,
                  "cannot reshape " + shape_str(shape_) + " to " + shape_str(shape));
    }
    Tensor out;
    out.shape_ = std::move(shape);
    out.data_ = data_;
    return out;
  }

  template <typename U>
  Tensor<U> cast() const {
    return Tensor<U>(shape_, std::vector<U>(data_.begin(), data_.end()));
  }

  std::vector<T> release() && { return std::move(data_); }

  friend bool operator==(const Tensor& a, const Tensor& b) {
    return a.shape_ == b.shape_ && a.data_ == b.data_;
  }

 private:
  Shape shape_;
  std::vector<T> data_;
};

}  // namespace o2b
