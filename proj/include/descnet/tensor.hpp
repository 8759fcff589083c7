#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace descnet {

using Shape = std::vector<std::size_t>;
using Triple = std::array<int, 3>;

/// Raised when tensor shapes are incompatible with an operation.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when an operation produces NaN or Inf.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

/// Dense row-major N-dimensional array. Batched volumes use [N, C, D, H, W].
///
/// A default-constructed tensor is the null tensor: empty shape and no data.
/// Every other tensor has positive extents and `size() == shape_numel(shape())`.
template <typename T>
class BasicTensor {
 public:
  using value_type = T;

  BasicTensor() = default;
  explicit BasicTensor(Shape shape, T fill = T(0));
  BasicTensor(Shape shape, std::vector<T> data);

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }
  std::span<T> span() { return data_; }
  std::span<const T> span() const { return data_; }
  const std::vector<T>& values() const { return data_; }

  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  /// Elements per leading-axis slice (one batch item).
  std::size_t item_size() const;
  std::size_t batch() const { return shape_.empty() ? 0 : shape_[0]; }
  std::span<T> item(std::size_t n);
  std::span<const T> item(std::size_t n) const;
  BasicTensor item_tensor(std::size_t n) const;
  void set_item(std::size_t n, std::span<const T> values);

  BasicTensor reshaped(Shape shape) const;
  void reshape(Shape shape);
  void fill(T value);

  BasicTensor& operator+=(const BasicTensor& other);
  BasicTensor& operator-=(const BasicTensor& other);
  BasicTensor& operator*=(T factor);
  /// this += alpha * other
  void axpy(T alpha, const BasicTensor& other);

  T sum() const;
  T squared_norm() const;
  bool all_finite() const;
  /// Throws NumericError naming `what` if any element is NaN/Inf.
  void check_finite(const char* what) const;

  template <typename U>
  BasicTensor<U> cast() const {
    std::vector<U> out(data_.begin(), data_.end());
    return BasicTensor<U>(shape_, std::move(out));
  }

  /// Stacks equally shaped tensors along a new leading axis.
  static BasicTensor stack(std::span<const BasicTensor> items);
  /// Joins batch tensors along the existing leading axis.
  static BasicTensor concat(std::span<const BasicTensor> batches);

  friend bool operator==(const BasicTensor& a, const BasicTensor& b) {
    return a.shape_ == b.shape_ && a.data_ == b.data_;
  }

 private:
  Shape shape_;
  std::vector<T> data_;
};

template <typename T>
BasicTensor<T> operator+(BasicTensor<T> a, const BasicTensor<T>& b) {
  a += b;
  return a;
}
template <typename T>
BasicTensor<T> operator-(BasicTensor<T> a, const BasicTensor<T>& b) {
  a -= b;
  return a;
}
template <typename T>
BasicTensor<T> operator*(T factor, BasicTensor<T> a) {
  a *= factor;
  return a;
}

/// Inner product accumulated in double.
template <typename T>
double dot(const BasicTensor<T>& a, const BasicTensor<T>& b);

template <typename T>
double max_abs_diff(const BasicTensor<T>& a, const BasicTensor<T>& b);

/// True when `a` and `b` have the same shape and bit-identical contents.
template <typename T>
bool bit_identical(const BasicTensor<T>& a, const BasicTensor<T>& b);

void require_same_shape(const Shape& a, const Shape& b, const char* what);

using Tensor = BasicTensor<float>;
using Tensor64 = BasicTensor<double>;

}  // namespace descnet
