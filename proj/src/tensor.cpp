#include "descnet/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <sstream>

namespace descnet {

std::size_t shape_numel(const Shape& shape) {
  if (shape.empty()) return 0;
  std::size_t n = 1;
  for (auto e : shape) n *= e;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

void require_same_shape(const Shape& a, const Shape& b, const char* what) {
  if (a != b) {
    throw ShapeError(std::string(what) + ": shape " + shape_str(a) + " vs " + shape_str(b));
  }
}

namespace {

void validate_extents(const Shape& shape) {
  if (shape.empty()) throw ShapeError("tensor shape must have at least one axis");
  for (auto e : shape) {
    if (e == 0) throw ShapeError("tensor extents must be positive: " + shape_str(shape));
  }
}

}  // namespace

template <typename T>
BasicTensor<T>::BasicTensor(Shape shape, T fill) : shape_(std::move(shape)) {
  validate_extents(shape_);
  data_.assign(shape_numel(shape_), fill);
}

template <typename T>
BasicTensor<T>::BasicTensor(Shape shape, std::vector<T> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  validate_extents(shape_);
  if (data_.size() != shape_numel(shape_)) {
    throw ShapeError("data length " + std::to_string(data_.size()) + " does not match shape " +
                     shape_str(shape_));
  }
}

template <typename T>
std::size_t BasicTensor<T>::dim(std::size_t axis) const {
  if (axis >= shape_.size()) throw ShapeError("axis out of range for " + shape_str(shape_));
  return shape_[axis];
}

template <typename T>
std::size_t BasicTensor<T>::item_size() const {
  return shape_.empty() ? 0 : data_.size() / shape_[0];
}

template <typename T>
std::span<T> BasicTensor<T>::item(std::size_t n) {
  const auto k = item_size();
  return std::span<T>(data_).subspan(n * k, k);
}

template <typename T>
std::span<const T> BasicTensor<T>::item(std::size_t n) const {
  const auto k = item_size();
  return std::span<const T>(data_).subspan(n * k, k);
}

template <typename T>
BasicTensor<T> BasicTensor<T>::item_tensor(std::size_t n) const {
  if (n >= batch()) throw ShapeError("batch index out of range");
  Shape s = shape_;
  s[0] = 1;
  auto v = item(n);
  return BasicTensor(std::move(s), std::vector<T>(v.begin(), v.end()));
}

template <typename T>
void BasicTensor<T>::set_item(std::size_t n, std::span<const T> values) {
  if (values.size() != item_size() || n >= batch()) {
    throw ShapeError("set_item: size mismatch for " + shape_str(shape_));
  }
  std::copy(values.begin(), values.end(), item(n).begin());
}

template <typename T>
BasicTensor<T> BasicTensor<T>::reshaped(Shape shape) const {
  BasicTensor out = *this;
  out.reshape(std::move(shape));
  return out;
}

template <typename T>
void BasicTensor<T>::reshape(Shape shape) {
  validate_extents(shape);
  if (shape_numel(shape) != data_.size()) {
    throw ShapeError("cannot reshape " + shape_str(shape_) + " to " + shape_str(shape));
  }
  shape_ = std::move(shape);
}

template <typename T>
void BasicTensor<T>::fill(T value) {
  std::fill(data_.begin(), data_.end(), value);
}

template <typename T>
BasicTensor<T>& BasicTensor<T>::operator+=(const BasicTensor& other) {
  require_same_shape(shape_, other.shape_, "tensor +=");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
  return *this;
}

template <typename T>
BasicTensor<T>& BasicTensor<T>::operator-=(const BasicTensor& other) {
  require_same_shape(shape_, other.shape_, "tensor -=");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= other.data_[i];
  return *this;
}

template <typename T>
BasicTensor<T>& BasicTensor<T>::operator*=(T factor) {
  for (auto& v : data_) v *= factor;
  return *this;
}

template <typename T>
void BasicTensor<T>::axpy(T alpha, const BasicTensor& other) {
  require_same_shape(shape_, other.shape_, "tensor axpy");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += alpha * other.data_[i];
}

template <typename T>
T BasicTensor<T>::sum() const {
  double acc = 0;
  for (auto v : data_) acc += v;
  return static_cast<T>(acc);
}

template <typename T>
T BasicTensor<T>::squared_norm() const {
  double acc = 0;
  for (auto v : data_) acc += static_cast<double>(v) * v;
  return static_cast<T>(acc);
}

template <typename T>
bool BasicTensor<T>::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](T v) { return std::isfinite(v); });
}

template <typename T>
void BasicTensor<T>::check_finite(const char* what) const {
  for (std::size_t i = 0; i < data_.size(); ++i) {
    if (!std::isfinite(data_[i])) {
      throw NumericError(std::string(what) + ": non-finite value at flat index " + std::to_string(i));
    }
  }
}

template <typename T>
BasicTensor<T> BasicTensor<T>::stack(std::span<const BasicTensor> items) {
  if (items.empty()) throw ShapeError("stack of zero tensors");
  const Shape& s0 = items[0].shape();
  Shape out_shape{items.size()};
  out_shape.insert(out_shape.end(), s0.begin(), s0.end());
  std::vector<T> data;
  data.reserve(items.size() * items[0].size());
  for (const auto& t : items) {
    require_same_shape(s0, t.shape(), "stack");
    data.insert(data.end(), t.data_.begin(), t.data_.end());
  }
  return BasicTensor(std::move(out_shape), std::move(data));
}

template <typename T>
BasicTensor<T> BasicTensor<T>::concat(std::span<const BasicTensor> batches) {
  if (batches.empty()) throw ShapeError("concat of zero tensors");
  Shape out_shape = batches[0].shape();
  out_shape[0] = 0;
  std::vector<T> data;
  for (const auto& t : batches) {
    if (t.rank() != out_shape.size() ||
        !std::equal(out_shape.begin() + 1, out_shape.end(), t.shape().begin() + 1)) {
      throw ShapeError("concat: trailing shapes differ");
    }
    out_shape[0] += t.shape()[0];
    data.insert(data.end(), t.data_.begin(), t.data_.end());
  }
  return BasicTensor(std::move(out_shape), std::move(data));
}

template <typename T>
double dot(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  require_same_shape(a.shape(), b.shape(), "dot");
  double acc = 0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += static_cast<double>(a[i]) * b[i];
  return acc;
}

template <typename T>
double max_abs_diff(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  require_same_shape(a.shape(), b.shape(), "max_abs_diff");
  double m = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    m = std::max(m, std::abs(static_cast<double>(a[i]) - b[i]));
  }
  return m;
}

template <typename T>
bool bit_identical(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  return a.shape() == b.shape() &&
         (a.size() == 0 || std::memcmp(a.data(), b.data(), a.size() * sizeof(T)) == 0);
}

template class BasicTensor<float>;
template class BasicTensor<double>;
template double dot(const BasicTensor<float>&, const BasicTensor<float>&);
template double dot(const BasicTensor<double>&, const BasicTensor<double>&);
template double max_abs_diff(const BasicTensor<float>&, const BasicTensor<float>&);
template double max_abs_diff(const BasicTensor<double>&, const BasicTensor<double>&);
template bool bit_identical(const BasicTensor<float>&, const BasicTensor<float>&);
template bool bit_identical(const BasicTensor<double>&, const BasicTensor<double>&);

}  // namespace descnet
