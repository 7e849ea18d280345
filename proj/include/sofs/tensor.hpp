#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "sofs/errors.hpp"

namespace sofs {

inline std::string shape_str(const std::vector<int>& shape) {
  std::ostringstream os;
  os << "[";
  for (size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
  os << "]";
  return os.str();
}

// Dense n-dimensional array, row-major. Immutable by convention once it has
// been handed to another component; the autodiff graph relies on that.
template <typename T>
class TensorT {
 public:
  TensorT() = default;

  explicit TensorT(std::vector<int> shape) : shape_(std::move(shape)) {
    data_.assign(check_shape(shape_), T(0));
  }

  TensorT(std::vector<int> shape, std::vector<T> data)
      : shape_(std::move(shape)), data_(std::move(data)) {
    if (static_cast<long long>(data_.size()) != check_shape(shape_)) {
      throw DimensionError("tensor data length " + std::to_string(data_.size()) +
                           " does not match shape " + shape_str(shape_));
    }
  }

  static TensorT full(std::vector<int> shape, T v) {
    TensorT t(std::move(shape));
    std::fill(t.data_.begin(), t.data_.end(), v);
    return t;
  }

  static TensorT scalar(T v) { return TensorT({1}, {v}); }

  const std::vector<int>& shape() const { return shape_; }
  int ndim() const { return static_cast<int>(shape_.size()); }
  int dim(int i) const { return shape_[static_cast<size_t>(i)]; }
  long long size() const { return static_cast<long long>(data_.size()); }
  bool empty() const { return data_.empty(); }

  // 2-D accessors.
  int rows() const { return shape_.size() == 2 ? shape_[0] : throw_not_2d(); }
  int cols() const { return shape_.size() == 2 ? shape_[1] : throw_not_2d(); }
  T& at(int r, int c) { return data_[static_cast<size_t>(r) * shape_[1] + c]; }
  T at(int r, int c) const { return data_[static_cast<size_t>(r) * shape_[1] + c]; }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }
  std::vector<T>& storage() { return data_; }
  const std::vector<T>& storage() const { return data_; }

  T& operator[](long long i) { return data_[static_cast<size_t>(i)]; }
  T operator[](long long i) const { return data_[static_cast<size_t>(i)]; }

  // Same data, new shape; element count must match.
  TensorT reshaped(std::vector<int> new_shape) const {
    long long n = check_shape(new_shape);
    if (n != size()) {
      throw DimensionError("cannot reshape " + shape_str(shape_) + " into " +
                           shape_str(new_shape));
    }
    return TensorT(std::move(new_shape), data_);
  }

  template <typename U>
  TensorT<U> cast() const {
    std::vector<U> out(data_.size());
    for (size_t i = 0; i < data_.size(); ++i) out[i] = static_cast<U>(data_[i]);
    return TensorT<U>(shape_, std::move(out));
  }

  bool all_finite() const {
    for (T v : data_)
      if (!std::isfinite(static_cast<double>(v))) return false;
    return true;
  }

  bool same_shape(const TensorT& o) const { return shape_ == o.shape_; }

 private:
  static long long check_shape(const std::vector<int>& shape) {
    long long n = 1;
    for (int d : shape) {
      if (d <= 0) throw DimensionError("non-positive dimension in shape " + shape_str(shape));
      n *= d;
    }
    return n;
  }
  [[noreturn]] int throw_not_2d() const {
    throw DimensionError("expected a 2-D tensor, got shape " + shape_str(shape_));
  }

  std::vector<int> shape_;
  std::vector<T> data_;
};

using Tensor = TensorT<float>;
using TensorD = TensorT<double>;

inline void require_same_shape(const char* op, const std::vector<int>& a,
                               const std::vector<int>& b) {
  if (a != b) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a) + " vs " +
                         shape_str(b));
  }
}

}  // namespace sofs
