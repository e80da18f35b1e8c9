#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <initializer_list>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "omnisynth/core/error.hpp"

namespace omnisynth::diff {

using Shape = std::vector<std::size_t>;

/// Storage aligned to Eigen's widest packet, so vectorised reductions take
/// the same path on every allocation and results stay bit-reproducible.
template <class T>
using Buffer = std::vector<T, Eigen::aligned_allocator<T>>;

inline std::size_t numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

inline std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ']';
  return os.str();
}

/// Dense row-major tensor. A rank-0 shape holds a single scalar.
template <class T>
struct Tensor {
  Shape shape;
  Buffer<T> values;

  Tensor() = default;
  explicit Tensor(Shape s, T fill = T(0)) : shape(std::move(s)), values(numel(shape), fill) {}
  Tensor(Shape s, const std::vector<T>& v) : Tensor(std::move(s), Buffer<T>(v.begin(), v.end())) {}
  Tensor(Shape s, std::initializer_list<T> v) : Tensor(std::move(s), Buffer<T>(v)) {}
  Tensor(Shape s, Buffer<T> v) : shape(std::move(s)), values(std::move(v)) {
    if (values.size() != numel(shape))
      throw InvalidArgument("tensor value count " + std::to_string(values.size()) + " does not match shape " +
                            shape_string(shape));
  }

  static Tensor scalar(T x) { return Tensor(Shape{}, Buffer<T>{x}); }

  std::size_t size() const { return values.size(); }
  std::size_t rank() const { return shape.size(); }
  std::size_t dim(std::size_t i) const { return shape.at(i); }
  T* data() { return values.data(); }
  const T* data() const { return values.data(); }
  T& operator[](std::size_t i) { return values[i]; }
  const T& operator[](std::size_t i) const { return values[i]; }

  bool all_finite() const {
    for (const T& x : values)
      if (!std::isfinite(x)) return false;
    return true;
  }

  template <class U>
  Tensor<U> cast() const {
    return Tensor<U>(shape, Buffer<U>(values.begin(), values.end()));
  }
};

}  // namespace omnisynth::diff
