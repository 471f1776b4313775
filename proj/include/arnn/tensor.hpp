/*
 * Copyright 2026 The ARNN Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <initializer_list>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "arnn/error.hpp"
#include "arnn/random.hpp"

namespace arnn {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

inline std::string shape_string(const Shape& shape) {
  std::string out = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out += "x";
    out += std::to_string(shape[i]);
  }
  return out + "]";
}

/// Dense row-major array. Rank 0 is a scalar with one value.
template <typename Real>
class Tensor {
 public:
  using value_type = Real;

  Tensor() : shape_{}, values_(1, Real(0)) {}

  explicit Tensor(Shape shape, Real fill = Real(0))
      : shape_(std::move(shape)), values_(shape_size(shape_), fill) {}

  Tensor(Shape shape, std::vector<Real> values)
      : shape_(std::move(shape)), values_(std::move(values)) {
    if (values_.size() != shape_size(shape_)) {
      throw DimensionError("tensor of shape " + shape_string(shape_) +
                           " given " + std::to_string(values_.size()) +
                           " values");
    }
  }

  static Tensor scalar(Real v) { return Tensor(Shape{}, std::vector<Real>{v}); }

  static Tensor vector(std::initializer_list<Real> v) {
    return Tensor(Shape{v.size()}, std::vector<Real>(v));
  }

  static Tensor matrix(std::initializer_list<std::initializer_list<Real>> rows) {
    const std::size_t r = rows.size();
    const std::size_t c = r ? rows.begin()->size() : 0;
    std::vector<Real> values;
    values.reserve(r * c);
    for (const auto& row : rows) {
      if (row.size() != c) throw DimensionError("ragged matrix literal");
      values.insert(values.end(), row.begin(), row.end());
    }
    return Tensor(Shape{r, c}, std::move(values));
  }

  static Tensor identity(std::size_t n) {
    Tensor t(Shape{n, n});
    for (std::size_t i = 0; i < n; ++i) t(i, i) = Real(1);
    return t;
  }

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t size() const noexcept { return values_.size(); }

  /// Rows of a matrix; a vector counts as one row.
  std::size_t rows() const noexcept {
    return shape_.size() == 2 ? shape_[0] : 1;
  }
  std::size_t cols() const noexcept {
    return shape_.empty() ? 1 : shape_.back();
  }

  Real& operator[](std::size_t i) { return values_[i]; }
  const Real& operator[](std::size_t i) const { return values_[i]; }
  Real& operator()(std::size_t r, std::size_t c) { return values_[r * cols() + c]; }
  const Real& operator()(std::size_t r, std::size_t c) const {
    return values_[r * cols() + c];
  }

  std::span<Real> values() noexcept { return values_; }
  std::span<const Real> values() const noexcept { return values_; }
  std::span<Real> row(std::size_t r) { return {values_.data() + r * cols(), cols()}; }
  std::span<const Real> row(std::size_t r) const {
    return {values_.data() + r * cols(), cols()};
  }

  Real item() const {
    if (values_.size() != 1) {
      throw DimensionError("item() on tensor of shape " + shape_string(shape_));
    }
    return values_[0];
  }

  void fill(Real v) { std::fill(values_.begin(), values_.end(), v); }

  bool all_finite() const {
    return std::all_of(values_.begin(), values_.end(),
                       [](Real v) { return std::isfinite(v); });
  }

  template <typename Other>
  Tensor<Other> cast() const {
    return Tensor<Other>(shape_, std::vector<Other>(values_.begin(), values_.end()));
  }

  friend bool operator==(const Tensor& a, const Tensor& b) {
    return a.shape_ == b.shape_ && a.values_ == b.values_;
  }

 private:
  Shape shape_;
  std::vector<Real> values_;
};

/// Trainable tensor with its gradient and Adagrad accumulator.
template <typename Real>
struct Parameter {
  std::string name;
  Tensor<Real> value;
  Tensor<Real> grad;
  Tensor<Real> accumulator;
  bool frozen = false;

  Parameter() = default;
  Parameter(std::string n, Tensor<Real> v)
      : name(std::move(n)),
        value(std::move(v)),
        grad(value.shape()),
        accumulator(value.shape()) {}

  const Shape& shape() const noexcept { return value.shape(); }
  void zero_grad() { grad.fill(Real(0)); }

  /// Replaces the value, resetting gradient and optimizer state.
  void assign(Tensor<Real> v) {
    value = std::move(v);
    grad = Tensor<Real>(value.shape());
    accumulator = Tensor<Real>(value.shape());
  }
};

/// Uniform in +-sqrt(6 / (fan_in + fan_out)) over a rows x cols matrix.
template <typename Real>
Tensor<Real> glorot_uniform(std::size_t rows, std::size_t cols, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(rows + cols));
  Tensor<Real> t(Shape{rows, cols});
  for (auto& v : t.values()) v = static_cast<Real>(uniform(rng, -bound, bound));
  return t;
}

}  // namespace arnn
