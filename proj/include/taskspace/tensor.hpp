// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace taskspace {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

/// Dense row-major tensor of doubles. Plain value type.
class Tensor {
 public:
  Tensor() = default;
  Tensor(Shape shape, std::vector<double> data);
  explicit Tensor(Shape shape, double fill = 0.0);

  static Tensor scalar(double v) { return Tensor({1}, std::vector<double>{v}); }
  static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> data) {
    return Tensor({rows, cols}, std::move(data));
  }

  const Shape& shape() const { return shape_; }
  std::size_t size() const { return data_.size(); }
  std::size_t rank() const { return shape_.size(); }
  /// Rows of a 2-D tensor; 1 for vectors.
  std::size_t rows() const { return shape_.size() == 2 ? shape_[0] : 1; }
  /// Columns of a 2-D tensor; length for vectors.
  std::size_t cols() const { return shape_.empty() ? 0 : shape_.back(); }

  std::span<const double> data() const { return data_; }
  std::span<double> data() { return data_; }
  std::vector<double>& vec() { return data_; }
  const std::vector<double>& vec() const { return data_; }

  double operator[](std::size_t i) const { return data_[i]; }
  double& operator[](std::size_t i) { return data_[i]; }
  double at(std::size_t r, std::size_t c) const { return data_[r * cols() + c]; }
  double& at(std::size_t r, std::size_t c) { return data_[r * cols() + c]; }

  bool all_finite() const;

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  Shape shape_;
  std::vector<double> data_;
};

/// Ordered, named collection of parameter tensors. The order of `add` calls
/// is the canonical order used for flattening and serialization.
class ParamVector {
 public:
  void add(std::string name, Tensor t);

  std::size_t count() const { return tensors_.size(); }
  std::size_t numel() const;
  const std::string& name(std::size_t i) const { return names_[i]; }
  const Tensor& operator[](std::size_t i) const { return tensors_[i]; }
  Tensor& operator[](std::size_t i) { return tensors_[i]; }
  const Tensor& at(const std::string& name) const;
  Tensor& at(const std::string& name);
  std::size_t index_of(const std::string& name) const;
  const std::vector<std::string>& names() const { return names_; }

  std::vector<double> flatten() const;
  /// Same names and shapes, values taken from `flat` in canonical order.
  ParamVector unflatten_like(std::span<const double> flat) const;
  ParamVector zeros_like() const;
  bool same_layout(const ParamVector& other) const;

  friend bool operator==(const ParamVector&, const ParamVector&) = default;

 private:
  std::vector<std::string> names_;
  std::vector<Tensor> tensors_;
};

}  // namespace taskspace
