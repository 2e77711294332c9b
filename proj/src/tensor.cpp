// SPDX-License-Identifier: Apache-2.0
#include "taskspace/tensor.hpp"

#include <cmath>
#include <sstream>

#include "taskspace/errors.hpp"

namespace taskspace {

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto e : shape) n *= e;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ']';
  return os.str();
}

Tensor::Tensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
  for (auto e : shape_)
    if (e == 0) throw ArgumentError("tensor extents must be positive, got " + shape_str(shape_));
  if (shape_numel(shape_) != data_.size())
    throw ArgumentError("tensor data length " + std::to_string(data_.size()) + " does not match shape " +
                        shape_str(shape_));
}

Tensor::Tensor(Shape shape, double fill) : Tensor(shape, std::vector<double>(shape_numel(shape), fill)) {}

bool Tensor::all_finite() const {
  for (double v : data_)
    if (!std::isfinite(v)) return false;
  return true;
}

void ParamVector::add(std::string name, Tensor t) {
  for (const auto& n : names_)
    if (n == name) throw ArgumentError("duplicate parameter name: " + name);
  names_.push_back(std::move(name));
  tensors_.push_back(std::move(t));
}

std::size_t ParamVector::numel() const {
  std::size_t n = 0;
  for (const auto& t : tensors_) n += t.size();
  return n;
}

std::size_t ParamVector::index_of(const std::string& name) const {
  for (std::size_t i = 0; i < names_.size(); ++i)
    if (names_[i] == name) return i;
  throw ArgumentError("unknown parameter: " + name);
}

const Tensor& ParamVector::at(const std::string& name) const { return tensors_[index_of(name)]; }
Tensor& ParamVector::at(const std::string& name) { return tensors_[index_of(name)]; }

std::vector<double> ParamVector::flatten() const {
  std::vector<double> out;
  out.reserve(numel());
  for (const auto& t : tensors_) out.insert(out.end(), t.vec().begin(), t.vec().end());
  return out;
}

ParamVector ParamVector::unflatten_like(std::span<const double> flat) const {
  if (flat.size() != numel())
    throw ContractError("flat vector length " + std::to_string(flat.size()) + " does not match parameter count " +
                        std::to_string(numel()));
  ParamVector out;
  std::size_t off = 0;
  for (std::size_t i = 0; i < tensors_.size(); ++i) {
    const auto n = tensors_[i].size();
    out.add(names_[i], Tensor(tensors_[i].shape(), std::vector<double>(flat.begin() + off, flat.begin() + off + n)));
    off += n;
  }
  return out;
}

ParamVector ParamVector::zeros_like() const {
  ParamVector out;
  for (std::size_t i = 0; i < tensors_.size(); ++i) out.add(names_[i], Tensor(tensors_[i].shape(), 0.0));
  return out;
}

bool ParamVector::same_layout(const ParamVector& other) const {
  if (names_ != other.names_) return false;
  for (std::size_t i = 0; i < tensors_.size(); ++i)
    if (tensors_[i].shape() != other.tensors_[i].shape()) return false;
  return true;
}

}  // namespace taskspace
