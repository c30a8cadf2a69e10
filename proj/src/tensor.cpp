/* Copyright 2026 The MEGA-ABSA Authors
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

#include "mega/tensor.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <sstream>

namespace mega {

namespace {

thread_local bool t_grad_enabled = true;
std::atomic<double> g_adjoint_corruption{0.0};

}  // namespace

std::size_t numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto e : shape) n *= e;
  return n;
}

std::string to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

Tensor::Tensor() : impl_(std::make_shared<TensorImpl>()) {
  impl_->data.assign(1, 0.0);
}

Tensor::Tensor(Shape shape, double fill) : impl_(std::make_shared<TensorImpl>()) {
  impl_->data.assign(numel(shape), fill);
  impl_->shape = std::move(shape);
}

Tensor::Tensor(Shape shape, std::vector<double> data) : impl_(std::make_shared<TensorImpl>()) {
  if (numel(shape) != data.size()) {
    throw ContractError("tensor: shape " + to_string(shape) + " needs " +
                        std::to_string(numel(shape)) + " values, got " +
                        std::to_string(data.size()));
  }
  impl_->shape = std::move(shape);
  impl_->data = std::move(data);
}

Tensor Tensor::scalar(double value) { return Tensor(Shape{}, std::vector<double>{value}); }

Tensor Tensor::from_impl(ImplPtr impl) {
  Tensor t;
  t.impl_ = std::move(impl);
  return t;
}

std::size_t Tensor::dim(std::size_t axis) const {
  if (axis >= rank()) {
    throw ContractError("tensor: axis " + std::to_string(axis) + " out of range for shape " +
                        to_string(shape()));
  }
  return impl_->shape[axis];
}

std::span<double> Tensor::mutable_data() {
  if (has_node()) throw ContractError("tensor: cannot mutate a non-leaf tensor");
  return impl_->data;
}

double Tensor::item() const {
  if (size() != 1) throw ContractError("tensor: item() on shape " + to_string(shape()));
  return impl_->data[0];
}

double Tensor::at(std::size_t row, std::size_t col) const {
  if (rank() != 2) throw ContractError("tensor: at(row, col) needs rank 2, got " + to_string(shape()));
  return impl_->data.at(row * impl_->shape[1] + col);
}

Tensor& Tensor::set_requires_grad(bool on) {
  if (has_node()) throw ContractError("tensor: requires_grad can only be set on leaves");
  impl_->requires_grad = on;
  return *this;
}

Tensor Tensor::detach() const { return Tensor(impl_->shape, impl_->data); }

Tensor Tensor::clone() const {
  Tensor t(impl_->shape, impl_->data);
  t.impl_->requires_grad = impl_->requires_grad && !has_node();
  return t;
}

NoGradGuard::NoGradGuard() : previous_(t_grad_enabled) { t_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { t_grad_enabled = previous_; }

bool grad_enabled() { return t_grad_enabled; }

void ParameterSet::add(std::string name, Tensor tensor) {
  if (contains(name)) throw ContractError("parameters: duplicate name '" + name + "'");
  if (tensor.has_node()) throw ContractError("parameters: '" + name + "' is not a leaf");
  entries_.push_back({std::move(name), std::move(tensor)});
}

void ParameterSet::extend(const ParameterSet& other, std::string_view prefix) {
  for (const auto& e : other.entries_) add(std::string(prefix) + e.name, e.tensor);
}

const Tensor& ParameterSet::get(std::string_view name) const {
  for (const auto& e : entries_) {
    if (e.name == name) return e.tensor;
  }
  throw ContractError("parameters: no entry named '" + std::string(name) + "'");
}

bool ParameterSet::contains(std::string_view name) const {
  return std::any_of(entries_.begin(), entries_.end(),
                     [&](const NamedTensor& e) { return e.name == name; });
}

std::size_t ParameterSet::scalar_count() const {
  std::size_t n = 0;
  for (const auto& e : entries_) n += e.tensor.size();
  return n;
}

namespace detail {

void check_finite(std::span<const double> values, std::string_view op) {
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i])) {
      throw NumericError(std::string(op) + ": non-finite value at flat index " + std::to_string(i));
    }
  }
}

Tensor make_result(Shape shape, std::vector<double> data, std::string_view op,
                   std::vector<Tensor> parents, BackwardFn backward) {
  check_finite(data, op);
  auto impl = std::make_shared<TensorImpl>();
  impl->shape = std::move(shape);
  impl->data = std::move(data);
  impl->op = op;
  const bool needs_node =
      t_grad_enabled &&
      std::any_of(parents.begin(), parents.end(), [](const Tensor& p) { return p.requires_grad(); });
  if (needs_node) {
    impl->requires_grad = true;
    impl->backward = std::move(backward);
    impl->parents.reserve(parents.size());
    for (auto& p : parents) impl->parents.push_back(p.impl_ptr());
  }
  return Tensor::from_impl(std::move(impl));
}

}  // namespace detail

namespace testing {

void set_adjoint_corruption(double factor) { g_adjoint_corruption.store(factor); }
double adjoint_corruption() { return g_adjoint_corruption.load(); }

}  // namespace testing

}  // namespace mega
