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

#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace mega {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& shape);
std::string to_string(const Shape& shape);

/// Raised when an operation is called outside its documented preconditions.
class ContractError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when an operation on finite inputs produced NaN or Inf.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct TensorImpl;
using ImplPtr = std::shared_ptr<TensorImpl>;

// Adjoint of one recorded operation. `parent_grads[i]` is null when parent i
// does not take part in differentiation; otherwise it has the parent's size
// and the function adds its contribution into it.
using BackwardFn = std::function<void(const TensorImpl& self,
                                      std::span<const double> grad_out,
                                      std::span<std::vector<double>* const> parent_grads)>;

struct TensorImpl {
  Shape shape;
  std::vector<double> data;
  bool requires_grad = false;
  std::string_view op;
  std::vector<ImplPtr> parents;
  BackwardFn backward;
};

/// Dense row-major tensor of doubles. Copies share storage and graph node;
/// use clone() for an independent leaf.
class Tensor {
 public:
  Tensor();
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> data);

  static Tensor scalar(double value);
  static Tensor zeros(Shape shape) { return Tensor(std::move(shape), 0.0); }
  static Tensor from_impl(ImplPtr impl);

  const Shape& shape() const { return impl_->shape; }
  std::size_t rank() const { return impl_->shape.size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t size() const { return impl_->data.size(); }

  std::span<const double> data() const { return impl_->data; }
  // Only valid on leaves; used by optimizers and finite-difference probes.
  std::span<double> mutable_data();

  double item() const;
  double operator[](std::size_t flat) const { return impl_->data[flat]; }
  double at(std::size_t row, std::size_t col) const;

  bool requires_grad() const { return impl_->requires_grad; }
  Tensor& set_requires_grad(bool on);
  bool has_node() const { return static_cast<bool>(impl_->backward); }
  std::string_view op_name() const { return impl_->op; }

  /// Same values, fresh leaf without graph history.
  Tensor detach() const;
  /// Independent copy of values; keeps requires_grad, drops history.
  Tensor clone() const;

  const TensorImpl* impl() const { return impl_.get(); }
  const ImplPtr& impl_ptr() const { return impl_; }

 private:
  ImplPtr impl_;
};

/// Disables graph recording on the current thread while alive.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool grad_enabled();

struct NamedTensor {
  std::string name;
  Tensor tensor;
};

/// Ordered, uniquely named collection of trainable leaves.
class ParameterSet {
 public:
  void add(std::string name, Tensor tensor);
  void extend(const ParameterSet& other, std::string_view prefix = {});

  std::span<const NamedTensor> entries() const { return entries_; }
  const Tensor& get(std::string_view name) const;
  bool contains(std::string_view name) const;
  std::size_t size() const { return entries_.size(); }
  std::size_t scalar_count() const;

 private:
  std::vector<NamedTensor> entries_;
};

using GradientMap = std::map<std::string, Tensor>;

/// Reverse-mode sweep from a scalar loss. Every entry of `params` receives a
/// gradient; parameters the loss does not depend on map to zeros.
GradientMap backward(const Tensor& loss, const ParameterSet& params);

/// into[name] += from[name] for every key of `from`.
void accumulate(GradientMap& into, const GradientMap& from, double scale = 1.0);

namespace detail {

// Builds an op result: validates finiteness and records a graph node when
// grad mode is on and some parent requires grad.
Tensor make_result(Shape shape, std::vector<double> data, std::string_view op,
                   std::vector<Tensor> parents, BackwardFn backward);

void check_finite(std::span<const double> values, std::string_view op);

}  // namespace detail

namespace testing {

// Fault-injection hook for gradient-suite negative controls: when enabled,
// the matmul adjoint is scaled by (1 + factor).
void set_adjoint_corruption(double factor);
double adjoint_corruption();

}  // namespace testing

}  // namespace mega
