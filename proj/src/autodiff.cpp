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

#include <cmath>
#include <unordered_map>
#include <unordered_set>

#include "mega/grad_check.hpp"
#include "mega/tensor.hpp"

namespace mega {

namespace {

// Post-order over the recorded graph: parents before children.
std::vector<const TensorImpl*> topo_order(const TensorImpl* root) {
  std::vector<const TensorImpl*> order;
  std::unordered_set<const TensorImpl*> visited;
  std::vector<std::pair<const TensorImpl*, std::size_t>> stack;
  stack.emplace_back(root, 0);
  visited.insert(root);
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      const TensorImpl* parent = node->parents[next++].get();
      if (parent->requires_grad && !visited.count(parent)) {
        visited.insert(parent);
        stack.emplace_back(parent, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  return order;
}

}  // namespace

GradientMap backward(const Tensor& loss, const ParameterSet& params) {
  if (loss.size() != 1) {
    throw ContractError("backward: loss must be scalar, got shape " + to_string(loss.shape()));
  }
  std::unordered_map<const TensorImpl*, std::vector<double>> grads;
  if (loss.requires_grad()) {
    grads[loss.impl()].assign(1, 1.0);
    const auto order = topo_order(loss.impl());
    std::vector<std::vector<double>*> parent_slots;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
      const TensorImpl* node = *it;
      if (!node->backward) continue;
      auto found = grads.find(node);
      if (found == grads.end()) continue;
      parent_slots.assign(node->parents.size(), nullptr);
      for (std::size_t i = 0; i < node->parents.size(); ++i) {
        const TensorImpl* parent = node->parents[i].get();
        if (!parent->requires_grad) continue;
        auto& slot = grads[parent];
        if (slot.empty()) slot.assign(parent->data.size(), 0.0);
        parent_slots[i] = &slot;
      }
      // Re-lookup: inserting parents may have rehashed the map.
      const std::vector<double>& grad_out = grads.at(node);
      node->backward(*node, grad_out, parent_slots);
      if (node != loss.impl()) grads.erase(node);
    }
  }

  GradientMap out;
  for (const auto& entry : params.entries()) {
    auto found = grads.find(entry.tensor.impl());
    if (found != grads.end() && !found->second.empty()) {
      out.emplace(entry.name, Tensor(entry.tensor.shape(), std::move(found->second)));
    } else {
      out.emplace(entry.name, Tensor::zeros(entry.tensor.shape()));
    }
  }
  return out;
}

void accumulate(GradientMap& into, const GradientMap& from, double scale) {
  for (const auto& [name, grad] : from) {
    auto it = into.find(name);
    if (it == into.end()) {
      std::vector<double> scaled(grad.data().begin(), grad.data().end());
      for (auto& v : scaled) v *= scale;
      into.emplace(name, Tensor(grad.shape(), std::move(scaled)));
      continue;
    }
    if (it->second.shape() != grad.shape()) {
      throw ContractError("accumulate: shape mismatch for '" + name + "': " +
                          to_string(it->second.shape()) + " vs " + to_string(grad.shape()));
    }
    auto dst = it->second.mutable_data();
    auto src = grad.data();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += scale * src[i];
  }
}

namespace {

double evaluate_probe(const std::function<Tensor()>& loss_fn, const std::string& name,
                      std::size_t index) {
  const std::string where = "grad_check: evaluation at '" + name + "'[" + std::to_string(index) + "]";
  double value = 0.0;
  try {
    NoGradGuard guard;
    value = loss_fn().item();
  } catch (const NumericError& e) {
    throw NumericError(where + " failed: " + e.what());
  }
  if (!std::isfinite(value)) throw NumericError(where + " is not finite");
  return value;
}

}  // namespace

GradCheckReport grad_check(const std::function<Tensor()>& loss_fn, const ParameterSet& params,
                           double eps) {
  const Tensor loss = loss_fn();
  const GradientMap analytic = backward(loss, params);
  GradCheckReport report;
  for (const auto& entry : params.entries()) {
    Tensor param = entry.tensor;
    auto values = param.mutable_data();
    auto grad = analytic.at(entry.name).data();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double original = values[i];
      values[i] = original + eps;
      const double up = evaluate_probe(loss_fn, entry.name, i);
      values[i] = original - eps;
      const double down = evaluate_probe(loss_fn, entry.name, i);
      values[i] = original;
      const double numeric = (up - down) / (2.0 * eps);
      const double err = std::abs(grad[i] - numeric) / std::max(1.0, std::abs(grad[i]));
      if (report.coordinates++ == 0 || err > report.max_relative_error) {
        report.max_relative_error = err;
        report.worst_parameter = entry.name;
        report.worst_index = i;
      }
    }
  }
  return report;
}

double grad_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& point, double eps) {
  Tensor x = point.detach();
  x.set_requires_grad(true);
  ParameterSet params;
  params.add("x", x);
  return grad_check([&] { return f(x); }, params, eps).max_relative_error;
}

}  // namespace mega
