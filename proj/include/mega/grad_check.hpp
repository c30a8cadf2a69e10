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

#include <functional>
#include <string>

#include "mega/tensor.hpp"

namespace mega {

struct GradCheckReport {
  double max_relative_error = 0.0;
  std::string worst_parameter;
  std::size_t worst_index = 0;
  std::size_t coordinates = 0;
};

/// Compares reverse-mode gradients of `loss_fn` w.r.t. every scalar of
/// `params` against central differences. The error of one coordinate is
/// |analytic - numeric| / max(1, |analytic|); the report carries the worst.
/// Parameters are perturbed in place and restored.
///
/// Non-differentiable points (e.g. |w| at 0) are outside the contract.
GradCheckReport grad_check(const std::function<Tensor()>& loss_fn, const ParameterSet& params,
                           double eps = 1e-5);

/// Single-argument form: f maps a tensor to a scalar tensor.
double grad_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& point,
                  double eps = 1e-5);

}  // namespace mega
