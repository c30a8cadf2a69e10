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

#include "mega/optimizer.hpp"

#include <cmath>

namespace mega {

bool Adam::step(const ParameterSet& params, const GradientMap& grads) {
  for (const auto& entry : params.entries()) {
    auto it = grads.find(entry.name);
    if (it == grads.end()) throw ContractError("adam: no gradient for '" + entry.name + "'");
    if (it->second.shape() != entry.tensor.shape()) {
      throw ContractError("adam: gradient shape mismatch for '" + entry.name + "'");
    }
    for (double g : it->second.data()) {
      if (!std::isfinite(g)) {
        ++skipped_;
        return false;
      }
    }
  }
  ++steps_;
  const double t = static_cast<double>(steps_);
  const double c1 = 1.0 - std::pow(config_.beta1, t);
  const double c2 = 1.0 - std::pow(config_.beta2, t);
  for (const auto& entry : params.entries()) {
    Tensor p = entry.tensor;
    auto w = p.mutable_data();
    auto g = grads.at(entry.name).data();
    auto& m = m_[entry.name];
    auto& v = v_[entry.name];
    if (m.empty()) {
      m.assign(w.size(), 0.0);
      v.assign(w.size(), 0.0);
    }
    for (std::size_t i = 0; i < w.size(); ++i) {
      m[i] = config_.beta1 * m[i] + (1.0 - config_.beta1) * g[i];
      v[i] = config_.beta2 * v[i] + (1.0 - config_.beta2) * g[i] * g[i];
      const double mhat = m[i] / c1;
      const double vhat = v[i] / c2;
      w[i] -= config_.lr * (mhat / (std::sqrt(vhat) + config_.eps) + config_.weight_decay * w[i]);
    }
  }
  return true;
}

void Adam::restore(std::size_t steps, std::size_t skipped,
                   std::map<std::string, std::vector<double>> m,
                   std::map<std::string, std::vector<double>> v) {
  steps_ = steps;
  skipped_ = skipped;
  m_ = std::move(m);
  v_ = std::move(v);
}

}  // namespace mega
