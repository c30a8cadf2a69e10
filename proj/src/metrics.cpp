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

#include "mega/metrics.hpp"

namespace mega {

Metrics compute_metrics(std::span<const Polarity> gold, std::span<const Polarity> predicted) {
  if (gold.size() != predicted.size()) {
    throw ContractError("metrics: " + std::to_string(gold.size()) + " gold labels vs " +
                        std::to_string(predicted.size()) + " predictions");
  }
  Metrics m;
  m.total = gold.size();
  for (std::size_t i = 0; i < gold.size(); ++i) {
    ++m.confusion[static_cast<std::size_t>(gold[i])][static_cast<std::size_t>(predicted[i])];
  }
  std::size_t correct = 0;
  for (std::size_t c = 0; c < kPolarityCount; ++c) {
    correct += m.confusion[c][c];
    std::size_t gold_c = 0;
    std::size_t pred_c = 0;
    for (std::size_t o = 0; o < kPolarityCount; ++o) {
      gold_c += m.confusion[c][o];
      pred_c += m.confusion[o][c];
    }
    const double tp = static_cast<double>(m.confusion[c][c]);
    auto& s = m.per_class[c];
    s.precision = pred_c ? tp / static_cast<double>(pred_c) : 0.0;
    s.recall = gold_c ? tp / static_cast<double>(gold_c) : 0.0;
    s.f1 = (s.precision + s.recall) > 0.0 ? 2.0 * s.precision * s.recall / (s.precision + s.recall) : 0.0;
    m.macro_f1 += s.f1;
  }
  m.macro_f1 /= static_cast<double>(kPolarityCount);
  m.accuracy = m.total ? static_cast<double>(correct) / static_cast<double>(m.total) : 0.0;
  return m;
}

std::size_t argmax(std::span<const double> values) {
  if (values.empty()) throw ContractError("argmax: empty input");
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] > values[best]) best = i;
  }
  return best;
}

}  // namespace mega
