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

#include <numeric>
#include <random>

#include "mega/data.hpp"

namespace mega {

std::vector<EncodedExample> encode_all(std::span<const AspectExample> examples, const Vocab& vocab) {
  std::vector<EncodedExample> out;
  out.reserve(examples.size());
  for (const auto& ex : examples) {
    validate(ex);
    out.push_back({vocab.encode(ex.tokens), ex.aspect, ex.label, ex.source_id});
  }
  return out;
}

EncodedExample Batch::row(std::size_t b) const {
  EncodedExample ex;
  ex.token_ids.assign(token_ids.begin() + b * max_length,
                      token_ids.begin() + b * max_length + lengths[b]);
  ex.aspect = aspects[b];
  ex.label = labels[b];
  return ex;
}

std::vector<Batch> make_batches(std::span<const EncodedExample> examples, std::size_t batch_size,
                                std::optional<std::uint64_t> shuffle_seed) {
  if (batch_size == 0) throw ContractError("make_batches: batch_size must be >= 1");
  std::vector<std::size_t> order(examples.size());
  std::iota(order.begin(), order.end(), 0);
  if (shuffle_seed) {
    std::mt19937_64 rng(*shuffle_seed);
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng() % i]);
  }
  std::vector<Batch> batches;
  for (std::size_t start = 0; start < order.size(); start += batch_size) {
    const std::size_t stop = std::min(order.size(), start + batch_size);
    Batch b;
    for (std::size_t i = start; i < stop; ++i) {
      b.max_length = std::max(b.max_length, examples[order[i]].token_ids.size());
    }
    const std::size_t rows = stop - start;
    b.token_ids.assign(rows * b.max_length, Vocab::kPad);
    b.mask.assign(rows * b.max_length, 0);
    for (std::size_t r = 0; r < rows; ++r) {
      const auto& ex = examples[order[start + r]];
      std::copy(ex.token_ids.begin(), ex.token_ids.end(), b.token_ids.begin() + r * b.max_length);
      // Trailing PAD ids the example already carries are padding too.
      std::size_t len = ex.token_ids.size();
      while (len > 0 && ex.token_ids[len - 1] == Vocab::kPad) --len;
      std::fill_n(b.mask.begin() + r * b.max_length, len, 1);
      b.lengths.push_back(len);
      b.aspects.push_back(ex.aspect);
      b.labels.push_back(ex.label);
      b.example_index.push_back(order[start + r]);
    }
    batches.push_back(std::move(b));
  }
  return batches;
}

}  // namespace mega
