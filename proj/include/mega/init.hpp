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

#include <cmath>
#include <cstdint>
#include <random>

#include "mega/tensor.hpp"

namespace mega {

/// Uniform double in [0,1) from the top 53 bits; identical on every platform
/// for a given engine state (std distributions are not).
inline double unit_uniform(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline Tensor uniform_tensor(Shape shape, double bound, std::mt19937_64& rng) {
  std::vector<double> v(numel(shape));
  for (auto& x : v) x = (2.0 * unit_uniform(rng) - 1.0) * bound;
  return Tensor(std::move(shape), std::move(v));
}

/// Trainable leaf with U(-1/sqrt(fan_in), 1/sqrt(fan_in)) entries.
inline Tensor fan_in_uniform(Shape shape, std::size_t fan_in, std::mt19937_64& rng) {
  Tensor t = uniform_tensor(std::move(shape), 1.0 / std::sqrt(static_cast<double>(fan_in)), rng);
  t.set_requires_grad(true);
  return t;
}

inline Tensor trainable_fill(Shape shape, double value) {
  Tensor t(std::move(shape), value);
  t.set_requires_grad(true);
  return t;
}

/// SplitMix64 finalizer, used to derive independent seeds from counters.
inline std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace mega
