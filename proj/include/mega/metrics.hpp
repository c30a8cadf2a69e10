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

#include <array>
#include <cstddef>
#include <span>

#include "mega/data.hpp"

namespace mega {

struct ClassScores {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

struct Metrics {
  std::size_t total = 0;
  double accuracy = 0.0;
  double macro_f1 = 0.0;
  std::array<ClassScores, kPolarityCount> per_class{};
  // confusion[gold][predicted]
  std::array<std::array<std::size_t, kPolarityCount>, kPolarityCount> confusion{};
};

/// Accuracy, per-class P/R/F1 and macro-F1. A class with no gold and no
/// predicted items scores F1 = 0; 0/0 precision or recall counts as 0.
Metrics compute_metrics(std::span<const Polarity> gold, std::span<const Polarity> predicted);

/// Index of the largest entry; ties resolve to the lowest index.
std::size_t argmax(std::span<const double> values);

}  // namespace mega
