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

#include <cstdint>
#include <string>
#include <vector>

#include "mega/grad_check.hpp"

namespace mega {

inline constexpr double kGradCheckTolerance = 1e-4;

struct SuiteResult {
  std::string block;
  GradCheckReport report;
  double seconds = 0.0;
  bool passed = false;
};

/// Block names in run order: tensor_core, mlstm_self, mlstm_cross, dyt,
/// mega_forward, bilstm_encode.
std::vector<std::string> gradcheck_blocks();

/// Runs every block at f64 on inputs drawn from U[-2, 2].
std::vector<SuiteResult> run_gradcheck_suites(double tolerance = kGradCheckTolerance,
                                              std::uint64_t seed = 20260101);

}  // namespace mega
