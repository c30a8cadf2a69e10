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
#include <span>

// Raw dense kernels. Each has a serial reference and an OpenMP variant with
// identical per-element arithmetic order, so the two agree bit-for-bit.
namespace mega::kernels {

/// Layout of a 2-D operand of gemm.
enum class Trans { kNo, kYes };

struct GemmDims {
  std::size_t m;  // rows of op(A) and C
  std::size_t k;  // inner extent
  std::size_t n;  // cols of op(B) and C
};

namespace serial {

// C (m x n) = [C +] op(A) (m x k) * op(B) (k x n); op per Trans flags.
void gemm(Trans ta, Trans tb, GemmDims dims, std::span<const double> a, std::span<const double> b,
          std::span<double> c, bool accumulate);

// out[t,c] = bias[c] + sum_j kernel[j,c] * x[t-(k-1)+j, c]; x left zero-padded.
void causal_conv1d(std::span<const double> x, std::span<const double> kernel,
                   std::span<const double> bias, std::size_t steps, std::size_t channels,
                   std::size_t width, std::span<double> out);

}  // namespace serial

namespace parallel {

void gemm(Trans ta, Trans tb, GemmDims dims, std::span<const double> a, std::span<const double> b,
          std::span<double> c, bool accumulate);

void causal_conv1d(std::span<const double> x, std::span<const double> kernel,
                   std::span<const double> bias, std::size_t steps, std::size_t channels,
                   std::size_t width, std::span<double> out);

}  // namespace parallel

// Work below this many multiply-adds stays on the calling thread.
inline constexpr std::size_t kParallelThreshold = 1u << 15;

}  // namespace mega::kernels
