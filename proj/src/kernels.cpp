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

#include "mega/kernels.hpp"

#include <omp.h>

namespace mega::kernels {

namespace {

inline double load(Trans t, std::span<const double> x, std::size_t rows, std::size_t cols,
                   std::size_t i, std::size_t j) {
  // op(X) is rows x cols; X itself is stored transposed when t == kYes.
  return t == Trans::kNo ? x[i * cols + j] : x[j * rows + i];
}

// One output row of C. Shared by both variants so the reduction order matches.
inline void gemm_row(Trans ta, Trans tb, GemmDims d, std::span<const double> a,
                     std::span<const double> b, std::span<double> c, bool accumulate,
                     std::size_t i) {
  double* crow = c.data() + i * d.n;
  if (!accumulate) {
    for (std::size_t j = 0; j < d.n; ++j) crow[j] = 0.0;
  }
  if (tb == Trans::kNo) {
    for (std::size_t p = 0; p < d.k; ++p) {
      const double av = load(ta, a, d.m, d.k, i, p);
      const double* brow = b.data() + p * d.n;
      for (std::size_t j = 0; j < d.n; ++j) crow[j] += av * brow[j];
    }
  } else {
    for (std::size_t j = 0; j < d.n; ++j) {
      const double* bcol = b.data() + j * d.k;
      double acc = 0.0;
      for (std::size_t p = 0; p < d.k; ++p) acc += load(ta, a, d.m, d.k, i, p) * bcol[p];
      crow[j] += acc;
    }
  }
}

inline void conv_channel(std::span<const double> x, std::span<const double> kernel,
                         std::span<const double> bias, std::size_t steps, std::size_t channels,
                         std::size_t width, std::span<double> out, std::size_t c) {
  for (std::size_t t = 0; t < steps; ++t) {
    double acc = bias.empty() ? 0.0 : bias[c];
    for (std::size_t j = 0; j < width; ++j) {
      // source position t - (width-1) + j, skipped while still in the padding
      if (t + j + 1 < width) continue;
      const std::size_t src = t + j + 1 - width;
      acc += kernel[j * channels + c] * x[src * channels + c];
    }
    out[t * channels + c] = acc;
  }
}

}  // namespace

namespace serial {

void gemm(Trans ta, Trans tb, GemmDims dims, std::span<const double> a, std::span<const double> b,
          std::span<double> c, bool accumulate) {
  for (std::size_t i = 0; i < dims.m; ++i) gemm_row(ta, tb, dims, a, b, c, accumulate, i);
}

void causal_conv1d(std::span<const double> x, std::span<const double> kernel,
                   std::span<const double> bias, std::size_t steps, std::size_t channels,
                   std::size_t width, std::span<double> out) {
  for (std::size_t c = 0; c < channels; ++c)
    conv_channel(x, kernel, bias, steps, channels, width, out, c);
}

}  // namespace serial

namespace parallel {

void gemm(Trans ta, Trans tb, GemmDims dims, std::span<const double> a, std::span<const double> b,
          std::span<double> c, bool accumulate) {
  const bool big = dims.m * dims.k * dims.n >= kParallelThreshold && dims.m > 1;
  const auto rows = static_cast<std::ptrdiff_t>(dims.m);
#pragma omp parallel for schedule(static) if (big)
  for (std::ptrdiff_t i = 0; i < rows; ++i) {
    gemm_row(ta, tb, dims, a, b, c, accumulate, static_cast<std::size_t>(i));
  }
}

void causal_conv1d(std::span<const double> x, std::span<const double> kernel,
                   std::span<const double> bias, std::size_t steps, std::size_t channels,
                   std::size_t width, std::span<double> out) {
  const bool big = steps * channels * width >= kParallelThreshold && channels > 1;
  const auto n = static_cast<std::ptrdiff_t>(channels);
#pragma omp parallel for schedule(static) if (big)
  for (std::ptrdiff_t c = 0; c < n; ++c) {
    conv_channel(x, kernel, bias, steps, channels, width, out, static_cast<std::size_t>(c));
  }
}

}  // namespace parallel

}  // namespace mega::kernels
