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
#include <span>
#include <vector>

#include "mega/tensor.hpp"

namespace mega {

/// Batched matrix product [...,p,q] x [...,q,r] -> [...,p,r]; leading batch
/// extents broadcast numpy-style.
Tensor matmul(const Tensor& a, const Tensor& b);

// Binary elementwise ops. Operands must have equal shapes, or one operand's
// shape must be a suffix of the other's (e.g. a bias row or a scalar).
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);

Tensor scale(const Tensor& x, double factor);
Tensor silu(const Tensor& x);
Tensor tanh(const Tensor& x);
Tensor sigmoid(const Tensor& x);
Tensor log_sigmoid(const Tensor& x);
Tensor exp(const Tensor& x);
Tensor log(const Tensor& x);

/// x W + b for x [T,in], W [in,out], b [out].
Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias);

Tensor concat_lastdim(std::span<const Tensor> parts);
Tensor concat_lastdim(std::initializer_list<Tensor> parts);

/// Mean of the selected rows of x [T,d] -> [d].
Tensor mean_over_positions(const Tensor& x, std::span<const std::size_t> positions);

/// Row-wise softmax over the last axis with max subtraction.
Tensor softmax_lastdim(const Tensor& x);

/// Depthwise causal convolution, x [T,d], kernel [k,d], bias [d].
Tensor causal_conv1d(const Tensor& x, const Tensor& kernel, const Tensor& bias);

/// out[i] = x[order[i]] for x [T,d]; order must be a permutation of 0..T-1.
Tensor permute_rows(const Tensor& x, std::span<const std::size_t> order);

/// Rows of table [V,d] picked by indices -> [n,d].
Tensor gather_rows(const Tensor& table, std::span<const std::size_t> indices);

/// Same values under a new shape with equal element count.
Tensor reshape(const Tensor& x, Shape shape);

Tensor sum(const Tensor& x);

/// Single element of x as a scalar tensor.
Tensor pick(const Tensor& x, std::size_t flat_index);

/// Inverted dropout: zeroes with probability `rate`, scales survivors by
/// 1/(1-rate). Identity when rate == 0.
Tensor dropout(const Tensor& x, double rate, std::uint64_t seed);

}  // namespace mega
