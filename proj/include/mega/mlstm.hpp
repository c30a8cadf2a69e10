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
#include <random>
#include <span>
#include <vector>

#include "mega/tensor.hpp"

namespace mega {

/// Projections of one mLSTM layer. Heads occupy contiguous column blocks of
/// the q/k/v projections; gates are one scalar per head per step.
struct MLSTMParams {
  std::size_t heads = 1;
  Tensor w_q;  // [d, d]
  Tensor w_k;  // [d, d]
  Tensor w_v;  // [d, d]
  Tensor w_i;  // [d, H]
  Tensor b_i;  // [H]
  Tensor w_f;  // [d, H]
  Tensor b_f;  // [H]
  Tensor w_o;  // [d, d]
  Tensor b_o;  // [d]

  std::size_t d_model() const { return w_q.dim(0); }
  std::size_t head_dim() const { return d_model() / heads; }

  /// Fan-in uniform weights, input-gate bias 0, forget-gate bias +3.
  static MLSTMParams init(std::size_t d_model, std::size_t heads, std::mt19937_64& rng);

  ParameterSet parameters() const;
  void validate() const;
};

/// Recurrent state: per head a matrix memory C, normalizer n and log-domain
/// stabilizer m. Heads are stored back to back.
struct MLSTMState {
  std::size_t heads = 0;
  std::size_t head_dim = 0;
  std::vector<double> memory;      // heads * head_dim * head_dim, row-major per head
  std::vector<double> normalizer;  // heads * head_dim
  std::vector<double> stabilizer;  // heads

  static MLSTMState zeros(std::size_t heads, std::size_t head_dim);
};

/// One recurrence step for all heads, updating `state` in place.
///
/// Per head:  m' = max(f + m, i);  i' = exp(i - m');  f' = exp(f + m - m');
///            C' = f' C + i' v k^T;  n' = f' n + i' k;
///            h  = C' q / max(|n'^T q|, 1)
/// `forget_pre` is the log-domain forget preactivation. Keys are expected to
/// carry their 1/sqrt(head_dim) scaling already. Returns h for every head,
/// concatenated.
std::vector<double> mlstm_step(MLSTMState& state, std::span<const double> q,
                               std::span<const double> k, std::span<const double> v,
                               std::span<const double> input_pre,
                               std::span<const double> forget_pre);

/// Differentiable fold of mlstm_step over T steps from the zero state.
/// q, k, v: [T, d]; input_pre, forget_pre: [T, H]. Returns [T, d].
Tensor mlstm_recurrence(const Tensor& q, const Tensor& k, const Tensor& v, const Tensor& input_pre,
                        const Tensor& forget_pre, std::size_t heads);

/// Self mode: queries, keys, values and gates all projected from x.
Tensor mlstm_self(const Tensor& x, const MLSTMParams& params);

/// Cross mode: q from query_src, k from key_src, v from value_src. Gate and
/// output-gate preactivations come from query_src.
Tensor mlstm_cross(const Tensor& query_src, const Tensor& key_src, const Tensor& value_src,
                   const MLSTMParams& params);

/// O(T^2) closed form of the same recurrence. Untracked; used as an oracle.
Tensor mlstm_parallel(const Tensor& query_src, const Tensor& key_src, const Tensor& value_src,
                      const MLSTMParams& params);
inline Tensor mlstm_parallel(const Tensor& x, const MLSTMParams& params) {
  return mlstm_parallel(x, x, x, params);
}

/// Stabilized decay weights of one head, row-major [T, T], zero above the
/// diagonal: w[t,s] = exp(i_s + sum_{u=s+1..t} f_u - m_t).
std::vector<double> mlstm_decay_weights(std::span<const double> input_pre,
                                        std::span<const double> forget_pre);

}  // namespace mega
