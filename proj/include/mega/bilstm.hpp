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

#include <random>

#include "mega/tensor.hpp"

namespace mega {

struct Batch;

/// One direction of a classical LSTM; gate blocks ordered (input, forget,
/// cell, output) along the 4h axis.
struct LSTMDirection {
  Tensor w_ih;  // [d_in, 4h]
  Tensor w_hh;  // [h, 4h]
  Tensor bias;  // [4h]
};

struct BiLSTMParams {
  LSTMDirection forward;
  LSTMDirection backward;

  std::size_t input_dim() const { return forward.w_ih.dim(0); }
  std::size_t hidden() const { return forward.w_hh.dim(0); }
  std::size_t output_dim() const { return 2 * hidden(); }

  /// d_out must be even; each direction gets d_out / 2 units.
  static BiLSTMParams init(std::size_t d_in, std::size_t d_out, std::mt19937_64& rng);
  ParameterSet parameters() const;
};

/// Differentiable LSTM fold over precomputed input preactivations [T,4h].
/// With `reverse`, the sequence is consumed from the last position to the
/// first; outputs stay aligned to input positions.
Tensor lstm_recurrence(const Tensor& input_preact, const Tensor& w_hh, bool reverse);

/// Single sentence: [T, d_in] -> [T, 2h], forward half then backward half.
Tensor bilstm_encode(const Tensor& embedded, const BiLSTMParams& params);

/// Padded batch: embeds with `table` and encodes each row over its true
/// length. Returns [B, N_max, 2h] with PAD positions zero. Untracked.
Tensor bilstm_encode(const Tensor& table, const Batch& batch, const BiLSTMParams& params);

}  // namespace mega
