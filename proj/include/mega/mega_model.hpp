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
#include <map>
#include <optional>
#include <random>
#include <span>
#include <string>

#include "mega/bilstm.hpp"
#include "mega/data.hpp"
#include "mega/mlstm.hpp"
#include "mega/tensor.hpp"

namespace mega {

enum class PoolingScope { kAspectSpan, kWholeSentence };
enum class EncoderKind { kBiLSTM, kRaw };

std::string_view to_string(PoolingScope scope);
std::string_view to_string(EncoderKind kind);

/// Architecture hyperparameters. Defaults are the ones used for the
/// desk-scale runs in the README.
struct MegaConfig {
  std::size_t embed_dim = 300;
  std::size_t d_model = 64;
  std::size_t conv_kernel = 4;
  std::size_t stream_heads = 4;
  std::size_t fusion_heads = 4;
  double flip_fraction = 0.5;
  std::optional<std::size_t> flip_count;  // absolute override of the flipped prefix
  bool pf_double_flip = true;
  PoolingScope pooling = PoolingScope::kAspectSpan;
  EncoderKind encoder = EncoderKind::kBiLSTM;
  bool fusion_enabled = true;  // false replaces the fused branch F with zeros
  bool train_embeddings = false;
  double dropout = 0.3;
  std::size_t class_count = kPolarityCount;

  void validate() const;
  /// Length of the reversed prefix for a sentence of n_tokens tokens.
  std::size_t flip_extent(std::size_t n_tokens) const;
};

struct LinearParams {
  Tensor weight;  // [in, out]
  Tensor bias;    // [out]
  static LinearParams init(std::size_t in, std::size_t out, std::mt19937_64& rng);
  static LinearParams zeros(std::size_t in, std::size_t out);
};

/// gamma * tanh(alpha * x) + beta
struct DyTParams {
  Tensor alpha;  // scalar
  Tensor gamma;  // [d]
  Tensor beta;   // [d]
  static DyTParams init(std::size_t d, double alpha0 = 0.5);
};

struct ConvParams {
  Tensor kernel;  // [k, d]
  Tensor bias;    // [d]
  static ConvParams init(std::size_t width, std::size_t d, std::mt19937_64& rng);
};

/// DyT -> Linear -> causal Conv1d -> mLSTM.
struct StreamParams {
  DyTParams dyt;
  LinearParams proj;
  ConvParams conv;
  MLSTMParams mlstm;
  static StreamParams init(const MegaConfig& cfg, std::mt19937_64& rng);
};

/// Linear -> SiLU -> DyT branch producing H_norm.
struct NormBranchParams {
  LinearParams proj;
  DyTParams dyt;
  static NormBranchParams init(const MegaConfig& cfg, std::mt19937_64& rng);
};

struct FusionParams {
  MLSTMParams cross;
  LinearParams out;  // [3d -> d], zero-initialized
  static FusionParams init(const MegaConfig& cfg, std::mt19937_64& rng);
};

struct ForwardOptions {
  bool training = false;  // enables dropout
  std::uint64_t dropout_seed = 0;
};

Tensor dyt(const Tensor& x, const DyTParams& p);

/// Reverses the first n rows, keeps the remaining N-n in place.
Tensor partial_flip(const Tensor& h, std::size_t n);

struct ForwardStreamOut {
  Tensor h_norm;
  Tensor m_tilde;
};

ForwardStreamOut forward_stream(const Tensor& h, const NormBranchParams& norm,
                                const StreamParams& stream);

/// Partially flipped stream. With double_flip, the conv output is flipped
/// back before the mLSTM.
Tensor pf_stream(const Tensor& h, std::size_t n, const StreamParams& stream, bool double_flip = true);

/// Cross mLSTM (q,k from m_tilde, v from n_tilde), H_norm gating,
/// concat + projection + residual on h.
Tensor mecgaf_fuse(const Tensor& m_tilde, const Tensor& n_tilde, const Tensor& h_norm,
                   const Tensor& h, const FusionParams& fusion, bool fusion_enabled = true,
                   double dropout_rate = 0.0, std::uint64_t dropout_seed = 0);

/// Mean-pool the rows in `positions`, project, softmax. Returns [classes].
Tensor classify(const Tensor& o, std::span<const std::size_t> positions,
                const LinearParams& head);

class MegaModel {
 public:
  MegaModel(MegaConfig config, Vocab vocab, Tensor embedding, std::uint64_t seed);

  const MegaConfig& config() const { return config_; }
  const Vocab& vocab() const { return vocab_; }

  /// Contextual sequence H for a token sequence: BiLSTM states or raw
  /// embeddings. Trailing PAD ids are dropped.
  Tensor encode(std::span<const std::size_t> token_ids, const ForwardOptions& opts = {}) const;

  /// Full pipeline from H to class probabilities.
  Tensor forward_hidden(const Tensor& h, Span aspect, const ForwardOptions& opts = {}) const;

  Tensor forward(const EncodedExample& example, const ForwardOptions& opts = {}) const;

  /// Inference over a padded batch: [B, classes]. Each row is encoded over
  /// its own length, so PAD positions never reach the output. Untracked.
  Tensor forward_batch(const Batch& batch) const;

  /// Every named tensor, including a frozen embedding table.
  ParameterSet parameters() const;
  /// The subset the optimizer updates.
  ParameterSet trainable() const;

  /// Copies values in by name; every name must exist with a matching shape.
  void load(const std::map<std::string, Tensor>& values);

  BiLSTMParams& encoder() { return encoder_; }
  NormBranchParams& norm_branch() { return norm_; }
  StreamParams& forward_params() { return forward_; }
  StreamParams& pf_params() { return pf_; }
  FusionParams& fusion() { return fusion_; }
  LinearParams& head() { return head_; }

 private:
  MegaConfig config_;
  Vocab vocab_;
  Tensor embedding_;
  BiLSTMParams encoder_;
  NormBranchParams norm_;
  StreamParams forward_;
  StreamParams pf_;
  FusionParams fusion_;
  LinearParams head_;
};

/// mega_forward as a free function over an existing model.
inline Tensor mega_forward(const MegaModel& model, const Tensor& h, Span aspect,
                           const ForwardOptions& opts = {}) {
  return model.forward_hidden(h, aspect, opts);
}

}  // namespace mega
