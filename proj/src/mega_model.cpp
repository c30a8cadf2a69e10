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

#include "mega/mega_model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "mega/init.hpp"
#include "mega/ops.hpp"

namespace mega {

std::string_view to_string(PoolingScope scope) {
  return scope == PoolingScope::kAspectSpan ? "aspect_span" : "whole_sentence";
}

std::string_view to_string(EncoderKind kind) {
  return kind == EncoderKind::kBiLSTM ? "bilstm" : "raw";
}

void MegaConfig::validate() const {
  auto fail = [](const std::string& m) { throw ContractError("config: " + m); };
  if (d_model == 0) fail("d_model must be positive");
  if (stream_heads == 0 || d_model % stream_heads != 0) fail("stream_heads must divide d_model");
  if (fusion_heads == 0 || d_model % fusion_heads != 0) fail("fusion_heads must divide d_model");
  if (conv_kernel == 0) fail("conv_kernel must be >= 1");
  if (!(flip_fraction >= 0.0 && flip_fraction <= 1.0)) fail("flip_fraction must be in [0,1]");
  if (class_count != kPolarityCount) fail("class_count must be 3");
  if (!(dropout >= 0.0 && dropout < 1.0)) fail("dropout must be in [0,1)");
  if (encoder == EncoderKind::kBiLSTM && d_model % 2 != 0) fail("bilstm encoder needs even d_model");
  if (encoder == EncoderKind::kRaw && embed_dim != d_model) {
    fail("raw encoder needs embed_dim == d_model");
  }
}

std::size_t MegaConfig::flip_extent(std::size_t n_tokens) const {
  if (flip_count) return std::min(*flip_count, n_tokens);
  const auto n = static_cast<std::size_t>(std::lround(flip_fraction * static_cast<double>(n_tokens)));
  return std::min(n, n_tokens);
}

LinearParams LinearParams::init(std::size_t in, std::size_t out, std::mt19937_64& rng) {
  return {fan_in_uniform({in, out}, in, rng), fan_in_uniform({out}, in, rng)};
}

LinearParams LinearParams::zeros(std::size_t in, std::size_t out) {
  return {trainable_fill({in, out}, 0.0), trainable_fill({out}, 0.0)};
}

DyTParams DyTParams::init(std::size_t d, double alpha0) {
  return {trainable_fill({}, alpha0), trainable_fill({d}, 1.0), trainable_fill({d}, 0.0)};
}

ConvParams ConvParams::init(std::size_t width, std::size_t d, std::mt19937_64& rng) {
  return {fan_in_uniform({width, d}, width, rng), fan_in_uniform({d}, width, rng)};
}

StreamParams StreamParams::init(const MegaConfig& cfg, std::mt19937_64& rng) {
  StreamParams s;
  s.dyt = DyTParams::init(cfg.d_model);
  s.proj = LinearParams::init(cfg.d_model, cfg.d_model, rng);
  s.conv = ConvParams::init(cfg.conv_kernel, cfg.d_model, rng);
  s.mlstm = MLSTMParams::init(cfg.d_model, cfg.stream_heads, rng);
  return s;
}

NormBranchParams NormBranchParams::init(const MegaConfig& cfg, std::mt19937_64& rng) {
  return {LinearParams::init(cfg.d_model, cfg.d_model, rng), DyTParams::init(cfg.d_model)};
}

FusionParams FusionParams::init(const MegaConfig& cfg, std::mt19937_64& rng) {
  return {MLSTMParams::init(cfg.d_model, cfg.fusion_heads, rng),
          LinearParams::zeros(3 * cfg.d_model, cfg.d_model)};
}

Tensor dyt(const Tensor& x, const DyTParams& p) {
  return add(mul(tanh(mul(x, p.alpha)), p.gamma), p.beta);
}

Tensor partial_flip(const Tensor& h, std::size_t n) {
  if (h.rank() != 2) throw ContractError("partial_flip: expected [N,d], got " + to_string(h.shape()));
  const std::size_t steps = h.dim(0);
  if (n > steps) {
    throw ContractError("partial_flip: prefix " + std::to_string(n) + " exceeds length " +
                        std::to_string(steps));
  }
  std::vector<std::size_t> order(steps);
  std::iota(order.begin(), order.end(), 0);
  std::reverse(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n));
  return permute_rows(h, order);
}

namespace {

Tensor stream_front(const Tensor& x, const StreamParams& s) {
  return causal_conv1d(linear(dyt(x, s.dyt), s.proj.weight, s.proj.bias), s.conv.kernel, s.conv.bias);
}

}  // namespace

ForwardStreamOut forward_stream(const Tensor& h, const NormBranchParams& norm,
                                const StreamParams& stream) {
  if (h.rank() != 2 || h.dim(0) == 0) throw ContractError("forward_stream: expected non-empty [N,d]");
  ForwardStreamOut out;
  out.h_norm = dyt(silu(linear(h, norm.proj.weight, norm.proj.bias)), norm.dyt);
  out.m_tilde = mlstm_self(stream_front(h, stream), stream.mlstm);
  return out;
}

Tensor pf_stream(const Tensor& h, std::size_t n, const StreamParams& stream, bool double_flip) {
  const Tensor con = stream_front(partial_flip(h, n), stream);
  return mlstm_self(double_flip ? partial_flip(con, n) : con, stream.mlstm);
}

Tensor mecgaf_fuse(const Tensor& m_tilde, const Tensor& n_tilde, const Tensor& h_norm,
                   const Tensor& h, const FusionParams& fusion, bool fusion_enabled,
                   double dropout_rate, std::uint64_t dropout_seed) {
  for (const Tensor* t : {&n_tilde, &h_norm, &h}) {
    if (t->shape() != m_tilde.shape()) {
      throw ContractError("mecgaf_fuse: inputs must share shape " + to_string(m_tilde.shape()) +
                          ", got " + to_string(t->shape()));
    }
  }
  const Tensor f = fusion_enabled ? mul(mlstm_cross(m_tilde, m_tilde, n_tilde, fusion.cross), h_norm)
                                  : Tensor::zeros(m_tilde.shape());
  const Tensor m = mul(m_tilde, h_norm);
  const Tensor n = mul(n_tilde, h_norm);
  Tensor fused = concat_lastdim({m, n, f});
  if (dropout_rate > 0.0) fused = dropout(fused, dropout_rate, dropout_seed);
  return add(linear(fused, fusion.out.weight, fusion.out.bias), h);
}

Tensor classify(const Tensor& o, std::span<const std::size_t> positions, const LinearParams& head) {
  const Tensor pooled = mean_over_positions(o, positions);
  const Tensor logits = linear(reshape(pooled, {1, pooled.size()}), head.weight, head.bias);
  const Tensor probs = softmax_lastdim(logits);
  return reshape(probs, {probs.size()});
}

MegaModel::MegaModel(MegaConfig config, Vocab vocab, Tensor embedding, std::uint64_t seed)
    : config_(std::move(config)), vocab_(std::move(vocab)), embedding_(std::move(embedding)) {
  config_.validate();
  if (embedding_.shape() != Shape{vocab_.size(), config_.embed_dim}) {
    throw ContractError("model: embedding table " + to_string(embedding_.shape()) +
                        " does not match vocab " + std::to_string(vocab_.size()) + " x embed_dim " +
                        std::to_string(config_.embed_dim));
  }
  embedding_ = embedding_.detach();
  embedding_.set_requires_grad(config_.train_embeddings);
  std::mt19937_64 rng(seed);
  if (config_.encoder == EncoderKind::kBiLSTM) {
    encoder_ = BiLSTMParams::init(config_.embed_dim, config_.d_model, rng);
  }
  norm_ = NormBranchParams::init(config_, rng);
  forward_ = StreamParams::init(config_, rng);
  pf_ = StreamParams::init(config_, rng);
  fusion_ = FusionParams::init(config_, rng);
  head_ = LinearParams::init(config_.d_model, config_.class_count, rng);
}

Tensor MegaModel::encode(std::span<const std::size_t> token_ids, const ForwardOptions& opts) const {
  while (!token_ids.empty() && token_ids.back() == Vocab::kPad) {
    token_ids = token_ids.first(token_ids.size() - 1);
  }
  if (token_ids.empty()) throw ContractError("model: empty token sequence");
  Tensor x = gather_rows(embedding_, token_ids);
  if (opts.training && config_.dropout > 0.0) {
    x = dropout(x, config_.dropout, mix_seed(opts.dropout_seed ^ 0x1ULL));
  }
  if (config_.encoder == EncoderKind::kRaw) return x;
  return bilstm_encode(x, encoder_);
}

Tensor MegaModel::forward_hidden(const Tensor& h, Span aspect, const ForwardOptions& opts) const {
  if (h.rank() != 2 || h.dim(1) != config_.d_model || h.dim(0) == 0) {
    throw ContractError("model: hidden sequence must be [N," + std::to_string(config_.d_model) +
                        "], got " + to_string(h.shape()));
  }
  const std::size_t steps = h.dim(0);
  if (!(aspect.begin < aspect.end && aspect.end <= steps)) {
    throw ContractError("model: aspect span [" + std::to_string(aspect.begin) + "," +
                        std::to_string(aspect.end) + ") invalid for length " + std::to_string(steps));
  }
  const auto fwd = forward_stream(h, norm_, forward_);
  const Tensor n_tilde = pf_stream(h, config_.flip_extent(steps), pf_, config_.pf_double_flip);
  const double rate = opts.training ? config_.dropout : 0.0;
  const Tensor o = mecgaf_fuse(fwd.m_tilde, n_tilde, fwd.h_norm, h, fusion_, config_.fusion_enabled,
                               rate, mix_seed(opts.dropout_seed ^ 0x2ULL));
  std::vector<std::size_t> positions;
  if (config_.pooling == PoolingScope::kAspectSpan) {
    for (std::size_t i = aspect.begin; i < aspect.end; ++i) positions.push_back(i);
  } else {
    positions.resize(steps);
    std::iota(positions.begin(), positions.end(), 0);
  }
  return classify(o, positions, head_);
}

Tensor MegaModel::forward(const EncodedExample& example, const ForwardOptions& opts) const {
  return forward_hidden(encode(example.token_ids, opts), example.aspect, opts);
}

Tensor MegaModel::forward_batch(const Batch& batch) const {
  NoGradGuard guard;
  const std::size_t rows = batch.size();
  const std::size_t cols = batch.max_length;
  const std::size_t width = config_.d_model;
  const Tensor hidden = config_.encoder == EncoderKind::kBiLSTM
                            ? bilstm_encode(embedding_, batch, encoder_)
                            : reshape(gather_rows(embedding_, batch.token_ids), {rows, cols, width});
  std::vector<double> out;
  out.reserve(rows * config_.class_count);
  auto hv = hidden.data();
  for (std::size_t b = 0; b < rows; ++b) {
    const std::size_t len = batch.lengths[b];
    const auto first = hv.begin() + static_cast<std::ptrdiff_t>(b * cols * width);
    const Tensor h({len, width}, std::vector<double>(first, first + static_cast<std::ptrdiff_t>(len * width)));
    const Tensor probs = forward_hidden(h, batch.aspects[b]);
    out.insert(out.end(), probs.data().begin(), probs.data().end());
  }
  return Tensor({rows, config_.class_count}, std::move(out));
}

namespace {

void add_linear(ParameterSet& set, const std::string& prefix, const LinearParams& p) {
  set.add(prefix + ".weight", p.weight);
  set.add(prefix + ".bias", p.bias);
}

void add_dyt(ParameterSet& set, const std::string& prefix, const DyTParams& p) {
  set.add(prefix + ".alpha", p.alpha);
  set.add(prefix + ".gamma", p.gamma);
  set.add(prefix + ".beta", p.beta);
}

void add_stream(ParameterSet& set, const std::string& prefix, const StreamParams& p) {
  add_dyt(set, prefix + ".dyt", p.dyt);
  add_linear(set, prefix + ".proj", p.proj);
  set.add(prefix + ".conv.kernel", p.conv.kernel);
  set.add(prefix + ".conv.bias", p.conv.bias);
  set.extend(p.mlstm.parameters(), prefix + ".mlstm.");
}

}  // namespace

ParameterSet MegaModel::trainable() const {
  ParameterSet set;
  if (config_.train_embeddings) set.add("embedding", embedding_);
  if (config_.encoder == EncoderKind::kBiLSTM) set.extend(encoder_.parameters(), "encoder.");
  add_linear(set, "norm.proj", norm_.proj);
  add_dyt(set, "norm.dyt", norm_.dyt);
  add_stream(set, "forward", forward_);
  add_stream(set, "pf", pf_);
  set.extend(fusion_.cross.parameters(), "fusion.mlstm.");
  add_linear(set, "fusion.out", fusion_.out);
  add_linear(set, "head", head_);
  return set;
}

ParameterSet MegaModel::parameters() const {
  if (config_.train_embeddings) return trainable();
  ParameterSet set;
  set.add("embedding", embedding_);
  set.extend(trainable());
  return set;
}

void MegaModel::load(const std::map<std::string, Tensor>& values) {
  const ParameterSet all = parameters();
  for (const auto& entry : all.entries()) {
    auto it = values.find(entry.name);
    if (it == values.end()) throw ContractError("model: missing parameter '" + entry.name + "'");
    if (it->second.shape() != entry.tensor.shape()) {
      throw ContractError("model: parameter '" + entry.name + "' has shape " +
                          to_string(it->second.shape()) + ", expected " +
                          to_string(entry.tensor.shape()));
    }
    Tensor dst = entry.tensor;
    auto out = dst.mutable_data();
    std::copy(it->second.data().begin(), it->second.data().end(), out.begin());
  }
}

}  // namespace mega
