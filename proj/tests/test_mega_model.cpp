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

#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "mega/gradcheck_suite.hpp"
#include "mega/mega_model.hpp"
#include "mega/ops.hpp"
#include "test_support.hpp"

namespace mega {
namespace {

using test::random_tensor;

MegaConfig tiny_config(EncoderKind encoder = EncoderKind::kRaw) {
  MegaConfig cfg;
  cfg.embed_dim = 8;
  cfg.d_model = 8;
  cfg.stream_heads = 2;
  cfg.fusion_heads = 2;
  cfg.encoder = encoder;
  return cfg;
}

Vocab word_vocab(std::size_t words) {
  Vocab v;
  for (std::size_t i = 0; i < words; ++i) v.add("w" + std::to_string(i));
  return v;
}

void randomize(Tensor& t, std::mt19937_64& rng, double bound) {
  for (auto& x : t.mutable_data()) x = bound * (2.0 * unit_uniform(rng) - 1.0);
}

TEST(Dyt, DocumentedValues) {
  DyTParams p = DyTParams::init(3, 1.0);
  const Tensor zero = dyt(Tensor({2, 3}, 0.0), p);
  for (double v : zero.data()) EXPECT_EQ(v, 0.0);
  std::mt19937_64 rng(1);
  randomize(p.gamma, rng, 2.0);
  randomize(p.beta, rng, 2.0);
  const Tensor sat = dyt(Tensor({1, 3}, 1e3), p);
  for (std::size_t c = 0; c < 3; ++c) EXPECT_DOUBLE_EQ(sat[c], p.gamma[c] + p.beta[c]);
  EXPECT_GT(DyTParams::init(4).alpha.item(), 0.0);
}

TEST(Dyt, AlphaGradient) {
  std::mt19937_64 rng(2);
  const Tensor x = random_tensor({4, 3}, rng);
  const Tensor w = random_tensor({4, 3}, rng, 1.0);
  const DyTParams p = DyTParams::init(3, 0.7);
  const double err = grad_check(
      [&](const Tensor& alpha) {
        DyTParams q = p;
        q.alpha = alpha;
        return sum(mul(dyt(x, q), w));
      },
      p.alpha);
  EXPECT_LE(err, 1e-4);
}

TEST(PartialFlip, ReversesPrefixOnly) {
  Tensor h({5, 1}, {1, 2, 3, 4, 5});
  const Tensor f = partial_flip(h, 3);
  const double expected[] = {3, 2, 1, 4, 5};
  for (std::size_t i = 0; i < 5; ++i) EXPECT_EQ(f[i], expected[i]);
  EXPECT_TRUE(test::bit_equal(partial_flip(h, 0), h));
  EXPECT_TRUE(test::bit_equal(partial_flip(h, 1), h));
  const Tensor full = partial_flip(h, 5);
  for (std::size_t i = 0; i < 5; ++i) EXPECT_EQ(full[i], 5.0 - static_cast<double>(i));
  EXPECT_THROW(partial_flip(h, 6), ContractError);
}

TEST(PartialFlip, IsAnInvolution) {
  std::mt19937_64 rng(3);
  for (std::size_t n_rows = 1; n_rows <= 32; ++n_rows) {
    const Tensor x = random_tensor({n_rows, 3}, rng);
    for (std::size_t n = 0; n <= n_rows; ++n) {
      ASSERT_TRUE(test::bit_equal(partial_flip(partial_flip(x, n), n), x)) << n_rows << " " << n;
    }
  }
}

TEST(FlipExtent, FractionAndOverride) {
  MegaConfig cfg;
  EXPECT_EQ(cfg.flip_extent(5), 3u);  // round(2.5) away from zero
  EXPECT_EQ(cfg.flip_extent(4), 2u);
  EXPECT_EQ(cfg.flip_extent(1), 1u);
  cfg.flip_fraction = 0.0;
  EXPECT_EQ(cfg.flip_extent(9), 0u);
  cfg.flip_count = 4;
  EXPECT_EQ(cfg.flip_extent(9), 4u);
  EXPECT_EQ(cfg.flip_extent(2), 2u);
}

TEST(ForwardStream, ShapeLaw) {
  std::mt19937_64 rng(4);
  const MegaConfig cfg = tiny_config();
  const auto norm = NormBranchParams::init(cfg, rng);
  const auto stream = StreamParams::init(cfg, rng);
  for (std::size_t n : {1u, 2u, 7u}) {
    const auto out = forward_stream(random_tensor({n, 8}, rng), norm, stream);
    EXPECT_EQ(out.h_norm.shape(), (Shape{n, 8}));
    EXPECT_EQ(out.m_tilde.shape(), (Shape{n, 8}));
  }
}

StreamParams identity_conv_stream(const MegaConfig& cfg, std::mt19937_64& rng) {
  MegaConfig k1 = cfg;
  k1.conv_kernel = 1;
  StreamParams s = StreamParams::init(k1, rng);
  for (auto& v : s.conv.kernel.mutable_data()) v = 1.0;
  for (auto& v : s.conv.bias.mutable_data()) v = 0.0;
  return s;
}

TEST(ForwardStream, SingleStepHandComposition) {
  std::mt19937_64 rng(5);
  const MegaConfig cfg = tiny_config();
  StreamParams s = identity_conv_stream(cfg, rng);
  for (auto& v : s.mlstm.w_o.mutable_data()) v = 0.0;
  for (auto& v : s.mlstm.b_o.mutable_data()) v = 1e3;  // output gate open
  const auto norm = NormBranchParams::init(cfg, rng);
  const Tensor h = random_tensor({1, 8}, rng);
  const Tensor mt = forward_stream(h, norm, s).m_tilde;

  const Tensor u = linear(dyt(h, s.dyt), s.proj.weight, s.proj.bias);
  const Tensor q = matmul(u, s.mlstm.w_q);
  const Tensor k = scale(matmul(u, s.mlstm.w_k), 0.5);  // 1/sqrt(4)
  const Tensor v = matmul(u, s.mlstm.w_v);
  const Tensor ig = linear(u, s.mlstm.w_i, s.mlstm.b_i);
  const Tensor fg = log_sigmoid(linear(u, s.mlstm.w_f, s.mlstm.b_f));
  MLSTMState state = MLSTMState::zeros(2, 4);
  const auto expected = mlstm_step(state, q.data(), k.data(), v.data(), ig.data(), fg.data());
  for (std::size_t c = 0; c < 8; ++c) EXPECT_NEAR(mt[c], expected[c], 1e-14);
}

TEST(ForwardStream, GradientThroughStream) {
  std::mt19937_64 rng(6);
  const MegaConfig cfg = tiny_config();
  const auto norm = NormBranchParams::init(cfg, rng);
  const auto stream = StreamParams::init(cfg, rng);
  const Tensor w = random_tensor({3, 8}, rng, 1.0);
  const Tensor h = random_tensor({3, 8}, rng);
  ParameterSet params;
  params.extend(stream.mlstm.parameters(), "mlstm.");
  params.add("proj.weight", stream.proj.weight);
  params.add("conv.kernel", stream.conv.kernel);
  params.add("dyt.alpha", stream.dyt.alpha);
  params.add("norm.proj.weight", norm.proj.weight);
  const auto report = grad_check(
      [&] {
        const auto out = forward_stream(h, norm, stream);
        return sum(mul(add(out.m_tilde, out.h_norm), w));
      },
      params);
  EXPECT_LE(report.max_relative_error, 1e-4) << report.worst_parameter;
}

TEST(PfStream, ZeroPrefixEqualsForwardStream) {
  std::mt19937_64 rng(7);
  const MegaConfig cfg = tiny_config();
  const auto norm = NormBranchParams::init(cfg, rng);
  const auto stream = StreamParams::init(cfg, rng);
  const Tensor h = random_tensor({6, 8}, rng);
  for (bool twice : {true, false}) {
    EXPECT_LE(test::max_abs_diff(pf_stream(h, 0, stream, twice), forward_stream(h, norm, stream).m_tilde),
              1e-12);
  }
}

TEST(PfStream, FlipsCancelAroundPointwiseConv) {
  std::mt19937_64 rng(8);
  const MegaConfig cfg = tiny_config();
  const auto norm = NormBranchParams::init(cfg, rng);
  const StreamParams s = identity_conv_stream(cfg, rng);
  const Tensor h = random_tensor({7, 8}, rng);
  const Tensor plain = forward_stream(h, norm, s).m_tilde;
  for (std::size_t n = 0; n <= 7; ++n) EXPECT_TRUE(test::bit_equal(pf_stream(h, n, s, true), plain));
  EXPECT_FALSE(test::bit_equal(pf_stream(h, 4, s, false), plain));
}

// Conv rows at or after n + k - 1 only look back into the unflipped tail.
TEST(PfStream, ConvReceptiveField) {
  std::mt19937_64 rng(9);
  const MegaConfig cfg = tiny_config();
  const auto s = StreamParams::init(cfg, rng);
  const std::size_t steps = 10, n = 4, k = cfg.conv_kernel;
  const Tensor h = random_tensor({steps, 8}, rng);
  auto front = [&](const Tensor& x) {
    return causal_conv1d(linear(dyt(x, s.dyt), s.proj.weight, s.proj.bias), s.conv.kernel, s.conv.bias);
  };
  const Tensor flipped = front(partial_flip(h, n));
  const Tensor straight = front(h);
  for (std::size_t t = n + k - 1; t < steps; ++t) {
    for (std::size_t c = 0; c < 8; ++c) ASSERT_EQ(flipped.at(t, c), straight.at(t, c)) << t;
  }
  bool differs = false;
  for (std::size_t c = 0; c < 8; ++c) differs |= flipped.at(n + k - 2, c) != straight.at(n + k - 2, c);
  EXPECT_TRUE(differs);
}

struct FuseInputs {
  Tensor m, n, hn, h;
};

FuseInputs fuse_inputs(std::mt19937_64& rng, std::size_t steps = 5) {
  return {random_tensor({steps, 8}, rng), random_tensor({steps, 8}, rng), random_tensor({steps, 8}, rng),
          random_tensor({steps, 8}, rng)};
}

TEST(Mecgaf, ZeroProjectionIsResidualIdentity) {
  std::mt19937_64 rng(10);
  const auto fusion = FusionParams::init(tiny_config(), rng);
  const auto in = fuse_inputs(rng);
  const Tensor o = mecgaf_fuse(in.m, in.n, in.hn, in.h, fusion);
  EXPECT_EQ(o.shape(), in.h.shape());
  EXPECT_TRUE(test::bit_equal(o, in.h));
}

TEST(Mecgaf, UnitGateIsNoOp) {
  std::mt19937_64 rng(11);
  auto fusion = FusionParams::init(tiny_config(), rng);
  randomize(fusion.out.weight, rng, 0.3);
  randomize(fusion.out.bias, rng, 0.3);
  const auto in = fuse_inputs(rng);
  const Tensor ones({5, 8}, 1.0);
  const Tensor o = mecgaf_fuse(in.m, in.n, ones, in.h, fusion);
  const Tensor expected =
      add(linear(concat_lastdim({in.m, in.n, mlstm_cross(in.m, in.m, in.n, fusion.cross)}), fusion.out.weight,
                 fusion.out.bias),
          in.h);
  EXPECT_LE(test::max_abs_diff(o, expected), 1e-12);
}

TEST(Mecgaf, DisabledFusionZerosTheFusedBranch) {
  std::mt19937_64 rng(12);
  auto fusion = FusionParams::init(tiny_config(), rng);
  randomize(fusion.out.weight, rng, 0.3);
  const auto in = fuse_inputs(rng);
  const Tensor o = mecgaf_fuse(in.m, in.n, in.hn, in.h, fusion, false);
  const Tensor expected = add(linear(concat_lastdim({mul(in.m, in.hn), mul(in.n, in.hn), Tensor({5, 8})}),
                                     fusion.out.weight, fusion.out.bias),
                              in.h);
  EXPECT_LE(test::max_abs_diff(o, expected), 1e-12);
  EXPECT_THROW(mecgaf_fuse(in.m, Tensor({4, 8}), in.hn, in.h, fusion), ContractError);
}

TEST(Classify, UniformHeadAndPooling) {
  const LinearParams zero = LinearParams::zeros(2, 3);
  const std::vector<std::size_t> all = {0};
  const Tensor p = classify(Tensor({1, 2}, {4.0, -1.0}), all, zero);
  for (std::size_t c = 0; c < 3; ++c) EXPECT_NEAR(p[c], 1.0 / 3.0, 1e-15);

  // O rows 2 and 3 average to [2, 1]; head picks out logits [2, 1, 0].
  const Tensor o({4, 2}, {9, 9, -9, 9, 1, 3, 3, -1});
  LinearParams head = LinearParams::zeros(2, 3);
  auto w = head.weight.mutable_data();
  w[0] = 1.0;  // x0 -> class 0
  w[4] = 1.0;  // x1 -> class 1
  const std::vector<std::size_t> span = {2, 3};
  const Tensor q = classify(o, span, head);
  const double z = std::exp(2.0) + std::exp(1.0) + 1.0;
  EXPECT_NEAR(q[0], std::exp(2.0) / z, 1e-15);
  EXPECT_NEAR(q[1], std::exp(1.0) / z, 1e-15);
  EXPECT_NEAR(q[2], 1.0 / z, 1e-15);
  EXPECT_THROW(classify(o, std::vector<std::size_t>{}, head), ContractError);
}

TEST(MegaModelTest, ProbabilitiesOnSimplex) {
  std::mt19937_64 rng(13);
  const Vocab vocab = word_vocab(20);
  MegaConfig cfg = tiny_config(EncoderKind::kBiLSTM);
  MegaModel model(cfg, vocab, random_embeddings(vocab.size(), 8, 1), 2);
  randomize(model.fusion().out.weight, rng, 0.5);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t len = 1 + rng() % 12;
    EncodedExample ex;
    for (std::size_t i = 0; i < len; ++i) ex.token_ids.push_back(2 + rng() % 20);
    const std::size_t b = rng() % len;
    ex.aspect = {b, b + 1 + rng() % (len - b)};
    ex.label = Polarity::kPositive;
    const Tensor p = model.forward(ex);
    double total = 0.0;
    for (double v : p.data()) {
      ASSERT_GE(v, 0.0);
      ASSERT_LE(v, 1.0);
      total += v;
    }
    ASSERT_NEAR(total, 1.0, 1e-9);
  }
}

TEST(MegaModelTest, ResidualIdentityAtInit) {
  // With the fusion projection at zero, the head sees H directly.
  const Vocab vocab = word_vocab(5);
  MegaModel model(tiny_config(), vocab, random_embeddings(vocab.size(), 8, 3), 4);
  std::mt19937_64 rng(3);
  const Tensor h = random_tensor({4, 8}, rng);
  const std::vector<std::size_t> span = {1, 2};
  EXPECT_TRUE(test::bit_equal(model.forward_hidden(h, Span{1, 3}), classify(h, span, model.head())));
}

TEST(MegaModelTest, SameSeedSameProbabilities) {
  const Vocab vocab = word_vocab(10);
  const Tensor table = random_embeddings(vocab.size(), 8, 5);
  MegaModel a(tiny_config(EncoderKind::kBiLSTM), vocab, table, 6);
  MegaModel b(tiny_config(EncoderKind::kBiLSTM), vocab, table, 6);
  const EncodedExample ex{{2, 3, 4, 5, 6}, {1, 3}, Polarity::kNegative, "x"};
  EXPECT_TRUE(test::bit_equal(a.forward(ex), b.forward(ex)));
  ForwardOptions train{true, 99};
  EXPECT_TRUE(test::bit_equal(a.forward(ex, train), b.forward(ex, train)));
}

TEST(MegaModelTest, PaddingNeverReachesOutput) {
  std::mt19937_64 rng(14);
  const Vocab vocab = word_vocab(30);
  MegaModel model(tiny_config(EncoderKind::kBiLSTM), vocab, random_embeddings(vocab.size(), 8, 7), 8);
  randomize(model.fusion().out.weight, rng, 0.5);
  std::vector<EncodedExample> examples;
  for (int i = 0; i < 9; ++i) {
    const std::size_t len = 2 + rng() % 10;
    EncodedExample ex;
    for (std::size_t t = 0; t < len; ++t) ex.token_ids.push_back(2 + rng() % 30);
    ex.aspect = {len / 2, len / 2 + 1};
    ex.label = Polarity::kNeutral;
    examples.push_back(ex);
  }
  const auto batches = make_batches(examples, 4, std::nullopt);
  for (const auto& batch : batches) {
    const Tensor probs = model.forward_batch(batch);
    for (std::size_t b = 0; b < batch.size(); ++b) {
      const Tensor single = model.forward(examples[batch.example_index[b]]);
      for (std::size_t c = 0; c < 3; ++c) ASSERT_NEAR(probs.at(b, c), single[c], 1e-6);
    }
  }
  for (auto ex : examples) {
    const Tensor before = model.forward(ex);
    ex.token_ids.insert(ex.token_ids.end(), 5, Vocab::kPad);
    EXPECT_LE(test::max_abs_diff(model.forward(ex), before), 1e-6);
  }
}

TEST(MegaModelTest, EndToEndGradientOnTwoTokens) {
  std::mt19937_64 rng(15);
  MegaConfig cfg;
  cfg.embed_dim = 4;
  cfg.d_model = 4;
  cfg.stream_heads = 2;
  cfg.fusion_heads = 2;
  cfg.train_embeddings = true;
  const Vocab vocab = word_vocab(3);
  MegaModel model(cfg, vocab, random_embeddings(vocab.size(), 4, 9), 10);
  randomize(model.fusion().out.weight, rng, 0.5);
  const EncodedExample ex{{2, 4}, {1, 2}, Polarity::kNegative, "e2e"};
  const auto report = grad_check([&] { return scale(log(pick(model.forward(ex), 2)), -1.0); },
                                 model.trainable());
  EXPECT_LE(report.max_relative_error, 1e-4) << report.worst_parameter << "[" << report.worst_index << "]";
}

TEST(MegaModelTest, ConfigValidation) {
  MegaConfig cfg = tiny_config();
  cfg.embed_dim = 6;
  EXPECT_THROW(cfg.validate(), ContractError);
  cfg = tiny_config();
  cfg.stream_heads = 3;
  EXPECT_THROW(cfg.validate(), ContractError);
  cfg = tiny_config(EncoderKind::kBiLSTM);
  cfg.d_model = 7;
  cfg.stream_heads = 1;
  cfg.fusion_heads = 1;
  EXPECT_THROW(cfg.validate(), ContractError);
}

TEST(GradcheckSuite, EveryBlockPasses) {
  const auto results = run_gradcheck_suites();
  ASSERT_EQ(results.size(), gradcheck_blocks().size());
  for (const auto& r : results) EXPECT_TRUE(r.passed) << r.block << " " << r.report.max_relative_error;
}

TEST(GradcheckSuite, CorruptedAdjointFailsTensorCore) {
  testing::set_adjoint_corruption(0.01);
  const auto results = run_gradcheck_suites();
  testing::set_adjoint_corruption(0.0);
  EXPECT_FALSE(results.front().passed);
  EXPECT_EQ(results.front().block, "tensor_core");
}

}  // namespace
}  // namespace mega
