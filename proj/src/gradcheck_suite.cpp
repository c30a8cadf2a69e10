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

#include "mega/gradcheck_suite.hpp"

#include <chrono>
#include <functional>
#include <random>

#include "mega/bilstm.hpp"
#include "mega/init.hpp"
#include "mega/mega_model.hpp"
#include "mega/mlstm.hpp"
#include "mega/ops.hpp"

namespace mega {

namespace {

constexpr double kInputBound = 2.0;

Tensor input(Shape shape, std::mt19937_64& rng) {
  Tensor t = uniform_tensor(std::move(shape), kInputBound, rng);
  t.set_requires_grad(true);
  return t;
}

// Random linear readout so no output coordinate is left out of the loss.
Tensor readout(const Tensor& y, const Tensor& weights) { return sum(mul(y, weights)); }

struct Case {
  ParameterSet params;
  std::function<Tensor()> loss;
};

Case tensor_core_case(std::mt19937_64& rng) {
  Case c;
  Tensor a = input({2, 3, 4}, rng);
  Tensor b = input({4, 5}, rng);
  Tensor bias = input({5}, rng);
  Tensor kernel = input({3, 5}, rng);
  Tensor conv_bias = input({5}, rng);
  Tensor table = input({6, 5}, rng);
  Tensor w = uniform_tensor({3, 10}, 1.0, rng);
  c.params.add("a", a);
  c.params.add("b", b);
  c.params.add("bias", bias);
  c.params.add("kernel", kernel);
  c.params.add("conv_bias", conv_bias);
  c.params.add("table", table);
  c.loss = [=] {
    static constexpr std::size_t first_rows[] = {0, 1, 2};
    static constexpr std::size_t second_rows[] = {3, 4, 5};
    static constexpr std::size_t order[] = {2, 0, 1};
    static constexpr std::size_t lookup[] = {4, 1, 1};
    static constexpr std::size_t pooled[] = {0, 2};
    Tensor y = reshape(add(matmul(a, b), bias), {6, 5});
    Tensor z = causal_conv1d(silu(gather_rows(y, first_rows)), kernel, conv_bias);
    Tensor g = mul(tanh(z), sigmoid(permute_rows(z, order)));
    Tensor e = gather_rows(table, lookup);
    Tensor mix = concat_lastdim({g, log(add(exp(e), Tensor::scalar(0.5)))});
    Tensor gated = add(mix, log_sigmoid(scale(mix, -0.7)));
    Tensor soft = softmax_lastdim(sub(gated, Tensor::scalar(0.1)));
    Tensor second = gather_rows(y, second_rows);
    Tensor out = add(readout(soft, w), sum(mean_over_positions(gated, pooled)));
    return add(out, scale(sum(mul(second, second)), 0.1));
  };
  return c;
}

Case mlstm_self_case(std::mt19937_64& rng) {
  Case c;
  auto params = std::make_shared<MLSTMParams>(MLSTMParams::init(8, 2, rng));
  Tensor x = input({5, 8}, rng);
  Tensor w = uniform_tensor({5, 8}, 1.0, rng);
  c.params.add("x", x);
  c.params.extend(params->parameters(), "mlstm.");
  c.loss = [=] { return readout(mlstm_self(x, *params), w); };
  return c;
}

Case mlstm_cross_case(std::mt19937_64& rng) {
  Case c;
  auto params = std::make_shared<MLSTMParams>(MLSTMParams::init(8, 2, rng));
  Tensor qs = input({5, 8}, rng);
  Tensor ks = input({5, 8}, rng);
  Tensor vs = input({5, 8}, rng);
  Tensor w = uniform_tensor({5, 8}, 1.0, rng);
  c.params.add("q_src", qs);
  c.params.add("k_src", ks);
  c.params.add("v_src", vs);
  c.params.extend(params->parameters(), "mlstm.");
  c.loss = [=] { return readout(mlstm_cross(qs, ks, vs, *params), w); };
  return c;
}

Case dyt_case(std::mt19937_64& rng) {
  Case c;
  auto params = std::make_shared<DyTParams>(DyTParams::init(6));
  for (auto& v : params->gamma.mutable_data()) v = 1.0 + 0.5 * (2.0 * unit_uniform(rng) - 1.0);
  for (auto& v : params->beta.mutable_data()) v = 0.5 * (2.0 * unit_uniform(rng) - 1.0);
  Tensor x = input({4, 6}, rng);
  Tensor w = uniform_tensor({4, 6}, 1.0, rng);
  c.params.add("x", x);
  c.params.add("alpha", params->alpha);
  c.params.add("gamma", params->gamma);
  c.params.add("beta", params->beta);
  c.loss = [=] { return readout(dyt(x, *params), w); };
  return c;
}

Case mega_forward_case(std::mt19937_64& rng) {
  MegaConfig cfg;
  cfg.embed_dim = 8;
  cfg.d_model = 8;
  cfg.stream_heads = 2;
  cfg.fusion_heads = 2;
  cfg.encoder = EncoderKind::kRaw;
  cfg.dropout = 0.0;
  Vocab vocab;
  vocab.add("a");
  const std::uint64_t table_seed = rng();
  const std::uint64_t model_seed = rng();
  auto model = std::make_shared<MegaModel>(cfg, vocab, random_embeddings(vocab.size(), 8, table_seed),
                                           model_seed);
  // The fusion projection starts at zero, which would hide every upstream
  // block from the check.
  for (auto& v : model->fusion().out.weight.mutable_data()) v = 0.4 * (2.0 * unit_uniform(rng) - 1.0);
  Case c;
  Tensor h = input({4, 8}, rng);
  c.params.add("h", h);
  c.params.extend(model->trainable());
  c.loss = [=] { return scale(log(pick(mega_forward(*model, h, Span{1, 3}), 2)), -1.0); };
  return c;
}

Case bilstm_case(std::mt19937_64& rng) {
  Case c;
  auto params = std::make_shared<BiLSTMParams>(BiLSTMParams::init(5, 6, rng));
  Tensor x = input({3, 5}, rng);
  Tensor w = uniform_tensor({3, 6}, 1.0, rng);
  c.params.add("x", x);
  c.params.extend(params->parameters(), "bilstm.");
  c.loss = [=] { return readout(bilstm_encode(x, *params), w); };
  return c;
}

}  // namespace

std::vector<std::string> gradcheck_blocks() {
  return {"tensor_core", "mlstm_self", "mlstm_cross", "dyt", "mega_forward", "bilstm_encode"};
}

std::vector<SuiteResult> run_gradcheck_suites(double tolerance, std::uint64_t seed) {
  using Factory = Case (*)(std::mt19937_64&);
  const Factory factories[] = {tensor_core_case, mlstm_self_case, mlstm_cross_case,
                               dyt_case,         mega_forward_case, bilstm_case};
  const auto names = gradcheck_blocks();
  std::vector<SuiteResult> results;
  for (std::size_t i = 0; i < names.size(); ++i) {
    std::mt19937_64 rng(mix_seed(seed + i));
    const auto start = std::chrono::steady_clock::now();
    Case c = factories[i](rng);
    SuiteResult r;
    r.block = names[i];
    r.report = grad_check(c.loss, c.params);
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    r.passed = r.report.max_relative_error <= tolerance;
    results.push_back(std::move(r));
  }
  return results;
}

}  // namespace mega
