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

#include "mega/bilstm.hpp"

#include <cmath>

#include "mega/data.hpp"
#include "mega/init.hpp"
#include "mega/kernels.hpp"
#include "mega/ops.hpp"

namespace mega {

namespace {

LSTMDirection init_direction(std::size_t d_in, std::size_t h, std::mt19937_64& rng) {
  // Same bound for every block, as in the common framework default.
  LSTMDirection dir;
  dir.w_ih = fan_in_uniform({d_in, 4 * h}, h, rng);
  dir.w_hh = fan_in_uniform({h, 4 * h}, h, rng);
  dir.bias = fan_in_uniform({4 * h}, h, rng);
  return dir;
}

double sigm(double x) { return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x)); }

}  // namespace

BiLSTMParams BiLSTMParams::init(std::size_t d_in, std::size_t d_out, std::mt19937_64& rng) {
  if (d_out == 0 || d_out % 2 != 0) {
    throw ContractError("bilstm: output width must be even, got " + std::to_string(d_out));
  }
  BiLSTMParams p;
  p.forward = init_direction(d_in, d_out / 2, rng);
  p.backward = init_direction(d_in, d_out / 2, rng);
  return p;
}

ParameterSet BiLSTMParams::parameters() const {
  ParameterSet set;
  set.add("fwd.w_ih", forward.w_ih);
  set.add("fwd.w_hh", forward.w_hh);
  set.add("fwd.bias", forward.bias);
  set.add("bwd.w_ih", backward.w_ih);
  set.add("bwd.w_hh", backward.w_hh);
  set.add("bwd.bias", backward.bias);
  return set;
}

Tensor lstm_recurrence(const Tensor& input_preact, const Tensor& w_hh, bool reverse) {
  if (w_hh.rank() != 2 || w_hh.dim(1) != 4 * w_hh.dim(0)) {
    throw ContractError("lstm_recurrence: w_hh must be [h,4h], got " + to_string(w_hh.shape()));
  }
  const std::size_t h = w_hh.dim(0);
  if (input_preact.rank() != 2 || input_preact.dim(1) != 4 * h) {
    throw ContractError("lstm_recurrence: preactivations must be [T," + std::to_string(4 * h) +
                        "], got " + to_string(input_preact.shape()));
  }
  const std::size_t steps = input_preact.dim(0);
  const std::size_t g4 = 4 * h;
  auto pre = input_preact.data();
  auto whh = w_hh.data();

  // Per position: activated gates (i,f,g,o) and cell state.
  std::vector<double> gates(steps * g4);
  std::vector<double> cells(steps * h);
  std::vector<double> out(steps * h);
  std::vector<double> z(g4);
  std::vector<double> h_prev(h, 0.0), c_prev(h, 0.0);
  for (std::size_t n = 0; n < steps; ++n) {
    const std::size_t t = reverse ? steps - 1 - n : n;
    std::copy_n(pre.begin() + t * g4, g4, z.begin());
    kernels::serial::gemm(kernels::Trans::kNo, kernels::Trans::kNo, {1, h, g4}, h_prev, whh, z, true);
    double* gt = gates.data() + t * g4;
    for (std::size_t j = 0; j < h; ++j) {
      gt[j] = sigm(z[j]);
      gt[h + j] = sigm(z[h + j]);
      gt[2 * h + j] = std::tanh(z[2 * h + j]);
      gt[3 * h + j] = sigm(z[3 * h + j]);
      const double c = gt[h + j] * c_prev[j] + gt[j] * gt[2 * h + j];
      cells[t * h + j] = c;
      out[t * h + j] = gt[3 * h + j] * std::tanh(c);
    }
    std::copy_n(out.begin() + t * h, h, h_prev.begin());
    std::copy_n(cells.begin() + t * h, h, c_prev.begin());
  }

  return detail::make_result(
      Shape{steps, h}, std::move(out), "lstm_recurrence", {input_preact, w_hh},
      [steps, h, g4, reverse, gates = std::move(gates), cells = std::move(cells)](
          const TensorImpl& self, std::span<const double> g,
          std::span<std::vector<double>* const> pg) {
        const auto& whh = self.parents[1]->data;
        const auto& hv = self.data;
        std::vector<double> dh_carry(h, 0.0), dc_carry(h, 0.0), dz(g4);
        std::vector<double> zeros(h, 0.0);
        for (std::size_t n = steps; n-- > 0;) {
          const std::size_t t = reverse ? steps - 1 - n : n;
          const bool first = n == 0;
          const std::size_t prev = reverse ? t + 1 : t - 1;
          const double* gt = gates.data() + t * g4;
          const double* cp = first ? zeros.data() : cells.data() + prev * h;
          const double* hp = first ? zeros.data() : hv.data() + prev * h;
          for (std::size_t j = 0; j < h; ++j) {
            const double ig = gt[j], fg = gt[h + j], cg = gt[2 * h + j], og = gt[3 * h + j];
            const double tc = std::tanh(cells[t * h + j]);
            const double dh = g[t * h + j] + dh_carry[j];
            const double dc = dc_carry[j] + dh * og * (1.0 - tc * tc);
            dz[j] = dc * cg * ig * (1.0 - ig);
            dz[h + j] = dc * cp[j] * fg * (1.0 - fg);
            dz[2 * h + j] = dc * ig * (1.0 - cg * cg);
            dz[3 * h + j] = dh * tc * og * (1.0 - og);
            dc_carry[j] = dc * fg;
          }
          if (pg[0]) {
            for (std::size_t j = 0; j < g4; ++j) (*pg[0])[t * g4 + j] += dz[j];
          }
          if (pg[1] && !first) {
            kernels::serial::gemm(kernels::Trans::kYes, kernels::Trans::kNo, {h, 1, g4},
                                  std::span<const double>(hp, h), dz, *pg[1], true);
          }
          // dh_prev = dz W_hh^T
          kernels::serial::gemm(kernels::Trans::kNo, kernels::Trans::kYes, {1, g4, h}, dz, whh,
                                dh_carry, false);
        }
      });
}

Tensor bilstm_encode(const Tensor& embedded, const BiLSTMParams& params) {
  if (embedded.rank() != 2 || embedded.dim(1) != params.input_dim()) {
    throw ContractError("bilstm_encode: expected [T," + std::to_string(params.input_dim()) +
                        "], got " + to_string(embedded.shape()));
  }
  const Tensor fwd = lstm_recurrence(linear(embedded, params.forward.w_ih, params.forward.bias),
                                     params.forward.w_hh, false);
  const Tensor bwd = lstm_recurrence(linear(embedded, params.backward.w_ih, params.backward.bias),
                                     params.backward.w_hh, true);
  return concat_lastdim({fwd, bwd});
}

Tensor bilstm_encode(const Tensor& table, const Batch& batch, const BiLSTMParams& params) {
  NoGradGuard guard;
  const std::size_t width = params.output_dim();
  const std::size_t rows = batch.lengths.size();
  const std::size_t cols = batch.max_length;
  std::vector<double> out(rows * cols * width, 0.0);
  for (std::size_t b = 0; b < rows; ++b) {
    const std::size_t len = batch.lengths[b];
    if (len == 0) continue;
    std::span<const std::size_t> ids(batch.token_ids.data() + b * cols, len);
    const Tensor enc = bilstm_encode(gather_rows(table, ids), params);
    std::copy(enc.data().begin(), enc.data().end(), out.begin() + b * cols * width);
  }
  return Tensor({rows, cols, width}, std::move(out));
}

}  // namespace mega
