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

#include "mega/mlstm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "mega/init.hpp"
#include "mega/ops.hpp"

namespace mega {

MLSTMParams MLSTMParams::init(std::size_t d_model, std::size_t heads, std::mt19937_64& rng) {
  if (heads == 0 || d_model % heads != 0) {
    throw ContractError("mlstm: heads (" + std::to_string(heads) + ") must divide d_model (" +
                        std::to_string(d_model) + ")");
  }
  MLSTMParams p;
  p.heads = heads;
  p.w_q = fan_in_uniform({d_model, d_model}, d_model, rng);
  p.w_k = fan_in_uniform({d_model, d_model}, d_model, rng);
  p.w_v = fan_in_uniform({d_model, d_model}, d_model, rng);
  p.w_i = fan_in_uniform({d_model, heads}, d_model, rng);
  p.b_i = trainable_fill({heads}, 0.0);
  p.w_f = fan_in_uniform({d_model, heads}, d_model, rng);
  p.b_f = trainable_fill({heads}, 3.0);
  p.w_o = fan_in_uniform({d_model, d_model}, d_model, rng);
  p.b_o = trainable_fill({d_model}, 0.0);
  return p;
}

ParameterSet MLSTMParams::parameters() const {
  ParameterSet set;
  set.add("w_q", w_q);
  set.add("w_k", w_k);
  set.add("w_v", w_v);
  set.add("w_i", w_i);
  set.add("b_i", b_i);
  set.add("w_f", w_f);
  set.add("b_f", b_f);
  set.add("w_o", w_o);
  set.add("b_o", b_o);
  return set;
}

void MLSTMParams::validate() const {
  const std::size_t d = w_q.rank() == 2 ? w_q.dim(0) : 0;
  const bool ok = heads > 0 && d > 0 && d % heads == 0 && w_q.shape() == Shape{d, d} &&
                  w_k.shape() == Shape{d, d} && w_v.shape() == Shape{d, d} &&
                  w_o.shape() == Shape{d, d} && w_i.shape() == Shape{d, heads} &&
                  w_f.shape() == Shape{d, heads} && b_i.shape() == Shape{heads} &&
                  b_f.shape() == Shape{heads} && b_o.shape() == Shape{d};
  if (!ok) throw ContractError("mlstm: inconsistent parameter shapes");
}

MLSTMState MLSTMState::zeros(std::size_t heads, std::size_t head_dim) {
  MLSTMState s;
  s.heads = heads;
  s.head_dim = head_dim;
  s.memory.assign(heads * head_dim * head_dim, 0.0);
  s.normalizer.assign(heads * head_dim, 0.0);
  s.stabilizer.assign(heads, 0.0);
  return s;
}

namespace {

struct StepOut {
  double input_gate;
  double forget_gate;
  double dot;  // n'^T q
  double denom;
};

// One head of one step; c/n/m are updated in place, h receives the readout.
StepOut head_step(double* c, double* n, double& m, const double* q, const double* k,
                  const double* v, double input_pre, double forget_pre, std::size_t dh, double* h) {
  const double decayed = forget_pre + m;
  const double m_new = std::max(decayed, input_pre);
  const double ig = std::exp(input_pre - m_new);
  const double fg = std::exp(decayed - m_new);
  for (std::size_t i = 0; i < dh; ++i) {
    double* row = c + i * dh;
    const double vi = ig * v[i];
    for (std::size_t j = 0; j < dh; ++j) row[j] = fg * row[j] + vi * k[j];
  }
  double dot = 0.0;
  for (std::size_t j = 0; j < dh; ++j) {
    n[j] = fg * n[j] + ig * k[j];
    dot += n[j] * q[j];
  }
  const double denom = std::max(std::abs(dot), 1.0);
  for (std::size_t i = 0; i < dh; ++i) {
    const double* row = c + i * dh;
    double acc = 0.0;
    for (std::size_t j = 0; j < dh; ++j) acc += row[j] * q[j];
    h[i] = acc / denom;
  }
  m = m_new;
  return {ig, fg, dot, denom};
}

void check_gate(double value, std::size_t head, const char* which) {
  if (!std::isfinite(value)) {
    throw NumericError(std::string("mlstm_step: non-finite ") + which + " gate preactivation (head " +
                       std::to_string(head) + ")");
  }
}

}  // namespace

std::vector<double> mlstm_step(MLSTMState& state, std::span<const double> q,
                               std::span<const double> k, std::span<const double> v,
                               std::span<const double> input_pre,
                               std::span<const double> forget_pre) {
  const std::size_t heads = state.heads;
  const std::size_t dh = state.head_dim;
  const std::size_t d = heads * dh;
  if (q.size() != d || k.size() != d || v.size() != d || input_pre.size() != heads ||
      forget_pre.size() != heads) {
    throw ContractError("mlstm_step: expected q/k/v of " + std::to_string(d) + " and gates of " +
                        std::to_string(heads) + " entries");
  }
  std::vector<double> h(d);
  for (std::size_t hd = 0; hd < heads; ++hd) {
    check_gate(input_pre[hd], hd, "input");
    check_gate(forget_pre[hd], hd, "forget");
    head_step(state.memory.data() + hd * dh * dh, state.normalizer.data() + hd * dh,
              state.stabilizer[hd], q.data() + hd * dh, k.data() + hd * dh, v.data() + hd * dh,
              input_pre[hd], forget_pre[hd], dh, h.data() + hd * dh);
  }
  detail::check_finite(h, "mlstm_step");
  return h;
}

Tensor mlstm_recurrence(const Tensor& q, const Tensor& k, const Tensor& v, const Tensor& input_pre,
                        const Tensor& forget_pre, std::size_t heads) {
  if (q.rank() != 2 || q.shape() != k.shape() || q.shape() != v.shape()) {
    throw ContractError("mlstm_recurrence: q/k/v shapes differ: " + to_string(q.shape()) + ", " +
                        to_string(k.shape()) + ", " + to_string(v.shape()));
  }
  const std::size_t steps = q.dim(0);
  const std::size_t d = q.dim(1);
  if (heads == 0 || d % heads != 0) throw ContractError("mlstm_recurrence: heads must divide width");
  if (input_pre.shape() != Shape{steps, heads} || forget_pre.shape() != Shape{steps, heads}) {
    throw ContractError("mlstm_recurrence: gate preactivations must be " +
                        to_string(Shape{steps, heads}));
  }
  const std::size_t dh = d / heads;
  const std::size_t mem = heads * dh * dh;

  // Every intermediate memory/normalizer is kept for the adjoint sweep.
  std::vector<double> memories((steps + 1) * mem, 0.0);
  std::vector<double> normalizers((steps + 1) * d, 0.0);
  std::vector<StepOut> trace(steps * heads);
  std::vector<double> out(steps * d);
  std::vector<double> stabilizer(heads, 0.0);
  auto qv = q.data();
  auto kv = k.data();
  auto vv = v.data();
  auto iv = input_pre.data();
  auto fv = forget_pre.data();

  for (std::size_t t = 0; t < steps; ++t) {
    std::copy_n(memories.begin() + t * mem, mem, memories.begin() + (t + 1) * mem);
    std::copy_n(normalizers.begin() + t * d, d, normalizers.begin() + (t + 1) * d);
    for (std::size_t hd = 0; hd < heads; ++hd) {
      const double ip = iv[t * heads + hd];
      const double fp = fv[t * heads + hd];
      if (!std::isfinite(ip) || !std::isfinite(fp)) {
        throw NumericError("mlstm_step: non-finite gate preactivation at step " + std::to_string(t) +
                           " (head " + std::to_string(hd) + ")");
      }
      const std::size_t col = t * d + hd * dh;
      trace[t * heads + hd] =
          head_step(memories.data() + (t + 1) * mem + hd * dh * dh,
                    normalizers.data() + (t + 1) * d + hd * dh, stabilizer[hd], qv.data() + col,
                    kv.data() + col, vv.data() + col, ip, fp, dh, out.data() + col);
    }
  }

  return detail::make_result(
      q.shape(), std::move(out), "mlstm_recurrence", {q, k, v, input_pre, forget_pre},
      [steps, d, heads, dh, mem, memories = std::move(memories),
       normalizers = std::move(normalizers), trace = std::move(trace)](
          const TensorImpl& self, std::span<const double> g,
          std::span<std::vector<double>* const> pg) {
        const auto& qv = self.parents[0]->data;
        const auto& kv = self.parents[1]->data;
        const auto& vv = self.parents[2]->data;
        const auto& iv = self.parents[3]->data;
        const auto& fv = self.parents[4]->data;
        const auto& hv = self.data;
        std::vector<double> dq(steps * d, 0.0), dk(steps * d, 0.0), dv(steps * d, 0.0);
        std::vector<double> di(steps * heads, 0.0), df(steps * heads, 0.0);

        std::vector<double> dmem(dh * dh);
        std::vector<double> dnorm(dh);
        for (std::size_t hd = 0; hd < heads; ++hd) {
          std::fill(dmem.begin(), dmem.end(), 0.0);
          std::fill(dnorm.begin(), dnorm.end(), 0.0);
          double dm_carry = 0.0;
          // Stabilizer values are rebuilt forward so max() branches match.
          std::vector<double> m_hist(steps + 1, 0.0);
          for (std::size_t t = 0; t < steps; ++t) {
            m_hist[t + 1] = std::max(fv[t * heads + hd] + m_hist[t], iv[t * heads + hd]);
          }
          for (std::size_t t = steps; t-- > 0;) {
            const StepOut& so = trace[t * heads + hd];
            const std::size_t col = t * d + hd * dh;
            const double* c_now = memories.data() + (t + 1) * mem + hd * dh * dh;
            const double* c_prev = memories.data() + t * mem + hd * dh * dh;
            const double* n_now = normalizers.data() + (t + 1) * d + hd * dh;
            const double* n_prev = normalizers.data() + t * d + hd * dh;
            const double* qt = qv.data() + col;
            const double* kt = kv.data() + col;
            const double* vt = vv.data() + col;
            const double* gh = g.data() + col;

            // readout h = u / denom with u = C q
            double dden = 0.0;
            for (std::size_t i = 0; i < dh; ++i) dden -= gh[i] * hv[col + i];
            dden /= so.denom;
            const double ds = std::abs(so.dot) > 1.0 ? dden * (so.dot > 0 ? 1.0 : -1.0) : 0.0;
            for (std::size_t i = 0; i < dh; ++i) {
              const double du = gh[i] / so.denom;
              for (std::size_t j = 0; j < dh; ++j) {
                dmem[i * dh + j] += du * qt[j];
                dq[col + j] += c_now[i * dh + j] * du;
              }
            }
            for (std::size_t j = 0; j < dh; ++j) {
              dq[col + j] += ds * n_now[j];
              dnorm[j] += ds * qt[j];
            }

            // C = f C_prev + i v k^T ; n = f n_prev + i k
            double dfg = 0.0;
            double dig = 0.0;
            for (std::size_t i = 0; i < dh; ++i) {
              double row_k = 0.0;
              for (std::size_t j = 0; j < dh; ++j) {
                const double dc = dmem[i * dh + j];
                dfg += dc * c_prev[i * dh + j];
                row_k += dc * kt[j];
                dk[col + j] += so.input_gate * dc * vt[i];
              }
              dig += row_k * vt[i];
              dv[col + i] += so.input_gate * row_k;
            }
            for (std::size_t j = 0; j < dh; ++j) {
              dfg += dnorm[j] * n_prev[j];
              dig += dnorm[j] * kt[j];
              dk[col + j] += so.input_gate * dnorm[j];
            }

            // gates: i = exp(ip - m), f = exp(fp + m_prev - m), m = max(fp + m_prev, ip)
            const double ip = iv[t * heads + hd];
            const double decayed = fv[t * heads + hd] + m_hist[t];
            double dm = dm_carry;
            double dip = dig * so.input_gate;
            dm -= dig * so.input_gate;
            double ddecayed = dfg * so.forget_gate;
            dm -= dfg * so.forget_gate;
            if (decayed >= ip) {
              ddecayed += dm;
            } else {
              dip += dm;
            }
            di[t * heads + hd] += dip;
            df[t * heads + hd] += ddecayed;
            dm_carry = ddecayed;

            for (auto& x : dmem) x *= so.forget_gate;
            for (auto& x : dnorm) x *= so.forget_gate;
          }
        }
        auto add_into = [](std::vector<double>* dst, const std::vector<double>& src) {
          if (!dst) return;
          for (std::size_t i = 0; i < src.size(); ++i) (*dst)[i] += src[i];
        };
        add_into(pg[0], dq);
        add_into(pg[1], dk);
        add_into(pg[2], dv);
        add_into(pg[3], di);
        add_into(pg[4], df);
      });
}

Tensor mlstm_cross(const Tensor& query_src, const Tensor& key_src, const Tensor& value_src,
                   const MLSTMParams& params) {
  params.validate();
  const std::size_t d = params.d_model();
  for (const Tensor* t : {&query_src, &key_src, &value_src}) {
    if (t->rank() != 2 || t->dim(1) != d || t->dim(0) != query_src.dim(0)) {
      throw ContractError("mlstm_cross: sources must share [T," + std::to_string(d) +
                          "], got " + to_string(query_src.shape()) + ", " +
                          to_string(key_src.shape()) + ", " + to_string(value_src.shape()));
    }
  }
  if (query_src.dim(0) == 0) throw ContractError("mlstm_cross: empty sequence");
  const double key_scale = 1.0 / std::sqrt(static_cast<double>(params.head_dim()));
  const Tensor q = matmul(query_src, params.w_q);
  const Tensor k = scale(matmul(key_src, params.w_k), key_scale);
  const Tensor v = matmul(value_src, params.w_v);
  const Tensor input_pre = linear(query_src, params.w_i, params.b_i);
  const Tensor forget_pre = log_sigmoid(linear(query_src, params.w_f, params.b_f));
  const Tensor mixed = mlstm_recurrence(q, k, v, input_pre, forget_pre, params.heads);
  const Tensor gate = sigmoid(linear(query_src, params.w_o, params.b_o));
  return mul(gate, mixed);
}

Tensor mlstm_self(const Tensor& x, const MLSTMParams& params) {
  return mlstm_cross(x, x, x, params);
}

// ---------------------------------------------------------------------------
// Closed form. Deliberately shares no code with the recurrent path above.

namespace {

std::vector<double> project(std::span<const double> x, std::size_t rows, std::size_t in,
                            const Tensor& w, const Tensor* bias) {
  const std::size_t out = w.dim(1);
  auto wv = w.data();
  std::vector<double> y(rows * out, 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t o = 0; o < out; ++o) {
      double acc = bias ? (*bias)[o] : 0.0;
      for (std::size_t i = 0; i < in; ++i) acc += x[r * in + i] * wv[i * out + o];
      y[r * out + o] = acc;
    }
  }
  return y;
}

}  // namespace

std::vector<double> mlstm_decay_weights(std::span<const double> input_pre,
                                        std::span<const double> forget_pre) {
  const std::size_t steps = input_pre.size();
  if (forget_pre.size() != steps) throw ContractError("mlstm_decay_weights: gate lengths differ");
  // cum[t] = sum_{u<=t} f_u (0-based, inclusive)
  std::vector<double> cum(steps);
  double run = 0.0;
  for (std::size_t t = 0; t < steps; ++t) cum[t] = (run += forget_pre[t]);
  std::vector<double> w(steps * steps, 0.0);
  for (std::size_t t = 0; t < steps; ++t) {
    // Unrolled stabilizer: the zero initial state contributes cum[t].
    double m = cum[t];
    for (std::size_t s = 0; s <= t; ++s) m = std::max(m, input_pre[s] + cum[t] - cum[s]);
    for (std::size_t s = 0; s <= t; ++s) w[t * steps + s] = std::exp(input_pre[s] + cum[t] - cum[s] - m);
  }
  return w;
}

Tensor mlstm_parallel(const Tensor& query_src, const Tensor& key_src, const Tensor& value_src,
                      const MLSTMParams& params) {
  params.validate();
  const std::size_t steps = query_src.dim(0);
  const std::size_t d = params.d_model();
  const std::size_t heads = params.heads;
  const std::size_t dh = params.head_dim();
  if (key_src.shape() != query_src.shape() || value_src.shape() != query_src.shape() ||
      query_src.dim(1) != d) {
    throw ContractError("mlstm_parallel: sources must share [T,d]");
  }
  auto q = project(query_src.data(), steps, d, params.w_q, nullptr);
  auto k = project(key_src.data(), steps, d, params.w_k, nullptr);
  auto v = project(value_src.data(), steps, d, params.w_v, nullptr);
  const double key_scale = 1.0 / std::sqrt(static_cast<double>(dh));
  for (auto& x : k) x *= key_scale;
  auto ig = project(query_src.data(), steps, d, params.w_i, &params.b_i);
  auto fg = project(query_src.data(), steps, d, params.w_f, &params.b_f);
  for (auto& x : fg) x = -std::log1p(std::exp(-x));  // log sigmoid
  auto og = project(query_src.data(), steps, d, params.w_o, &params.b_o);

  std::vector<double> out(steps * d, 0.0);
  std::vector<double> ih(steps), fh(steps);
  for (std::size_t hd = 0; hd < heads; ++hd) {
    for (std::size_t t = 0; t < steps; ++t) {
      ih[t] = ig[t * heads + hd];
      fh[t] = fg[t * heads + hd];
    }
    const auto w = mlstm_decay_weights(ih, fh);
    for (std::size_t t = 0; t < steps; ++t) {
      std::vector<double> num(dh, 0.0);
      double den = 0.0;
      for (std::size_t s = 0; s <= t; ++s) {
        double kq = 0.0;
        for (std::size_t j = 0; j < dh; ++j) kq += k[s * d + hd * dh + j] * q[t * d + hd * dh + j];
        const double a = w[t * steps + s] * kq;
        den += a;
        for (std::size_t i = 0; i < dh; ++i) num[i] += a * v[s * d + hd * dh + i];
      }
      const double denom = std::max(std::abs(den), 1.0);
      for (std::size_t i = 0; i < dh; ++i) {
        const double gate = 1.0 / (1.0 + std::exp(-og[t * d + hd * dh + i]));
        out[t * d + hd * dh + i] = gate * num[i] / denom;
      }
    }
  }
  return Tensor({steps, d}, std::move(out));
}

}  // namespace mega
