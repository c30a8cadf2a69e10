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

#include "mega/ops.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "mega/kernels.hpp"

namespace mega {

namespace {

using kernels::GemmDims;
using kernels::Trans;

std::vector<double> values(const Tensor& t) { return {t.data().begin(), t.data().end()}; }

struct BatchPlan {
  Shape out_batch;
  std::vector<std::size_t> a_index;  // batch slot of A for each output batch
  std::vector<std::size_t> b_index;
};

BatchPlan plan_batches(const Shape& a_batch, const Shape& b_batch, const Shape& a_full,
                       const Shape& b_full) {
  const std::size_t rank = std::max(a_batch.size(), b_batch.size());
  auto padded = [rank](const Shape& s) {
    Shape p(rank - s.size(), 1);
    p.insert(p.end(), s.begin(), s.end());
    return p;
  };
  const Shape pa = padded(a_batch);
  const Shape pb = padded(b_batch);
  BatchPlan plan;
  plan.out_batch.resize(rank);
  for (std::size_t i = 0; i < rank; ++i) {
    if (pa[i] != pb[i] && pa[i] != 1 && pb[i] != 1) {
      throw ContractError("matmul: batch extents not broadcastable: " + to_string(a_full) +
                          " x " + to_string(b_full));
    }
    plan.out_batch[i] = std::max(pa[i], pb[i]);
  }
  const std::size_t total = numel(plan.out_batch);
  plan.a_index.resize(total);
  plan.b_index.resize(total);
  std::vector<std::size_t> idx(rank, 0);
  for (std::size_t flat = 0; flat < total; ++flat) {
    std::size_t ai = 0;
    std::size_t bi = 0;
    for (std::size_t d = 0; d < rank; ++d) {
      ai = ai * pa[d] + (pa[d] == 1 ? 0 : idx[d]);
      bi = bi * pb[d] + (pb[d] == 1 ? 0 : idx[d]);
    }
    plan.a_index[flat] = ai;
    plan.b_index[flat] = bi;
    for (std::size_t d = rank; d-- > 0;) {
      if (++idx[d] < plan.out_batch[d]) break;
      idx[d] = 0;
    }
  }
  return plan;
}

bool is_suffix(const Shape& small, const Shape& big) {
  if (small.size() > big.size()) return false;
  return std::equal(small.rbegin(), small.rend(), big.rbegin());
}

enum class BinaryKind { kAdd, kSub, kMul };

Tensor binary(const Tensor& a, const Tensor& b, BinaryKind kind, std::string_view name) {
  bool a_is_big = true;
  if (a.shape() != b.shape()) {
    if (is_suffix(b.shape(), a.shape())) {
      a_is_big = true;
    } else if (is_suffix(a.shape(), b.shape())) {
      a_is_big = false;
    } else {
      throw ContractError(std::string(name) + ": shapes " + to_string(a.shape()) + " and " +
                          to_string(b.shape()) + " are not broadcast-compatible");
    }
  }
  const Shape out_shape = a_is_big ? a.shape() : b.shape();
  const std::size_t n = numel(out_shape);
  const std::size_t na = a.size();
  const std::size_t nb = b.size();
  auto av = a.data();
  auto bv = b.data();
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double x = av[i % na];
    const double y = bv[i % nb];
    switch (kind) {
      case BinaryKind::kAdd: out[i] = x + y; break;
      case BinaryKind::kSub: out[i] = x - y; break;
      case BinaryKind::kMul: out[i] = x * y; break;
    }
  }
  return detail::make_result(
      out_shape, std::move(out), name, {a, b},
      [kind, na, nb](const TensorImpl& self, std::span<const double> g,
                     std::span<std::vector<double>* const> pg) {
        const auto& xa = self.parents[0]->data;
        const auto& xb = self.parents[1]->data;
        for (std::size_t i = 0; i < g.size(); ++i) {
          double da = g[i];
          double db = g[i];
          if (kind == BinaryKind::kSub) db = -g[i];
          if (kind == BinaryKind::kMul) {
            da = g[i] * xb[i % nb];
            db = g[i] * xa[i % na];
          }
          if (pg[0]) (*pg[0])[i % na] += da;
          if (pg[1]) (*pg[1])[i % nb] += db;
        }
      });
}

template <typename Fwd, typename Deriv>
Tensor unary(const Tensor& x, std::string_view name, Fwd fwd, Deriv deriv) {
  auto xv = x.data();
  std::vector<double> out(xv.size());
  for (std::size_t i = 0; i < xv.size(); ++i) out[i] = fwd(xv[i]);
  return detail::make_result(
      x.shape(), std::move(out), name, {x},
      [deriv](const TensorImpl& self, std::span<const double> g,
              std::span<std::vector<double>* const> pg) {
        const auto& in = self.parents[0]->data;
        auto& dx = *pg[0];
        for (std::size_t i = 0; i < g.size(); ++i) dx[i] += g[i] * deriv(in[i], self.data[i]);
      });
}

double sigmoid_scalar(double v) {
  if (v >= 0) return 1.0 / (1.0 + std::exp(-v));
  const double e = std::exp(v);
  return e / (1.0 + e);
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() < 2 || b.rank() < 2) {
    throw ContractError("matmul: operands need rank >= 2, got " + to_string(a.shape()) + " x " +
                        to_string(b.shape()));
  }
  const std::size_t p = a.shape()[a.rank() - 2];
  const std::size_t q = a.shape()[a.rank() - 1];
  const std::size_t q2 = b.shape()[b.rank() - 2];
  const std::size_t r = b.shape()[b.rank() - 1];
  if (q != q2) {
    throw ContractError("matmul: inner extents differ: " + to_string(a.shape()) + " x " +
                        to_string(b.shape()));
  }
  const Shape a_batch(a.shape().begin(), a.shape().end() - 2);
  const Shape b_batch(b.shape().begin(), b.shape().end() - 2);
  BatchPlan plan = plan_batches(a_batch, b_batch, a.shape(), b.shape());
  Shape out_shape = plan.out_batch;
  out_shape.push_back(p);
  out_shape.push_back(r);

  const GemmDims dims{p, q, r};
  std::vector<double> out(numel(out_shape));
  auto av = a.data();
  auto bv = b.data();
  for (std::size_t s = 0; s < plan.a_index.size(); ++s) {
    kernels::parallel::gemm(Trans::kNo, Trans::kNo, dims, av.subspan(plan.a_index[s] * p * q, p * q),
                            bv.subspan(plan.b_index[s] * q * r, q * r),
                            std::span<double>(out).subspan(s * p * r, p * r), false);
  }
  return detail::make_result(
      std::move(out_shape), std::move(out), "matmul", {a, b},
      [plan = std::move(plan), p, q, r](const TensorImpl& self, std::span<const double> g,
                                        std::span<std::vector<double>* const> pg) {
        std::span<const double> av = self.parents[0]->data;
        std::span<const double> bv = self.parents[1]->data;
        const double corrupt = 1.0 + testing::adjoint_corruption();
        std::vector<double> scaled;
        if (corrupt != 1.0) {
          scaled.assign(g.begin(), g.end());
          for (auto& v : scaled) v *= corrupt;
          g = scaled;
        }
        for (std::size_t s = 0; s < plan.a_index.size(); ++s) {
          auto gs = g.subspan(s * p * r, p * r);
          if (pg[0]) {
            // dA = dC B^T
            kernels::parallel::gemm(Trans::kNo, Trans::kYes, {p, r, q}, gs,
                                    bv.subspan(plan.b_index[s] * q * r, q * r),
                                    std::span<double>(*pg[0]).subspan(plan.a_index[s] * p * q, p * q),
                                    true);
          }
          if (pg[1]) {
            // dB = A^T dC
            kernels::parallel::gemm(Trans::kYes, Trans::kNo, {q, p, r},
                                    av.subspan(plan.a_index[s] * p * q, p * q), gs,
                                    std::span<double>(*pg[1]).subspan(plan.b_index[s] * q * r, q * r),
                                    true);
          }
        }
      });
}

Tensor add(const Tensor& a, const Tensor& b) { return binary(a, b, BinaryKind::kAdd, "add"); }
Tensor sub(const Tensor& a, const Tensor& b) { return binary(a, b, BinaryKind::kSub, "sub"); }
Tensor mul(const Tensor& a, const Tensor& b) { return binary(a, b, BinaryKind::kMul, "mul"); }

Tensor scale(const Tensor& x, double factor) {
  return unary(
      x, "scale", [factor](double v) { return v * factor; },
      [factor](double, double) { return factor; });
}

Tensor silu(const Tensor& x) {
  return unary(
      x, "silu", [](double v) { return v * sigmoid_scalar(v); },
      [](double in, double) {
        const double s = sigmoid_scalar(in);
        return s * (1.0 + in * (1.0 - s));
      });
}

Tensor tanh(const Tensor& x) {
  return unary(
      x, "tanh", [](double v) { return std::tanh(v); },
      [](double, double out) { return 1.0 - out * out; });
}

Tensor sigmoid(const Tensor& x) {
  return unary(
      x, "sigmoid", sigmoid_scalar, [](double, double out) { return out * (1.0 - out); });
}

Tensor log_sigmoid(const Tensor& x) {
  return unary(
      x, "log_sigmoid",
      [](double v) { return std::min(v, 0.0) - std::log1p(std::exp(-std::abs(v))); },
      [](double in, double) { return sigmoid_scalar(-in); });
}

Tensor exp(const Tensor& x) {
  return unary(
      x, "exp", [](double v) { return std::exp(v); }, [](double, double out) { return out; });
}

Tensor log(const Tensor& x) {
  return unary(
      x, "log", [](double v) { return std::log(v); }, [](double in, double) { return 1.0 / in; });
}

Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias) {
  return add(matmul(x, weight), bias);
}

Tensor concat_lastdim(std::initializer_list<Tensor> parts) {
  return concat_lastdim(std::span<const Tensor>(parts.begin(), parts.size()));
}

Tensor concat_lastdim(std::span<const Tensor> parts) {
  if (parts.empty()) throw ContractError("concat_lastdim: no operands");
  const Shape& first = parts[0].shape();
  if (first.empty()) throw ContractError("concat_lastdim: scalar operands have no last axis");
  const Shape lead(first.begin(), first.end() - 1);
  std::vector<std::size_t> widths;
  std::size_t total = 0;
  for (const auto& t : parts) {
    if (t.rank() != first.size() || !std::equal(lead.begin(), lead.end(), t.shape().begin())) {
      throw ContractError("concat_lastdim: " + to_string(t.shape()) + " does not match " +
                          to_string(first) + " outside the last axis");
    }
    widths.push_back(t.shape().back());
    total += t.shape().back();
  }
  const std::size_t rows = numel(lead);
  std::vector<double> out(rows * total);
  std::size_t offset = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    auto src = parts[k].data();
    for (std::size_t row = 0; row < rows; ++row) {
      std::copy_n(src.begin() + row * widths[k], widths[k], out.begin() + row * total + offset);
    }
    offset += widths[k];
  }
  Shape out_shape = lead;
  out_shape.push_back(total);
  std::vector<Tensor> parents(parts.begin(), parts.end());
  return detail::make_result(
      std::move(out_shape), std::move(out), "concat_lastdim", std::move(parents),
      [widths, rows, total](const TensorImpl&, std::span<const double> g,
                            std::span<std::vector<double>* const> pg) {
        std::size_t offset = 0;
        for (std::size_t k = 0; k < widths.size(); ++k) {
          if (pg[k]) {
            for (std::size_t row = 0; row < rows; ++row) {
              for (std::size_t j = 0; j < widths[k]; ++j) {
                (*pg[k])[row * widths[k] + j] += g[row * total + offset + j];
              }
            }
          }
          offset += widths[k];
        }
      });
}

Tensor mean_over_positions(const Tensor& x, std::span<const std::size_t> positions) {
  if (x.rank() != 2) throw ContractError("mean_over_positions: expected [T,d], got " + to_string(x.shape()));
  if (positions.empty()) throw ContractError("mean_over_positions: empty position mask");
  const std::size_t steps = x.dim(0);
  const std::size_t width = x.dim(1);
  for (auto p : positions) {
    if (p >= steps) {
      throw ContractError("mean_over_positions: position " + std::to_string(p) +
                          " outside sequence of length " + std::to_string(steps));
    }
  }
  std::vector<double> out(width, 0.0);
  auto xv = x.data();
  for (auto p : positions) {
    for (std::size_t j = 0; j < width; ++j) out[j] += xv[p * width + j];
  }
  const double inv = 1.0 / static_cast<double>(positions.size());
  for (auto& v : out) v *= inv;
  std::vector<std::size_t> pos(positions.begin(), positions.end());
  return detail::make_result(
      Shape{width}, std::move(out), "mean_over_positions", {x},
      [pos = std::move(pos), width, inv](const TensorImpl&, std::span<const double> g,
                                         std::span<std::vector<double>* const> pg) {
        for (auto p : pos) {
          for (std::size_t j = 0; j < width; ++j) (*pg[0])[p * width + j] += inv * g[j];
        }
      });
}

Tensor softmax_lastdim(const Tensor& x) {
  if (x.rank() == 0 || x.shape().back() == 0) {
    throw ContractError("softmax_lastdim: needs a non-empty last axis, got " + to_string(x.shape()));
  }
  const std::size_t c = x.shape().back();
  const std::size_t rows = x.size() / c;
  auto xv = x.data();
  std::vector<double> out(x.size());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* in = xv.data() + r * c;
    double* o = out.data() + r * c;
    const double mx = *std::max_element(in, in + c);
    double z = 0.0;
    for (std::size_t j = 0; j < c; ++j) {
      o[j] = std::exp(in[j] - mx);
      z += o[j];
    }
    for (std::size_t j = 0; j < c; ++j) o[j] /= z;
  }
  return detail::make_result(
      x.shape(), std::move(out), "softmax_lastdim", {x},
      [c, rows](const TensorImpl& self, std::span<const double> g,
                std::span<std::vector<double>* const> pg) {
        const auto& y = self.data;
        for (std::size_t r = 0; r < rows; ++r) {
          double dot = 0.0;
          for (std::size_t j = 0; j < c; ++j) dot += g[r * c + j] * y[r * c + j];
          for (std::size_t j = 0; j < c; ++j) {
            (*pg[0])[r * c + j] += y[r * c + j] * (g[r * c + j] - dot);
          }
        }
      });
}

Tensor causal_conv1d(const Tensor& x, const Tensor& kernel, const Tensor& bias) {
  if (x.rank() != 2) throw ContractError("causal_conv1d: x must be [T,d], got " + to_string(x.shape()));
  if (kernel.rank() != 2 || kernel.dim(0) == 0) {
    throw ContractError("causal_conv1d: kernel must be [k,d] with k >= 1, got " +
                        to_string(kernel.shape()));
  }
  const std::size_t steps = x.dim(0);
  const std::size_t channels = x.dim(1);
  const std::size_t width = kernel.dim(0);
  if (kernel.dim(1) != channels || bias.shape() != Shape{channels}) {
    throw ContractError("causal_conv1d: channel mismatch: x " + to_string(x.shape()) + ", kernel " +
                        to_string(kernel.shape()) + ", bias " + to_string(bias.shape()));
  }
  std::vector<double> out(steps * channels);
  kernels::parallel::causal_conv1d(x.data(), kernel.data(), bias.data(), steps, channels, width, out);
  return detail::make_result(
      x.shape(), std::move(out), "causal_conv1d", {x, kernel, bias},
      [steps, channels, width](const TensorImpl& self, std::span<const double> g,
                               std::span<std::vector<double>* const> pg) {
        const auto& xv = self.parents[0]->data;
        const auto& kv = self.parents[1]->data;
        for (std::size_t t = 0; t < steps; ++t) {
          for (std::size_t c = 0; c < channels; ++c) {
            const double gt = g[t * channels + c];
            if (pg[2]) (*pg[2])[c] += gt;
            for (std::size_t j = 0; j < width; ++j) {
              if (t + j + 1 < width) continue;
              const std::size_t src = t + j + 1 - width;
              if (pg[0]) (*pg[0])[src * channels + c] += kv[j * channels + c] * gt;
              if (pg[1]) (*pg[1])[j * channels + c] += xv[src * channels + c] * gt;
            }
          }
        }
      });
}

Tensor permute_rows(const Tensor& x, std::span<const std::size_t> order) {
  if (x.rank() != 2) throw ContractError("permute_rows: expected [T,d], got " + to_string(x.shape()));
  const std::size_t steps = x.dim(0);
  const std::size_t width = x.dim(1);
  if (order.size() != steps) {
    throw ContractError("permute_rows: order has " + std::to_string(order.size()) +
                        " entries for " + std::to_string(steps) + " rows");
  }
  std::vector<bool> seen(steps, false);
  for (auto o : order) {
    if (o >= steps || seen[o]) throw ContractError("permute_rows: order is not a permutation");
    seen[o] = true;
  }
  auto xv = x.data();
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < steps; ++i) {
    std::copy_n(xv.begin() + order[i] * width, width, out.begin() + i * width);
  }
  std::vector<std::size_t> perm(order.begin(), order.end());
  return detail::make_result(
      x.shape(), std::move(out), "permute_rows", {x},
      [perm = std::move(perm), width](const TensorImpl&, std::span<const double> g,
                                      std::span<std::vector<double>* const> pg) {
        for (std::size_t i = 0; i < perm.size(); ++i) {
          for (std::size_t j = 0; j < width; ++j) (*pg[0])[perm[i] * width + j] += g[i * width + j];
        }
      });
}

Tensor gather_rows(const Tensor& table, std::span<const std::size_t> indices) {
  if (table.rank() != 2) throw ContractError("gather_rows: table must be [V,d], got " + to_string(table.shape()));
  const std::size_t rows = table.dim(0);
  const std::size_t width = table.dim(1);
  auto tv = table.data();
  std::vector<double> out(indices.size() * width);
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] >= rows) {
      throw ContractError("gather_rows: index " + std::to_string(indices[i]) + " outside table of " +
                          std::to_string(rows) + " rows");
    }
    std::copy_n(tv.begin() + indices[i] * width, width, out.begin() + i * width);
  }
  std::vector<std::size_t> idx(indices.begin(), indices.end());
  return detail::make_result(
      Shape{indices.size(), width}, std::move(out), "gather_rows", {table},
      [idx = std::move(idx), width](const TensorImpl&, std::span<const double> g,
                                    std::span<std::vector<double>* const> pg) {
        for (std::size_t i = 0; i < idx.size(); ++i) {
          for (std::size_t j = 0; j < width; ++j) (*pg[0])[idx[i] * width + j] += g[i * width + j];
        }
      });
}

Tensor reshape(const Tensor& x, Shape shape) {
  if (numel(shape) != x.size()) {
    throw ContractError("reshape: " + to_string(x.shape()) + " -> " + to_string(shape) +
                        " changes the element count");
  }
  return detail::make_result(std::move(shape), values(x), "reshape", {x},
                             [](const TensorImpl&, std::span<const double> g,
                                std::span<std::vector<double>* const> pg) {
                               for (std::size_t i = 0; i < g.size(); ++i) (*pg[0])[i] += g[i];
                             });
}

Tensor sum(const Tensor& x) {
  double total = 0.0;
  for (double v : x.data()) total += v;
  return detail::make_result(Shape{}, {total}, "sum", {x},
                             [](const TensorImpl&, std::span<const double> g,
                                std::span<std::vector<double>* const> pg) {
                               for (auto& v : *pg[0]) v += g[0];
                             });
}

Tensor pick(const Tensor& x, std::size_t flat_index) {
  if (flat_index >= x.size()) {
    throw ContractError("pick: index " + std::to_string(flat_index) + " outside tensor of " +
                        std::to_string(x.size()) + " elements");
  }
  return detail::make_result(Shape{}, {x[flat_index]}, "pick", {x},
                             [flat_index](const TensorImpl&, std::span<const double> g,
                                          std::span<std::vector<double>* const> pg) {
                               (*pg[0])[flat_index] += g[0];
                             });
}

Tensor dropout(const Tensor& x, double rate, std::uint64_t seed) {
  if (rate < 0.0 || rate >= 1.0) throw ContractError("dropout: rate must be in [0,1)");
  if (rate == 0.0) return x;
  std::mt19937_64 gen(seed);
  const double keep_scale = 1.0 / (1.0 - rate);
  std::vector<double> mask(x.size());
  for (auto& m : mask) {
    const double u = static_cast<double>(gen() >> 11) * 0x1.0p-53;
    m = u < rate ? 0.0 : keep_scale;
  }
  auto xv = x.data();
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = xv[i] * mask[i];
  return detail::make_result(x.shape(), std::move(out), "dropout", {x},
                             [mask = std::move(mask)](const TensorImpl&, std::span<const double> g,
                                                      std::span<std::vector<double>* const> pg) {
                               for (std::size_t i = 0; i < g.size(); ++i) (*pg[0])[i] += g[i] * mask[i];
                             });
}

}  // namespace mega
