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

#include "mega/trainer.hpp"

#include <omp.h>

#include <atomic>
#include <cmath>
#include <exception>
#include <sstream>

#include "mega/init.hpp"
#include "mega/ops.hpp"

namespace mega {

namespace {

std::atomic<std::size_t> g_clamped{0};

// Runs body(i) for i in [0, n) across threads; rethrows the first failure.
template <typename Body>
void parallel_for(std::size_t n, Body body) {
  std::exception_ptr error;
  const auto count = static_cast<std::ptrdiff_t>(n);
#pragma omp parallel for schedule(dynamic, 1)
  for (std::ptrdiff_t i = 0; i < count; ++i) {
    try {
      body(static_cast<std::size_t>(i));
    } catch (...) {
#pragma omp critical(mega_parallel_error)
      if (!error) error = std::current_exception();
    }
  }
  if (error) std::rethrow_exception(error);
}

std::map<std::string, Tensor> copy_params(const ParameterSet& set) {
  std::map<std::string, Tensor> out;
  for (const auto& e : set.entries()) out.emplace(e.name, e.tensor.detach());
  return out;
}

std::string rng_state(const std::mt19937_64& rng) {
  std::ostringstream os;
  os << rng;
  return os.str();
}

}  // namespace

Tensor cross_entropy(const Tensor& probs, Polarity gold) {
  const auto g = static_cast<std::size_t>(gold);
  if (g >= probs.size()) throw ContractError("cross_entropy: gold class outside probability vector");
  const double p = probs[g];
  const bool clamped = p < kProbabilityFloor;
  if (clamped) g_clamped.fetch_add(1, std::memory_order_relaxed);
  const double value = -std::log(std::max(p, kProbabilityFloor));
  return detail::make_result(Shape{}, {value}, "cross_entropy", {probs},
                             [g, clamped](const TensorImpl& self, std::span<const double> grad,
                                          std::span<std::vector<double>* const> pg) {
                               if (clamped) return;
                               (*pg[0])[g] -= grad[0] / self.parents[0]->data[g];
                             });
}

Tensor cross_entropy(std::span<const Tensor> probs, std::span<const Polarity> gold) {
  if (probs.size() != gold.size() || probs.empty()) {
    throw ContractError("cross_entropy: need one gold label per probability vector");
  }
  Tensor total = cross_entropy(probs[0], gold[0]);
  for (std::size_t i = 1; i < probs.size(); ++i) total = add(total, cross_entropy(probs[i], gold[i]));
  return scale(total, 1.0 / static_cast<double>(probs.size()));
}

std::size_t clamped_probability_count() { return g_clamped.load(); }

Evaluation evaluate(const MegaModel& model, std::span<const EncodedExample> examples) {
  Evaluation ev;
  ev.predictions.resize(examples.size());
  std::vector<double> losses(examples.size());
  parallel_for(examples.size(), [&](std::size_t i) {
    NoGradGuard guard;
    const auto& ex = examples[i];
    const Tensor probs = model.forward(ex);
    auto& p = ev.predictions[i];
    p.source_id = ex.source_id;
    p.aspect = ex.aspect;
    p.gold = ex.label;
    p.predicted = static_cast<Polarity>(argmax(probs.data()));
    for (std::size_t c = 0; c < kPolarityCount; ++c) p.probs[c] = probs[c];
    losses[i] = cross_entropy(probs, ex.label).item();
  });
  std::vector<Polarity> gold, pred;
  for (const auto& p : ev.predictions) {
    gold.push_back(p.gold);
    pred.push_back(p.predicted);
  }
  ev.metrics = compute_metrics(gold, pred);
  double total = 0.0;
  for (double l : losses) total += l;
  ev.mean_loss = examples.empty() ? 0.0 : total / static_cast<double>(examples.size());
  return ev;
}

nlohmann::json to_json(const Metrics& m) {
  nlohmann::json j;
  j["total"] = m.total;
  j["accuracy"] = m.accuracy;
  j["macro_f1"] = m.macro_f1;
  j["confusion"] = m.confusion;
  for (std::size_t c = 0; c < kPolarityCount; ++c) {
    const auto& s = m.per_class[c];
    j["per_class"][std::string(polarity_name(static_cast<Polarity>(c)))] = {
        {"precision", s.precision}, {"recall", s.recall}, {"f1", s.f1}};
  }
  return j;
}

nlohmann::json to_json(const EpochRecord& r) {
  return {{"epoch", r.epoch}, {"steps", r.steps}, {"loss", r.loss},
          {"acc", r.metrics.accuracy}, {"macro_f1", r.metrics.macro_f1}};
}

Checkpoint model_checkpoint(const MegaModel& model, const RunConfig& config) {
  Checkpoint ck;
  ck.meta["kind"] = "model";
  ck.meta["config"] = config.to_map();
  ck.meta["vocab"] = model.vocab().tokens();
  const ParameterSet params = model.parameters();
  for (const auto& e : params.entries()) ck.tensors.emplace("param/" + e.name, e.tensor.detach());
  return ck;
}

RunConfig config_from_checkpoint(const Checkpoint& checkpoint) {
  try {
    return RunConfig::from_map(checkpoint.meta.at("config").get<std::map<std::string, std::string>>());
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("checkpoint has no usable config: ") + e.what());
  }
}

MegaModel model_from_checkpoint(const Checkpoint& checkpoint) {
  const RunConfig cfg = config_from_checkpoint(checkpoint);
  Vocab vocab;
  try {
    vocab = Vocab::from_tokens(checkpoint.meta.at("vocab").get<std::vector<std::string>>());
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("checkpoint has no vocabulary: ") + e.what());
  }
  auto it = checkpoint.tensors.find("param/embedding");
  if (it == checkpoint.tensors.end()) throw CheckpointError("checkpoint lacks param/embedding");
  MegaModel model(cfg.model, std::move(vocab), it->second, cfg.train.seed);
  std::map<std::string, Tensor> values;
  for (const auto& [name, t] : checkpoint.tensors) {
    if (name.rfind("param/", 0) == 0) values.emplace(name.substr(6), t);
  }
  model.load(values);
  return model;
}

Trainer::Trainer(MegaModel& model, RunConfig config)
    : model_(model),
      config_(std::move(config)),
      params_(model.trainable()),
      adam_(config_.train.adam),
      shuffle_rng_(config_.train.seed) {
  if (config_.train.batch_size == 0) throw ContractError("trainer: batch_size must be >= 1");
}

double Trainer::batch_gradient(std::span<const EncodedExample> batch, std::uint64_t dropout_seed,
                               GradientMap& grads) const {
  if (batch.empty()) throw ContractError("trainer: empty batch");
  const std::size_t n = batch.size();
  std::vector<GradientMap> parts(n);
  std::vector<double> losses(n);
  parallel_for(n, [&](std::size_t i) {
    ForwardOptions opts{true, mix_seed(dropout_seed + i)};
    const Tensor loss = cross_entropy(model_.forward(batch[i], opts), batch[i].label);
    losses[i] = loss.item();
    parts[i] = backward(loss, params_);
  });
  const double inv = 1.0 / static_cast<double>(n);
  grads.clear();
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    accumulate(grads, parts[i], inv);
    total += losses[i];
  }
  return total * inv;
}

double Trainer::step(std::span<const EncodedExample> batch) {
  GradientMap grads;
  const std::uint64_t seed = mix_seed(config_.train.seed ^ mix_seed(adam_.steps() + adam_.skipped() + 1));
  const double loss = batch_gradient(batch, seed, grads);
  adam_.step(params_, grads);
  return loss;
}

std::vector<EpochRecord> Trainer::fit(std::span<const EncodedExample> train,
                                      std::span<const EncodedExample> eval,
                                      const EpochCallback& on_epoch) {
  const auto& tc = config_.train;
  while (!finished_ && epoch_ < tc.max_epochs) {
    ++epoch_;
    const auto batches = make_batches(train, tc.batch_size, shuffle_rng_());
    double loss_sum = 0.0;
    std::size_t seen = 0;
    bool step_limit = false;
    for (const auto& batch : batches) {
      if (tc.max_steps && adam_.steps() >= tc.max_steps) {
        step_limit = true;
        break;
      }
      std::vector<EncodedExample> rows;
      for (std::size_t b = 0; b < batch.size(); ++b) rows.push_back(train[batch.example_index[b]]);
      loss_sum += step(rows) * static_cast<double>(rows.size());
      seen += rows.size();
    }
    if (tc.max_steps && adam_.steps() >= tc.max_steps) step_limit = true;

    EpochRecord rec;
    rec.epoch = epoch_;
    rec.steps = adam_.steps();
    rec.loss = seen ? loss_sum / static_cast<double>(seen) : 0.0;
    rec.metrics = evaluate(model_, eval).metrics;
    if (rec.metrics.macro_f1 > best_f1_) {
      best_f1_ = rec.metrics.macro_f1;
      best_epoch_ = epoch_;
      best_ = copy_params(params_);
      since_best_ = 0;
    } else {
      ++since_best_;
    }
    history_.push_back(rec);
    // The epoch budget is not latched so a resumed run may extend it.
    if (since_best_ >= tc.patience || step_limit) finished_ = true;
    if (on_epoch) on_epoch(rec, *this);
  }
  return history_;
}

Checkpoint Trainer::training_checkpoint() const {
  Checkpoint ck = model_checkpoint(model_, config_);
  ck.meta["kind"] = "training";
  ck.meta["epoch"] = epoch_;
  nlohmann::json hist = nlohmann::json::array();
  for (const auto& r : history_) {
    auto j = to_json(r);
    j["metrics"] = to_json(r.metrics);
    hist.push_back(j);
  }
  ck.meta["history"] = hist;
  ck.meta["trainer"] = {{"adam_steps", adam_.steps()},
                        {"adam_skipped", adam_.skipped()},
                        {"rng", rng_state(shuffle_rng_)},
                        {"since_best", since_best_},
                        {"finished", finished_},
                        {"best_f1", best_f1_},
                        {"best_epoch", best_epoch_}};
  for (const auto& [name, m] : adam_.first_moments()) {
    ck.tensors.emplace("adam.m/" + name, Tensor({m.size()}, m));
  }
  for (const auto& [name, v] : adam_.second_moments()) {
    ck.tensors.emplace("adam.v/" + name, Tensor({v.size()}, v));
  }
  for (const auto& [name, t] : best_) ck.tensors.emplace("best/" + name, t);
  return ck;
}

namespace {

Metrics metrics_from_json(const nlohmann::json& j) {
  Metrics m;
  m.total = j.at("total").get<std::size_t>();
  m.accuracy = j.at("accuracy").get<double>();
  m.macro_f1 = j.at("macro_f1").get<double>();
  m.confusion = j.at("confusion").get<decltype(m.confusion)>();
  for (std::size_t c = 0; c < kPolarityCount; ++c) {
    const auto& s = j.at("per_class").at(std::string(polarity_name(static_cast<Polarity>(c))));
    m.per_class[c] = {s.at("precision").get<double>(), s.at("recall").get<double>(), s.at("f1").get<double>()};
  }
  return m;
}

}  // namespace

void Trainer::restore(const Checkpoint& ck) {
  try {
    if (ck.meta.at("kind").get<std::string>() != "training") {
      throw CheckpointError("checkpoint is not a training checkpoint");
    }
    std::map<std::string, Tensor> values;
    std::map<std::string, std::vector<double>> m, v;
    best_.clear();
    for (const auto& [name, t] : ck.tensors) {
      std::vector<double> data(t.data().begin(), t.data().end());
      if (name.rfind("param/", 0) == 0) values.emplace(name.substr(6), t);
      else if (name.rfind("adam.m/", 0) == 0) m.emplace(name.substr(7), std::move(data));
      else if (name.rfind("adam.v/", 0) == 0) v.emplace(name.substr(7), std::move(data));
      else if (name.rfind("best/", 0) == 0) best_.emplace(name.substr(5), t.detach());
    }
    model_.load(values);
    const auto& tr = ck.meta.at("trainer");
    adam_.restore(tr.at("adam_steps").get<std::size_t>(), tr.at("adam_skipped").get<std::size_t>(),
                  std::move(m), std::move(v));
    std::istringstream rng(tr.at("rng").get<std::string>());
    rng >> shuffle_rng_;
    since_best_ = tr.at("since_best").get<std::size_t>();
    finished_ = tr.at("finished").get<bool>();
    best_f1_ = tr.at("best_f1").get<double>();
    best_epoch_ = tr.at("best_epoch").get<std::size_t>();
    epoch_ = ck.meta.at("epoch").get<std::size_t>();
    history_.clear();
    for (const auto& j : ck.meta.at("history")) {
      EpochRecord r;
      r.epoch = j.at("epoch").get<std::size_t>();
      r.steps = j.at("steps").get<std::size_t>();
      r.loss = j.at("loss").get<double>();
      r.metrics = metrics_from_json(j.at("metrics"));
      history_.push_back(r);
    }
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("corrupt training state: ") + e.what());
  }
}

Checkpoint Trainer::best_checkpoint() const {
  Checkpoint ck = model_checkpoint(model_, config_);
  for (const auto& [name, t] : best_) ck.tensors.insert_or_assign("param/" + name, t);
  ck.meta["epoch"] = best_epoch_;
  ck.meta["best_macro_f1"] = best_f1_;
  return ck;
}

}  // namespace mega
