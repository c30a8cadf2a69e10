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

#include <array>
#include <functional>
#include <map>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "mega/checkpoint.hpp"
#include "mega/data.hpp"
#include "mega/mega_model.hpp"
#include "mega/metrics.hpp"
#include "mega/optimizer.hpp"
#include "mega/run_config.hpp"

namespace mega {

inline constexpr double kProbabilityFloor = 1e-12;

/// -log probs[gold]; probabilities below 1e-12 are clamped (and counted).
Tensor cross_entropy(const Tensor& probs, Polarity gold);
/// Mean of the per-example losses.
Tensor cross_entropy(std::span<const Tensor> probs, std::span<const Polarity> gold);
std::size_t clamped_probability_count();

struct Prediction {
  std::string source_id;
  Span aspect;
  Polarity gold;
  Polarity predicted;
  std::array<double, kPolarityCount> probs;
};

struct Evaluation {
  Metrics metrics;
  double mean_loss = 0.0;
  std::vector<Prediction> predictions;
};

/// Inference over a dataset, sharded across OpenMP threads. Prediction is
/// the argmax class, ties toward the lowest index.
Evaluation evaluate(const MegaModel& model, std::span<const EncodedExample> examples);

struct EpochRecord {
  std::size_t epoch = 0;
  std::size_t steps = 0;  // optimizer steps taken so far
  double loss = 0.0;      // mean training loss of the epoch
  Metrics metrics;        // on the evaluation set
};

nlohmann::json to_json(const Metrics& m);
nlohmann::json to_json(const EpochRecord& r);

/// Builds a model snapshot: config, vocab, all parameter tensors.
Checkpoint model_checkpoint(const MegaModel& model, const RunConfig& config);
/// Reconstructs the model stored in a checkpoint.
MegaModel model_from_checkpoint(const Checkpoint& checkpoint);
RunConfig config_from_checkpoint(const Checkpoint& checkpoint);

class Trainer {
 public:
  using EpochCallback = std::function<void(const EpochRecord&, const Trainer&)>;

  Trainer(MegaModel& model, RunConfig config);

  /// Mean loss over the batch; `grads` receives the gradient of that mean.
  /// Examples run in parallel and are reduced in batch order.
  double batch_gradient(std::span<const EncodedExample> batch, std::uint64_t dropout_seed,
                        GradientMap& grads) const;

  /// One optimizer step on a mini-batch; returns its mean loss.
  double step(std::span<const EncodedExample> batch);

  /// Epoch loop with per-epoch evaluation, best-macro-F1 tracking and early
  /// stopping. Continues from the restored state if restore() was called.
  std::vector<EpochRecord> fit(std::span<const EncodedExample> train,
                               std::span<const EncodedExample> eval,
                               const EpochCallback& on_epoch = {});

  bool finished() const { return finished_; }
  std::size_t epoch() const { return epoch_; }
  std::size_t steps() const { return adam_.steps(); }
  double best_macro_f1() const { return best_f1_; }
  std::size_t best_epoch() const { return best_epoch_; }
  const std::vector<EpochRecord>& history() const { return history_; }
  const Adam& optimizer() const { return adam_; }

  /// Everything needed to resume: parameters, optimizer moments, shuffle RNG,
  /// early-stopping counters, best parameters and history.
  Checkpoint training_checkpoint() const;
  void restore(const Checkpoint& checkpoint);

  /// The best-scoring parameters as a model checkpoint.
  Checkpoint best_checkpoint() const;

 private:
  MegaModel& model_;
  RunConfig config_;
  ParameterSet params_;
  Adam adam_;
  std::mt19937_64 shuffle_rng_;
  std::size_t epoch_ = 0;
  std::size_t since_best_ = 0;
  bool finished_ = false;
  double best_f1_ = -1.0;
  std::size_t best_epoch_ = 0;
  std::map<std::string, Tensor> best_;
  std::vector<EpochRecord> history_;
};

}  // namespace mega
