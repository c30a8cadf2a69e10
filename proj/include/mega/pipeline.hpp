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

#include <filesystem>
#include <iosfwd>
#include <vector>

#include "mega/data.hpp"
#include "mega/run_config.hpp"
#include "mega/trainer.hpp"

namespace mega {

/// Reads a corpus in the given format. Rejected records and skipped
/// conflict terms are reported through `corpus`.
ParsedCorpus load_corpus(const std::filesystem::path& path, CorpusFormat format);

/// Data side of a run: both splits, the vocabulary over both and the
/// embedding table.
struct Workspace {
  ParsedCorpus train_corpus;
  ParsedCorpus test_corpus;
  Vocab vocab;
  EmbeddingLoad embedding;
  std::vector<EncodedExample> train;
  std::vector<EncodedExample> test;
};

Workspace prepare_workspace(const RunConfig& config);

struct TrainOutcome {
  std::vector<EpochRecord> history;
  double best_macro_f1 = 0.0;
  std::size_t best_epoch = 0;
  std::filesystem::path model_path;
};

/// Trains per `config`, writing under config.output_dir:
///   metrics.jsonl   one {"epoch","loss","acc","macro_f1",...} record per epoch
///   state.ckpt      resumable training state, refreshed every epoch
///   model.ckpt      best-macro-F1 parameters
/// With `resume`, continues from state.ckpt when it exists.
TrainOutcome run_training(const RunConfig& config, bool resume = false,
                          std::ostream* progress = nullptr);

}  // namespace mega
