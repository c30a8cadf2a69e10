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
#include <filesystem>
#include <istream>
#include <map>
#include <string>
#include <vector>

#include "mega/mega_model.hpp"
#include "mega/optimizer.hpp"

namespace mega {

enum class CorpusFormat { kSemEval, kTwitter, kInterchange };

struct TrainConfig {
  AdamConfig adam;
  std::size_t batch_size = 32;
  std::size_t max_epochs = 50;
  std::size_t patience = 10;
  std::size_t max_steps = 0;  // 0: unlimited
  std::size_t threads = 0;    // 0: OpenMP default
  std::uint64_t seed = 1;
};

/// Everything a run needs, as read from a flat "key = value" file.
///
/// Recognized keys (defaults in parentheses):
///   embed_dim (300)          d_model (64)             conv_kernel (4)
///   stream_heads (4)         fusion_heads (4)         flip_fraction (0.5)
///   flip_count (none)        pf_double_flip (true)    pooling_scope (aspect_span)
///   encoder (bilstm)         fusion_enabled (true)    train_embeddings (false)
///   dropout (0.3)            precision (f64)
///   lr (0.001)               weight_decay (1e-05)     batch_size (32)
///   max_epochs (50)          patience (10)            max_steps (0)
///   threads (0)              seed (1)
///   format (semeval)         train_path               test_path
///   wordvecs_path ("")       output_dir (out)
/// Lines starting with '#' and blank lines are ignored; unknown keys fail.
struct RunConfig {
  MegaConfig model;
  TrainConfig train;
  CorpusFormat format = CorpusFormat::kSemEval;
  std::filesystem::path train_path;
  std::filesystem::path test_path;
  std::filesystem::path wordvecs_path;
  std::filesystem::path output_dir = "out";

  /// Sets one key from its textual value; throws ContractError on an
  /// unknown key or unparsable value.
  void set(const std::string& key, const std::string& value);

  /// Canonical key/value rendering; parse(to_map()) reproduces the config.
  std::map<std::string, std::string> to_map() const;

  static RunConfig parse(std::istream& in);
  static RunConfig load(const std::filesystem::path& path);
  static RunConfig from_map(const std::map<std::string, std::string>& kv);

  /// Checks paths exist; returns the first problem as a one-line message.
  std::vector<std::string> missing_paths() const;
};

/// Keys that change the network's shape or function; a checkpoint can only
/// be evaluated under a config that agrees on these.
const std::vector<std::string>& architecture_keys();

/// "key: a -> b" lines for architecture keys that differ.
std::vector<std::string> architecture_diff(const std::map<std::string, std::string>& saved,
                                           const std::map<std::string, std::string>& requested);

std::string_view to_string(CorpusFormat format);

}  // namespace mega
