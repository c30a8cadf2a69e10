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
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "mega/tensor.hpp"

namespace mega {

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// On-disk layout (version 1), all integers little-endian:
///
///   bytes 0..7    magic "MEGACKPT"
///   u32           format version
///   u64           header length H
///   H bytes       UTF-8 JSON header:
///                   { "meta": {...},
///                     "tensors": [ {"name", "shape", "offset", "count"}, ... ],
///                     "payload_bytes": n, "payload_fnv1a": "<hex>" }
///   payload       f64 values, tensors back to back at the listed offsets
///
/// `meta` holds the run config (flat key/value), the vocabulary, the epoch,
/// the per-epoch metric history and trainer state.
struct Checkpoint {
  static constexpr std::uint32_t kVersion = 1;

  nlohmann::json meta = nlohmann::json::object();
  std::map<std::string, Tensor> tensors;
};

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace mega
