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

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <istream>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "mega/tensor.hpp"

namespace mega {

enum class Polarity : std::uint8_t { kPositive = 0, kNeutral = 1, kNegative = 2 };
inline constexpr std::size_t kPolarityCount = 3;

std::string_view polarity_name(Polarity p);
std::optional<Polarity> polarity_from_name(std::string_view name);

/// Half-open token range [begin, end).
struct Span {
  std::size_t begin = 0;
  std::size_t end = 0;
  std::size_t size() const { return end - begin; }
  bool operator==(const Span&) const = default;
};

struct AspectExample {
  std::vector<std::string> tokens;
  Span aspect;
  Polarity label = Polarity::kNeutral;
  std::string source_id;

  bool operator==(const AspectExample&) const = default;
};

/// Throws ContractError if the span or label invariant is violated.
void validate(const AspectExample& example);

class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& message, std::size_t line)
      : std::runtime_error(message + " (line " + std::to_string(line) + ")"), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

/// Records that could not be turned into examples, with the reason.
struct Diagnostic {
  std::string source_id;
  std::string message;
};

struct ParsedCorpus {
  std::vector<AspectExample> examples;
  std::vector<Diagnostic> rejected;
  std::size_t skipped_conflict = 0;
};

// ---------------------------------------------------------------------------
// Tokenization

struct Token {
  std::string text;
  std::size_t begin;  // byte offsets into the source text
  std::size_t end;
};

/// Lowercases ASCII, splits on whitespace, and emits every ASCII punctuation
/// character as its own token. Extra break offsets force token boundaries.
std::vector<Token> tokenize_with_offsets(std::string_view text,
                                         std::span<const std::size_t> forced_breaks = {});
std::vector<std::string> tokenize(std::string_view text);

// ---------------------------------------------------------------------------
// Corpus readers

/// SemEval-2014 Task 4 XML: one example per aspectTerm; "conflict" terms are
/// counted and skipped. Character offsets are mapped to token spans.
ParsedCorpus parse_semeval_xml(const std::filesystem::path& path);
ParsedCorpus parse_semeval_xml(std::istream& in, std::string_view source_name = "<stream>");

/// Three-line records: sentence with $T$, target, polarity in {-1,0,1}.
ParsedCorpus parse_twitter(const std::filesystem::path& path);
ParsedCorpus parse_twitter(std::istream& in, std::string_view source_name = "<stream>");

/// Line-delimited JSON: {"id":..., "tokens":[...], "span":[b,e], "label":"positive"}.
void write_interchange(std::ostream& out, std::span<const AspectExample> examples);
std::vector<AspectExample> read_interchange(std::istream& in);

// ---------------------------------------------------------------------------
// Vocabulary and embeddings

class Vocab {
 public:
  static constexpr std::size_t kPad = 0;
  static constexpr std::size_t kUnk = 1;
  static constexpr std::string_view kPadToken = "<pad>";
  static constexpr std::string_view kUnkToken = "<unk>";

  Vocab();
  /// Adds tokens in first-seen order.
  static Vocab build(std::span<const AspectExample> examples);
  static Vocab from_tokens(std::vector<std::string> tokens);

  std::size_t add(const std::string& token);
  std::size_t index(const std::string& token) const;  // kUnk when absent
  bool contains(const std::string& token) const;
  const std::string& token(std::size_t index) const { return tokens_.at(index); }
  std::size_t size() const { return tokens_.size(); }
  const std::vector<std::string>& tokens() const { return tokens_; }

  std::vector<std::size_t> encode(std::span<const std::string> tokens) const;

 private:
  std::unordered_map<std::string, std::size_t> index_;
  std::vector<std::string> tokens_;
};

struct EmbeddingLoad {
  Tensor table;               // [|V|, d_e]
  std::size_t found = 0;      // vocab rows (excluding specials) present in the file
  std::size_t searchable = 0; // vocab rows excluding specials
  double coverage() const { return searchable ? static_cast<double>(found) / searchable : 0.0; }
};

/// Random table: rows ~ U[-0.1, 0.1], PAD row zero.
Tensor random_embeddings(std::size_t vocab_size, std::size_t dim, std::uint64_t seed);

/// Text vectors "word v1 ... v_d" per line; an optional "count dim" header is
/// skipped. Rows not in the file keep their random init.
EmbeddingLoad load_wordvecs(const std::filesystem::path& path, const Vocab& vocab,
                            std::size_t dim, std::uint64_t seed);
EmbeddingLoad load_wordvecs(std::istream& in, const Vocab& vocab, std::size_t dim,
                            std::uint64_t seed);

// ---------------------------------------------------------------------------
// Batching

struct EncodedExample {
  std::vector<std::size_t> token_ids;
  Span aspect;
  Polarity label;
  std::string source_id;
};

std::vector<EncodedExample> encode_all(std::span<const AspectExample> examples, const Vocab& vocab);

struct Batch {
  std::size_t max_length = 0;
  std::vector<std::size_t> token_ids;  // [B, max_length], PAD filled
  std::vector<std::size_t> lengths;
  std::vector<Span> aspects;
  std::vector<Polarity> labels;
  std::vector<std::uint8_t> mask;      // [B, max_length], 1 at real tokens
  std::vector<std::size_t> example_index;  // position in the source list

  std::size_t size() const { return lengths.size(); }
  /// Unpadded row b.
  EncodedExample row(std::size_t b) const;
};

/// Partitions into batches of `batch_size` (last may be smaller). Order is
/// shuffled with the seed, or kept when `shuffle_seed` is empty.
std::vector<Batch> make_batches(std::span<const EncodedExample> examples, std::size_t batch_size,
                                std::optional<std::uint64_t> shuffle_seed);

}  // namespace mega
