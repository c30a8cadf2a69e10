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

#include <charconv>
#include <fstream>
#include <random>

#include "mega/data.hpp"
#include "mega/init.hpp"

namespace mega {

Vocab::Vocab() {
  add(std::string(kPadToken));
  add(std::string(kUnkToken));
}

Vocab Vocab::build(std::span<const AspectExample> examples) {
  Vocab v;
  for (const auto& ex : examples) {
    for (const auto& t : ex.tokens) v.add(t);
  }
  return v;
}

Vocab Vocab::from_tokens(std::vector<std::string> tokens) {
  if (tokens.size() < 2 || tokens[kPad] != kPadToken || tokens[kUnk] != kUnkToken) {
    throw ContractError("vocab: token list must start with <pad>, <unk>");
  }
  Vocab v;
  for (std::size_t i = 2; i < tokens.size(); ++i) {
    if (v.contains(tokens[i])) throw ContractError("vocab: duplicate token '" + tokens[i] + "'");
    v.add(tokens[i]);
  }
  return v;
}

std::size_t Vocab::add(const std::string& token) {
  auto [it, inserted] = index_.emplace(token, tokens_.size());
  if (inserted) tokens_.push_back(token);
  return it->second;
}

std::size_t Vocab::index(const std::string& token) const {
  auto it = index_.find(token);
  return it == index_.end() ? kUnk : it->second;
}

bool Vocab::contains(const std::string& token) const { return index_.count(token) > 0; }

std::vector<std::size_t> Vocab::encode(std::span<const std::string> tokens) const {
  std::vector<std::size_t> ids;
  ids.reserve(tokens.size());
  for (const auto& t : tokens) ids.push_back(index(t));
  return ids;
}

Tensor random_embeddings(std::size_t vocab_size, std::size_t dim, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Tensor table = uniform_tensor({vocab_size, dim}, 0.1, rng);
  auto data = table.mutable_data();
  std::fill_n(data.begin() + Vocab::kPad * dim, dim, 0.0);
  return table;
}

EmbeddingLoad load_wordvecs(const std::filesystem::path& path, const Vocab& vocab,
                            std::size_t dim, std::uint64_t seed) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open word vectors " + path.string());
  return load_wordvecs(in, vocab, dim, seed);
}

EmbeddingLoad load_wordvecs(std::istream& in, const Vocab& vocab, std::size_t dim,
                            std::uint64_t seed) {
  EmbeddingLoad result;
  result.table = random_embeddings(vocab.size(), dim, seed);
  auto table = result.table.mutable_data();
  std::vector<bool> filled(vocab.size(), false);
  std::size_t line_no = 0;
  std::vector<std::string_view> fields;
  for (std::string line; std::getline(in, line);) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    fields.clear();
    std::string_view rest(line);
    while (!rest.empty()) {
      const auto start = rest.find_first_not_of(' ');
      if (start == std::string_view::npos) break;
      rest.remove_prefix(start);
      const auto stop = rest.find(' ');
      fields.push_back(rest.substr(0, stop));
      rest.remove_prefix(stop == std::string_view::npos ? rest.size() : stop);
    }
    if (fields.empty()) continue;
    if (line_no == 1 && fields.size() == 2) {
      std::size_t a = 0, b = 0;
      const bool header =
          std::from_chars(fields[0].data(), fields[0].data() + fields[0].size(), a).ec == std::errc{} &&
          std::from_chars(fields[1].data(), fields[1].data() + fields[1].size(), b).ec == std::errc{};
      if (header) continue;
    }
    if (fields.size() != dim + 1) {
      throw ParseError("word vectors: expected " + std::to_string(dim) + " values, found " +
                           std::to_string(fields.size() - 1),
                       line_no);
    }
    const std::string word(fields[0]);
    if (!vocab.contains(word)) continue;
    const std::size_t row = vocab.index(word);
    if (row == Vocab::kPad || filled[row]) continue;
    for (std::size_t j = 0; j < dim; ++j) {
      const auto f = fields[j + 1];
      double value = 0.0;
      const auto res = std::from_chars(f.data(), f.data() + f.size(), value);
      if (res.ec != std::errc{} || res.ptr != f.data() + f.size()) {
        throw ParseError("word vectors: bad number '" + std::string(f) + "'", line_no);
      }
      table[row * dim + j] = value;
    }
    filled[row] = true;
  }
  for (std::size_t r = 2; r < vocab.size(); ++r) {
    ++result.searchable;
    if (filled[r]) ++result.found;
  }
  return result;
}

}  // namespace mega
