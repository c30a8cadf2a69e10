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

#include <algorithm>

#include "mega/data.hpp"

namespace mega {

namespace {

bool is_space(unsigned char c) { return c == ' ' || (c >= '\t' && c <= '\r'); }
bool is_punct(unsigned char c) {
  return (c >= 33 && c <= 47) || (c >= 58 && c <= 64) || (c >= 91 && c <= 96) ||
         (c >= 123 && c <= 126);
}
char lower(unsigned char c) { return (c >= 'A' && c <= 'Z') ? static_cast<char>(c + 32) : static_cast<char>(c); }

}  // namespace

std::vector<Token> tokenize_with_offsets(std::string_view text,
                                         std::span<const std::size_t> forced_breaks) {
  std::vector<Token> tokens;
  Token current{"", 0, 0};
  bool open = false;
  auto close = [&](std::size_t at) {
    if (!open) return;
    current.end = at;
    tokens.push_back(current);
    current.text.clear();
    open = false;
  };
  for (std::size_t i = 0; i < text.size(); ++i) {
    const auto c = static_cast<unsigned char>(text[i]);
    if (std::find(forced_breaks.begin(), forced_breaks.end(), i) != forced_breaks.end()) close(i);
    if (is_space(c)) {
      close(i);
    } else if (is_punct(c)) {
      close(i);
      tokens.push_back({std::string(1, static_cast<char>(c)), i, i + 1});
    } else {
      if (!open) {
        open = true;
        current.begin = i;
      }
      current.text.push_back(lower(c));
    }
  }
  close(text.size());
  return tokens;
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  for (auto& t : tokenize_with_offsets(text)) out.push_back(std::move(t.text));
  return out;
}

}  // namespace mega
