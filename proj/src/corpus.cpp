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
#include <fstream>
#include <sstream>

#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>

#include "json.hpp"
#include "mega/data.hpp"

namespace mega {

std::string_view polarity_name(Polarity p) {
  switch (p) {
    case Polarity::kPositive: return "positive";
    case Polarity::kNeutral: return "neutral";
    case Polarity::kNegative: return "negative";
  }
  return "?";
}

std::optional<Polarity> polarity_from_name(std::string_view name) {
  if (name == "positive") return Polarity::kPositive;
  if (name == "neutral") return Polarity::kNeutral;
  if (name == "negative") return Polarity::kNegative;
  return std::nullopt;
}

void validate(const AspectExample& example) {
  const auto& s = example.aspect;
  if (!(s.begin < s.end && s.end <= example.tokens.size())) {
    throw ContractError("example '" + example.source_id + "': span [" + std::to_string(s.begin) +
                        "," + std::to_string(s.end) + ") invalid for " +
                        std::to_string(example.tokens.size()) + " tokens");
  }
  if (static_cast<std::size_t>(example.label) >= kPolarityCount) {
    throw ContractError("example '" + example.source_id + "': label out of range");
  }
}

namespace {

std::ifstream open_or_throw(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return in;
}

// Byte offset of the `chars`-th UTF-8 code point, or npos past the end.
std::size_t codepoint_to_byte(std::string_view text, std::size_t chars) {
  std::size_t seen = 0;
  for (std::size_t i = 0; i <= text.size(); ++i) {
    if (i == text.size() || (static_cast<unsigned char>(text[i]) & 0xC0) != 0x80) {
      if (seen == chars) return i;
      ++seen;
    }
  }
  return std::string_view::npos;
}

bool same_ignoring_case(std::string_view a, std::string_view b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    auto lo = [](char c) { return (c >= 'A' && c <= 'Z') ? static_cast<char>(c + 32) : c; };
    if (lo(a[i]) != lo(b[i])) return false;
  }
  return true;
}

// Resolves the byte range of an aspect term from its character offsets,
// falling back to byte offsets and then to the nearest textual occurrence.
std::optional<std::pair<std::size_t, std::size_t>> locate_term(std::string_view text,
                                                               std::string_view term,
                                                               std::size_t from, std::size_t to) {
  const std::size_t bf = codepoint_to_byte(text, from);
  const std::size_t bt = codepoint_to_byte(text, to);
  if (bf != std::string_view::npos && bt != std::string_view::npos && bf < bt &&
      same_ignoring_case(text.substr(bf, bt - bf), term)) {
    return std::pair{bf, bt};
  }
  if (from < to && to <= text.size() && same_ignoring_case(text.substr(from, to - from), term)) {
    return std::pair{from, to};
  }
  if (term.empty()) return std::nullopt;
  std::optional<std::pair<std::size_t, std::size_t>> best;
  std::size_t best_gap = std::string_view::npos;
  for (std::size_t pos = text.find(term); pos != std::string_view::npos; pos = text.find(term, pos + 1)) {
    const std::size_t gap = pos > from ? pos - from : from - pos;
    if (gap < best_gap) {
      best_gap = gap;
      best = std::pair{pos, pos + term.size()};
    }
  }
  return best;
}

}  // namespace

ParsedCorpus parse_semeval_xml(const std::filesystem::path& path) {
  auto in = open_or_throw(path);
  return parse_semeval_xml(in, path.filename().string());
}

ParsedCorpus parse_semeval_xml(std::istream& in, std::string_view source_name) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    pt::read_xml(in, tree);
  } catch (const pt::xml_parser_error& e) {
    throw ParseError(std::string(source_name) + ": malformed XML: " + e.message(), e.line());
  }
  ParsedCorpus corpus;
  const auto sentences = tree.get_child_optional("sentences");
  if (!sentences) throw ParseError(std::string(source_name) + ": missing <sentences> root", 1);
  std::size_t ordinal = 0;
  for (const auto& [tag, sentence] : *sentences) {
    if (tag != "sentence") continue;
    ++ordinal;
    const std::string sid = sentence.get<std::string>("<xmlattr>.id", std::to_string(ordinal));
    const std::string text = sentence.get<std::string>("text", "");
    const auto terms = sentence.get_child_optional("aspectTerms");
    if (!terms) continue;
    std::size_t term_no = 0;
    for (const auto& [ttag, term] : *terms) {
      if (ttag != "aspectTerm") continue;
      const std::string id = sid + "#" + std::to_string(term_no++);
      const std::string polarity = term.get<std::string>("<xmlattr>.polarity", "");
      if (polarity == "conflict") {
        ++corpus.skipped_conflict;
        continue;
      }
      const auto label = polarity_from_name(polarity);
      if (!label) {
        corpus.rejected.push_back({id, "unknown polarity '" + polarity + "'"});
        continue;
      }
      const std::string surface = term.get<std::string>("<xmlattr>.term", "");
      const auto from = term.get_optional<std::size_t>("<xmlattr>.from");
      const auto to = term.get_optional<std::size_t>("<xmlattr>.to");
      if (!from || !to) {
        corpus.rejected.push_back({id, "aspectTerm lacks from/to offsets"});
        continue;
      }
      const auto range = locate_term(text, surface, *from, *to);
      if (!range) {
        corpus.rejected.push_back({id, "term '" + surface + "' not found at offsets " +
                                           std::to_string(*from) + ".." + std::to_string(*to)});
        continue;
      }
      const std::size_t breaks[] = {range->first, range->second};
      const auto tokens = tokenize_with_offsets(text, breaks);
      AspectExample ex;
      ex.source_id = id;
      ex.label = *label;
      bool started = false;
      for (std::size_t i = 0; i < tokens.size(); ++i) {
        ex.tokens.push_back(tokens[i].text);
        if (tokens[i].begin >= range->first && tokens[i].end <= range->second) {
          if (!started) ex.aspect.begin = i;
          started = true;
          ex.aspect.end = i + 1;
        }
      }
      if (!started) {
        corpus.rejected.push_back({id, "term '" + surface + "' covers no token"});
        continue;
      }
      corpus.examples.push_back(std::move(ex));
    }
  }
  return corpus;
}

ParsedCorpus parse_twitter(const std::filesystem::path& path) {
  auto in = open_or_throw(path);
  return parse_twitter(in, path.filename().string());
}

ParsedCorpus parse_twitter(std::istream& in, std::string_view source_name) {
  std::vector<std::string> lines;
  for (std::string line; std::getline(in, line);) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(std::move(line));
  }
  while (!lines.empty() && lines.back().find_first_not_of(" \t") == std::string::npos) lines.pop_back();
  if (lines.size() % 3 != 0) {
    throw ParseError(std::string(source_name) + ": " + std::to_string(lines.size()) +
                         " lines is not a whole number of 3-line records",
                     lines.size());
  }
  ParsedCorpus corpus;
  for (std::size_t r = 0; r < lines.size(); r += 3) {
    const std::string id = std::string(source_name) + ":" + std::to_string(r + 1);
    const std::string& sentence = lines[r];
    const std::string& target = lines[r + 1];
    std::string pol = lines[r + 2];
    pol.erase(0, pol.find_first_not_of(" \t"));
    pol.erase(pol.find_last_not_of(" \t") + 1);
    Polarity label;
    if (pol == "1" || pol == "+1") {
      label = Polarity::kPositive;
    } else if (pol == "0") {
      label = Polarity::kNeutral;
    } else if (pol == "-1") {
      label = Polarity::kNegative;
    } else {
      throw ParseError(std::string(source_name) + ": polarity '" + pol + "' not in {-1,0,1}", r + 3);
    }
    const auto marker = sentence.find("$T$");
    if (marker == std::string::npos) {
      corpus.rejected.push_back({id, "sentence has no $T$ placeholder"});
      continue;
    }
    auto left = tokenize(std::string_view(sentence).substr(0, marker));
    auto mid = tokenize(target);
    auto right = tokenize(std::string_view(sentence).substr(marker + 3));
    if (mid.empty()) {
      corpus.rejected.push_back({id, "empty target"});
      continue;
    }
    AspectExample ex;
    ex.source_id = id;
    ex.label = label;
    ex.aspect = {left.size(), left.size() + mid.size()};
    ex.tokens = std::move(left);
    ex.tokens.insert(ex.tokens.end(), mid.begin(), mid.end());
    ex.tokens.insert(ex.tokens.end(), right.begin(), right.end());
    corpus.examples.push_back(std::move(ex));
  }
  return corpus;
}

void write_interchange(std::ostream& out, std::span<const AspectExample> examples) {
  for (const auto& ex : examples) {
    nlohmann::json j;
    j["id"] = ex.source_id;
    j["tokens"] = ex.tokens;
    j["span"] = {ex.aspect.begin, ex.aspect.end};
    j["label"] = polarity_name(ex.label);
    out << j.dump() << '\n';
  }
}

std::vector<AspectExample> read_interchange(std::istream& in) {
  std::vector<AspectExample> out;
  std::size_t line_no = 0;
  for (std::string line; std::getline(in, line);) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      AspectExample ex;
      ex.source_id = j.at("id").get<std::string>();
      ex.tokens = j.at("tokens").get<std::vector<std::string>>();
      ex.aspect = {j.at("span").at(0).get<std::size_t>(), j.at("span").at(1).get<std::size_t>()};
      const auto label = polarity_from_name(j.at("label").get<std::string>());
      if (!label) throw ParseError("interchange: unknown label", line_no);
      ex.label = *label;
      validate(ex);
      out.push_back(std::move(ex));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(std::string("interchange: ") + e.what(), line_no);
    } catch (const ContractError& e) {
      throw ParseError(std::string("interchange: ") + e.what(), line_no);
    }
  }
  return out;
}

}  // namespace mega
