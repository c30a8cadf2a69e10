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

#include <gtest/gtest.h>

#include <algorithm>
#include <array>
#include <cctype>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <memory>
#include <sstream>

#include "mega/bilstm.hpp"
#include "mega/grad_check.hpp"
#include "mega/ops.hpp"
#include "mega/data.hpp"
#include "test_support.hpp"

namespace mega {
namespace {

using Tokens = std::vector<std::string>;

std::string run(const std::string& command) {
  std::unique_ptr<FILE, int (*)(FILE*)> pipe(popen(command.c_str(), "r"), pclose);
  if (!pipe) return {};
  std::string out;
  std::array<char, 256> buf{};
  while (fgets(buf.data(), buf.size(), pipe.get())) out += buf.data();
  return out;
}

ParsedCorpus parse_xml_text(const std::string& xml) {
  std::istringstream in(xml);
  return parse_semeval_xml(in);
}

TEST(Tokenize, Rules) {
  EXPECT_EQ(tokenize("Great food!"), (Tokens{"great", "food", "!"}));
  EXPECT_TRUE(tokenize("").empty());
  EXPECT_TRUE(tokenize("  \t\n").empty());
  EXPECT_EQ(tokenize("It's $5.50, ok?"), (Tokens{"it", "'", "s", "$", "5", ".", "50", ",", "ok", "?"}));
}

TEST(Tokenize, OffsetsPointIntoSource) {
  const std::string text = "The Wine-list, please";
  for (const auto& t : tokenize_with_offsets(text)) {
    std::string slice = text.substr(t.begin, t.end - t.begin);
    for (auto& c : slice) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    EXPECT_EQ(slice, t.text);
  }
  const std::size_t breaks[] = {5};
  const auto split = tokenize_with_offsets("pizzas here", std::span(breaks).first(1));
  ASSERT_GE(split.size(), 2u);
  EXPECT_EQ(split[0].text, "pizza");
  EXPECT_EQ(split[1].text, "s");
}

TEST(Tokenize, RejoiningIsIdempotent) {
  const ParsedCorpus corpus = parse_semeval_xml(test::data_path("overfit64.xml"));
  const ParsedCorpus small = parse_semeval_xml(test::data_path("restaurants_small.xml"));
  for (const auto* c : {&corpus, &small}) {
    for (const auto& ex : c->examples) {
      std::string joined;
      for (const auto& t : ex.tokens) joined += (joined.empty() ? "" : " ") + t;
      ASSERT_EQ(tokenize(joined), ex.tokens) << joined;
    }
  }
}

TEST(SemEval, DocumentedExample) {
  const auto corpus = parse_xml_text(
      "<sentences><sentence><text>great food</text><aspectTerms>"
      "<aspectTerm term=\"food\" polarity=\"positive\" from=\"6\" to=\"10\"/>"
      "</aspectTerms></sentence></sentences>");
  ASSERT_EQ(corpus.examples.size(), 1u);
  EXPECT_EQ(corpus.examples[0].tokens, (Tokens{"great", "food"}));
  EXPECT_EQ(corpus.examples[0].aspect, (Span{1, 2}));
  EXPECT_EQ(corpus.examples[0].label, Polarity::kPositive);
}

TEST(SemEval, NoAspectTermsNoExamples) {
  const auto corpus =
      parse_xml_text("<sentences><sentence id=\"1\"><text>Nothing here.</text></sentence></sentences>");
  EXPECT_TRUE(corpus.examples.empty());
  EXPECT_TRUE(corpus.rejected.empty());
}

TEST(SemEval, MalformedXmlReportsLine) {
  try {
    parse_xml_text("<sentences>\n<sentence>\n<text>x</text>\n<aspectTerm term=x/>\n</sentence></sentences>");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 4u) << e.what();
  }
}

TEST(SemEval, BundledFixture) {
  const auto corpus = parse_semeval_xml(test::data_path("restaurants_small.xml"));
  EXPECT_EQ(corpus.examples.size(), 15u);
  EXPECT_EQ(corpus.skipped_conflict, 1u);
  ASSERT_EQ(corpus.rejected.size(), 1u);
  EXPECT_EQ(corpus.rejected[0].source_id, "s8#1");

  auto find = [&](const std::string& id) -> const AspectExample& {
    for (const auto& ex : corpus.examples)
      if (ex.source_id == id) return ex;
    throw std::runtime_error("missing " + id);
  };
  // offsets split "pizzas" at the term boundary
  const auto& pizza = find("s6#0");
  EXPECT_EQ(pizza.tokens, (Tokens{"i", "loved", "the", "pizza", "s", "here", "!"}));
  EXPECT_EQ(pizza.aspect, (Span{3, 4}));
  // code-point offsets after a multi-byte character
  const auto& music = find("s7#1");
  EXPECT_EQ(music.tokens[music.aspect.begin], "music");
  EXPECT_EQ(find("s4#1").aspect.size(), 2u);
  for (const auto& ex : corpus.examples) EXPECT_NO_THROW(validate(ex));
}

// Record counts against an independent Python reader.
void check_counts(const std::filesystem::path& file, const char* format, const ParsedCorpus& corpus) {
  const std::string out =
      run(std::string(MEGA_PYTHON) + " " + MEGA_TEST_SCRIPT_DIR + "/count_corpus.py " + format + " '" + file.string() + "'");
  std::istringstream in(out);
  std::size_t pos = 0, neu = 0, neg = 0, conflict = 0;
  ASSERT_TRUE(in >> pos >> neu >> neg >> conflict) << "count script failed for " << file;
  EXPECT_EQ(corpus.examples.size() + corpus.rejected.size(), pos + neu + neg) << file;
  EXPECT_EQ(corpus.skipped_conflict, conflict) << file;
  if (corpus.rejected.empty()) {
    std::array<std::size_t, 3> seen{};
    for (const auto& ex : corpus.examples) ++seen[static_cast<std::size_t>(ex.label)];
    EXPECT_EQ(seen, (std::array<std::size_t, 3>{pos, neu, neg})) << file;
  }
}

TEST(CorpusCounts, FixturesAgreeWithIndependentCounter) {
  for (const char* name : {"restaurants_small.xml", "overfit64.xml"}) {
    check_counts(test::data_path(name), "semeval", parse_semeval_xml(test::data_path(name)));
  }
  check_counts(test::data_path("twitter_small.txt"), "twitter", parse_twitter(test::data_path("twitter_small.txt")));
}

TEST(CorpusCounts, OfficialFilesWhenPresent) {
  const char* dir = std::getenv("MEGA_DATA_DIR");
  if (!dir) GTEST_SKIP() << "MEGA_DATA_DIR not set";
  std::size_t checked = 0;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    const auto ext = entry.path().extension();
    if (ext == ".xml") {
      const auto corpus = parse_semeval_xml(entry.path());
      check_counts(entry.path(), "semeval", corpus);
      for (const auto& ex : corpus.examples) ASSERT_NO_THROW(validate(ex));
      ++checked;
    } else if (ext == ".raw" || ext == ".seg") {
      check_counts(entry.path(), "twitter", parse_twitter(entry.path()));
      ++checked;
    }
  }
  if (checked == 0) GTEST_SKIP() << "no corpus files in " << dir;
}

TEST(Twitter, ThreeLineRecords) {
  const auto corpus = parse_twitter(test::data_path("twitter_small.txt"));
  ASSERT_EQ(corpus.examples.size(), 3u);
  ASSERT_EQ(corpus.rejected.size(), 1u);
  const auto& first = corpus.examples[0];
  EXPECT_EQ(first.tokens, (Tokens{"i", "love", "the", "phone", "!"}));
  EXPECT_EQ(first.aspect, (Span{2, 4}));
  EXPECT_EQ(first.label, Polarity::kPositive);
  EXPECT_EQ(corpus.examples[1].label, Polarity::kNeutral);
  EXPECT_EQ(corpus.examples[1].aspect, (Span{0, 1}));
  EXPECT_EQ(corpus.examples[2].label, Polarity::kNegative);
}

TEST(Twitter, TruncatedRecordIsParseError) {
  std::istringstream in("a $T$ b\nx\n1\nlonely line\n");
  EXPECT_THROW(parse_twitter(in), ParseError);
}

TEST(Interchange, RoundTripsParsedCorpus) {
  const auto corpus = parse_semeval_xml(test::data_path("overfit64.xml"));
  std::stringstream buf;
  write_interchange(buf, corpus.examples);
  EXPECT_EQ(read_interchange(buf), corpus.examples);
  std::istringstream bad("{\"id\":\"x\",\"tokens\":[\"a\"],\"span\":[0,2],\"label\":\"positive\"}\n");
  EXPECT_THROW(read_interchange(bad), ParseError);
}

TEST(VocabTest, SpecialsAndBijection) {
  const auto corpus = parse_semeval_xml(test::data_path("restaurants_small.xml"));
  const Vocab v = Vocab::build(corpus.examples);
  EXPECT_EQ(v.token(Vocab::kPad), "<pad>");
  EXPECT_EQ(v.token(Vocab::kUnk), "<unk>");
  EXPECT_EQ(v.index("never-seen"), Vocab::kUnk);
  for (std::size_t i = 0; i < v.size(); ++i) EXPECT_EQ(v.index(v.token(i)), i);
  const Vocab again = Vocab::from_tokens(v.tokens());
  EXPECT_EQ(again.tokens(), v.tokens());
}

TEST(WordVectors, LoadsRowsAndKeepsPadZero) {
  Vocab v;
  for (const char* w : {"the", "food", "was", "great", "service", "!", "menu"}) v.add(w);
  const auto load = load_wordvecs(test::data_path("vectors_small.txt"), v, 4, 3);
  EXPECT_EQ(load.table.shape(), (Shape{v.size(), 4}));
  const std::size_t food = v.index("food");
  EXPECT_EQ(load.table.at(food, 0), 0.5);
  EXPECT_EQ(load.table.at(food, 3), -0.25);
  for (std::size_t c = 0; c < 4; ++c) EXPECT_EQ(load.table.at(Vocab::kPad, c), 0.0);
  const std::size_t menu = v.index("menu");
  for (std::size_t c = 0; c < 4; ++c) {
    EXPECT_LE(std::abs(load.table.at(menu, c)), 0.1);
  }
  EXPECT_EQ(load.searchable, 7u);
  EXPECT_EQ(load.found, 5u);

  // Coverage cross-checked by membership counting in the shell.
  const auto vocab_file = std::filesystem::temp_directory_path() / "mega_vocab_words.txt";
  {
    std::ofstream out(vocab_file);
    for (std::size_t i = 2; i < v.size(); ++i) out << v.token(i) << '\n';
  }
  const std::string count = run("tail -n +2 '" + test::data_path("vectors_small.txt").string() +
                                "' | cut -d' ' -f1 | grep -Fxc -f '" + vocab_file.string() + "'");
  EXPECT_EQ(std::stoul(count), load.found);
  std::filesystem::remove(vocab_file);
}

TEST(WordVectors, DocumentedExampleAndDimensionError) {
  Vocab v;
  v.add("food");
  std::istringstream in("food 0.1 0.2\n");
  const auto load = load_wordvecs(in, v, 2, 1);
  EXPECT_EQ(load.table.at(v.index("food"), 0), 0.1);
  EXPECT_EQ(load.table.at(v.index("food"), 1), 0.2);
  std::istringstream bad("food 0.1 0.2\nmenu 0.3\n");
  try {
    load_wordvecs(bad, v, 2, 1);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
}

std::vector<EncodedExample> numbered(std::size_t n) {
  std::vector<EncodedExample> out;
  for (std::size_t i = 0; i < n; ++i) {
    out.push_back({std::vector<std::size_t>(1 + i % 4, 2 + i), {0, 1}, Polarity::kNeutral, std::to_string(i)});
  }
  return out;
}

TEST(Batching, PartitionAndPadding) {
  const auto examples = numbered(5);
  const auto batches = make_batches(examples, 2, std::nullopt);
  ASSERT_EQ(batches.size(), 3u);
  EXPECT_EQ(batches[0].size(), 2u);
  EXPECT_EQ(batches[1].size(), 2u);
  EXPECT_EQ(batches[2].size(), 1u);
  for (const auto& b : batches) {
    for (std::size_t r = 0; r < b.size(); ++r) {
      for (std::size_t c = 0; c < b.max_length; ++c) {
        const bool real = c < b.lengths[r];
        EXPECT_EQ(b.mask[r * b.max_length + c], real ? 1 : 0);
        EXPECT_EQ(b.token_ids[r * b.max_length + c] == Vocab::kPad, !real);
      }
      EXPECT_LE(b.aspects[r].end, b.lengths[r]);
      EXPECT_EQ(b.row(r).token_ids, examples[b.example_index[r]].token_ids);
    }
  }
  EXPECT_THROW(make_batches(examples, 0, std::nullopt), ContractError);
}

TEST(Batching, CarriedPadCountsAsPadding) {
  auto examples = numbered(2);
  const std::size_t real = examples[0].token_ids.size();
  examples[0].token_ids.resize(real + 3, Vocab::kPad);
  const auto b = make_batches(examples, 2, std::nullopt).front();
  EXPECT_EQ(b.lengths[0], real);
  EXPECT_EQ(b.mask[real], 0);
}

TEST(Batching, SeededShuffleIsDeterministic) {
  const auto examples = numbered(40);
  auto order = [&](std::uint64_t seed) {
    std::vector<std::size_t> idx;
    for (const auto& b : make_batches(examples, 8, seed)) idx.insert(idx.end(), b.example_index.begin(), b.example_index.end());
    return idx;
  };
  EXPECT_EQ(order(5), order(5));
  EXPECT_NE(order(5), order(6));
  auto sorted = order(5);
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t i = 0; i < sorted.size(); ++i) EXPECT_EQ(sorted[i], i);
}

TEST(BiLSTM, DirectionalCausality) {
  std::mt19937_64 rng(3);
  const auto params = BiLSTMParams::init(5, 6, rng);
  const Tensor x = test::random_tensor({6, 5}, rng);
  const Tensor base = bilstm_encode(x, params);
  ASSERT_EQ(base.shape(), (Shape{6, 6}));
  for (std::size_t t = 0; t < 6; ++t) {
    std::vector<double> v(x.data().begin(), x.data().end());
    for (std::size_t c = 0; c < 5; ++c) v[t * 5 + c] += 1.0;
    const Tensor moved = bilstm_encode(Tensor({6, 5}, v), params);
    for (std::size_t s = 0; s < 6; ++s) {
      for (std::size_t c = 0; c < 3; ++c) {
        if (s < t) ASSERT_EQ(moved.at(s, c), base.at(s, c));      // forward half
        if (s > t) ASSERT_EQ(moved.at(s, 3 + c), base.at(s, 3 + c));  // backward half
      }
    }
  }
}

TEST(BiLSTM, BatchedEncodingZeroesPadding) {
  std::mt19937_64 rng(4);
  const auto params = BiLSTMParams::init(4, 6, rng);
  const Tensor table = random_embeddings(12, 4, 2);
  const auto examples = numbered(6);
  for (const auto& b : make_batches(examples, 3, std::nullopt)) {
    const Tensor enc = bilstm_encode(table, b, params);
    for (std::size_t r = 0; r < b.size(); ++r) {
      const Tensor single = bilstm_encode(gather_rows(table, examples[b.example_index[r]].token_ids), params);
      for (std::size_t t = 0; t < b.max_length; ++t) {
        for (std::size_t c = 0; c < 6; ++c) {
          const double got = enc[(r * b.max_length + t) * 6 + c];
          if (t < b.lengths[r]) ASSERT_EQ(got, single.at(t, c));
          else ASSERT_EQ(got, 0.0);
        }
      }
    }
  }
  EXPECT_THROW(BiLSTMParams::init(4, 5, rng), ContractError);
}

TEST(BiLSTM, GradientOnThreeTokens) {
  std::mt19937_64 rng(5);
  const auto params = BiLSTMParams::init(3, 4, rng);
  const Tensor x = test::random_tensor({3, 3}, rng);
  const Tensor w = test::random_tensor({3, 4}, rng, 1.0);
  const auto report = grad_check([&] { return sum(mul(bilstm_encode(x, params), w)); }, params.parameters());
  EXPECT_LE(report.max_relative_error, 1e-4);
}

}  // namespace
}  // namespace mega
