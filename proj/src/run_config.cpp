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

#include "mega/run_config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

namespace mega {

namespace {

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void bad(const std::string& key, const std::string& value, const std::string& why) {
  throw ContractError("config: " + key + " = '" + value + "': " + why);
}

std::size_t to_size(const std::string& key, const std::string& v) {
  std::size_t out = 0;
  auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc{} || res.ptr != v.data() + v.size()) bad(key, v, "expected a non-negative integer");
  return out;
}

double to_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc{} || res.ptr != v.data() + v.size()) bad(key, v, "expected a number");
  return out;
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  bad(key, v, "expected true or false");
}

std::string num(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace

std::string_view to_string(CorpusFormat format) {
  switch (format) {
    case CorpusFormat::kSemEval: return "semeval";
    case CorpusFormat::kTwitter: return "twitter";
    case CorpusFormat::kInterchange: return "interchange";
  }
  return "?";
}

void RunConfig::set(const std::string& key, const std::string& value) {
  auto& m = model;
  auto& t = train;
  if (key == "embed_dim") m.embed_dim = to_size(key, value);
  else if (key == "d_model") m.d_model = to_size(key, value);
  else if (key == "conv_kernel") m.conv_kernel = to_size(key, value);
  else if (key == "stream_heads") m.stream_heads = to_size(key, value);
  else if (key == "fusion_heads") m.fusion_heads = to_size(key, value);
  else if (key == "flip_fraction") m.flip_fraction = to_double(key, value);
  else if (key == "flip_count") {
    if (value == "none" || value.empty()) m.flip_count.reset();
    else m.flip_count = to_size(key, value);
  } else if (key == "pf_double_flip") m.pf_double_flip = to_bool(key, value);
  else if (key == "pooling_scope") {
    if (value == "aspect_span") m.pooling = PoolingScope::kAspectSpan;
    else if (value == "whole_sentence") m.pooling = PoolingScope::kWholeSentence;
    else bad(key, value, "expected aspect_span or whole_sentence");
  } else if (key == "encoder") {
    if (value == "bilstm") m.encoder = EncoderKind::kBiLSTM;
    else if (value == "raw") m.encoder = EncoderKind::kRaw;
    else bad(key, value, "expected bilstm or raw");
  } else if (key == "fusion_enabled") m.fusion_enabled = to_bool(key, value);
  else if (key == "train_embeddings") m.train_embeddings = to_bool(key, value);
  else if (key == "dropout") m.dropout = to_double(key, value);
  else if (key == "precision") {
    if (value != "f64") bad(key, value, "only f64 is supported");
  } else if (key == "lr") t.adam.lr = to_double(key, value);
  else if (key == "weight_decay") t.adam.weight_decay = to_double(key, value);
  else if (key == "batch_size") t.batch_size = to_size(key, value);
  else if (key == "max_epochs") t.max_epochs = to_size(key, value);
  else if (key == "patience") t.patience = to_size(key, value);
  else if (key == "max_steps") t.max_steps = to_size(key, value);
  else if (key == "threads") t.threads = to_size(key, value);
  else if (key == "seed") t.seed = to_size(key, value);
  else if (key == "format") {
    if (value == "semeval") format = CorpusFormat::kSemEval;
    else if (value == "twitter") format = CorpusFormat::kTwitter;
    else if (value == "interchange") format = CorpusFormat::kInterchange;
    else bad(key, value, "expected semeval, twitter or interchange");
  } else if (key == "train_path") train_path = value;
  else if (key == "test_path") test_path = value;
  else if (key == "wordvecs_path") wordvecs_path = value;
  else if (key == "output_dir") output_dir = value;
  else throw ContractError("config: unknown key '" + key + "'");
}

std::map<std::string, std::string> RunConfig::to_map() const {
  const auto& m = model;
  const auto& t = train;
  return {
      {"embed_dim", std::to_string(m.embed_dim)},
      {"d_model", std::to_string(m.d_model)},
      {"conv_kernel", std::to_string(m.conv_kernel)},
      {"stream_heads", std::to_string(m.stream_heads)},
      {"fusion_heads", std::to_string(m.fusion_heads)},
      {"flip_fraction", num(m.flip_fraction)},
      {"flip_count", m.flip_count ? std::to_string(*m.flip_count) : "none"},
      {"pf_double_flip", m.pf_double_flip ? "true" : "false"},
      {"pooling_scope", std::string(to_string(m.pooling))},
      {"encoder", std::string(to_string(m.encoder))},
      {"fusion_enabled", m.fusion_enabled ? "true" : "false"},
      {"train_embeddings", m.train_embeddings ? "true" : "false"},
      {"dropout", num(m.dropout)},
      {"precision", "f64"},
      {"lr", num(t.adam.lr)},
      {"weight_decay", num(t.adam.weight_decay)},
      {"batch_size", std::to_string(t.batch_size)},
      {"max_epochs", std::to_string(t.max_epochs)},
      {"patience", std::to_string(t.patience)},
      {"max_steps", std::to_string(t.max_steps)},
      {"threads", std::to_string(t.threads)},
      {"seed", std::to_string(t.seed)},
      {"format", std::string(to_string(format))},
      {"train_path", train_path.string()},
      {"test_path", test_path.string()},
      {"wordvecs_path", wordvecs_path.string()},
      {"output_dir", output_dir.string()},
  };
}

RunConfig RunConfig::from_map(const std::map<std::string, std::string>& kv) {
  RunConfig cfg;
  for (const auto& [k, v] : kv) cfg.set(k, v);
  return cfg;
}

RunConfig RunConfig::parse(std::istream& in) {
  RunConfig cfg;
  std::size_t line_no = 0;
  for (std::string line; std::getline(in, line);) {
    ++line_no;
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ContractError("config line " + std::to_string(line_no) + ": expected key = value");
    }
    try {
      cfg.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    } catch (const ContractError& e) {
      throw ContractError("config line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return cfg;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path.string());
  return parse(in);
}

std::vector<std::string> RunConfig::missing_paths() const {
  std::vector<std::string> problems;
  auto need = [&](const std::filesystem::path& p, const char* key) {
    if (p.empty()) problems.push_back(std::string(key) + " is not set");
    else if (!std::filesystem::is_regular_file(p)) problems.push_back(std::string(key) + " not found: " + p.string());
  };
  need(train_path, "train_path");
  need(test_path, "test_path");
  if (!wordvecs_path.empty() && !std::filesystem::is_regular_file(wordvecs_path)) {
    problems.push_back("wordvecs_path not found: " + wordvecs_path.string());
  }
  return problems;
}

const std::vector<std::string>& architecture_keys() {
  static const std::vector<std::string> keys = {
      "embed_dim",     "d_model",        "conv_kernel", "stream_heads",   "fusion_heads",
      "flip_fraction", "flip_count",     "pf_double_flip", "pooling_scope", "encoder",
      "fusion_enabled", "precision"};
  return keys;
}

std::vector<std::string> architecture_diff(const std::map<std::string, std::string>& saved,
                                           const std::map<std::string, std::string>& requested) {
  std::vector<std::string> diff;
  for (const auto& key : architecture_keys()) {
    auto a = saved.find(key);
    auto b = requested.find(key);
    const std::string va = a == saved.end() ? "<unset>" : a->second;
    const std::string vb = b == requested.end() ? "<unset>" : b->second;
    if (va != vb) diff.push_back(key + ": " + va + " -> " + vb);
  }
  return diff;
}

}  // namespace mega
