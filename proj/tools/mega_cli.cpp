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

#include <omp.h>

#include <CLI11.hpp>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <json.hpp>

#include "mega/checkpoint.hpp"
#include "mega/gradcheck_suite.hpp"
#include "mega/pipeline.hpp"
#include "mega/trainer.hpp"

namespace {

using namespace mega;

constexpr int kExitFailure = 1;
constexpr int kExitInvalid = 2;
constexpr int kExitMismatch = 3;

// Raised for problems with what the user asked for (paths, keys, values).
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Overrides {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string dataset;
  std::string pool;
  std::optional<double> flip_fraction;
  std::string pf_double_flip;

  void apply(RunConfig& cfg) const {
    if (seed) cfg.set("seed", std::to_string(*seed));
    if (!out.empty()) cfg.output_dir = out;
    if (!pool.empty()) cfg.set("pooling_scope", pool);
    if (flip_fraction) {
      std::ostringstream os;
      os << std::setprecision(17) << *flip_fraction;
      cfg.set("flip_fraction", os.str());
    }
    if (!pf_double_flip.empty()) cfg.set("pf_double_flip", pf_double_flip);
  }
};

void add_model_flags(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--pool", o.pool, "Pooling scope")->check(CLI::IsMember({"aspect_span", "whole_sentence"}));
  cmd->add_option("--flip-fraction", o.flip_fraction, "Fraction of tokens reversed in the PF stream");
  cmd->add_option("--pf-double-flip", o.pf_double_flip, "Flip the PF stream back before its mLSTM")
      ->check(CLI::IsMember({"true", "false"}));
}

RunConfig load_config(const Overrides& o) {
  if (!std::filesystem::is_regular_file(o.config)) throw UsageError("config not found: " + o.config);
  try {
    RunConfig cfg = RunConfig::load(o.config);
    o.apply(cfg);
    return cfg;
  } catch (const ContractError& e) {
    throw UsageError(o.config + ": " + e.what());
  }
}

std::string percent(double fraction) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(2) << 100.0 * fraction;
  return os.str();
}

void apply_threads(const RunConfig& cfg) {
  if (cfg.train.threads > 0) omp_set_num_threads(static_cast<int>(cfg.train.threads));
}

int cmd_train(const Overrides& o, bool resume) {
  RunConfig cfg = load_config(o);
  if (!o.dataset.empty()) cfg.train_path = o.dataset;
  try {
    cfg.model.validate();
  } catch (const ContractError& e) {
    throw UsageError(e.what());
  }
  if (const auto missing = cfg.missing_paths(); !missing.empty()) throw UsageError(missing.front());
  apply_threads(cfg);
  const TrainOutcome out = run_training(cfg, resume, &std::cerr);
  const auto& last = out.history.back();
  std::cout << "epochs: " << out.history.size() << "  steps: " << last.steps << '\n'
            << "best epoch: " << out.best_epoch << "  macro_f1: " << percent(out.best_macro_f1) << '\n'
            << "checkpoint: " << out.model_path.string() << '\n';
  return 0;
}

Checkpoint open_checkpoint(const std::string& path) {
  if (!std::filesystem::is_regular_file(path)) throw UsageError("checkpoint not found: " + path);
  return load_checkpoint(path);
}

int cmd_eval(const Overrides& o, const std::string& ckpt_path, const std::string& dump_path) {
  const Checkpoint ck = open_checkpoint(ckpt_path);
  RunConfig saved = config_from_checkpoint(ck);
  RunConfig requested = saved;
  if (!o.config.empty()) requested = load_config(o);
  else o.apply(requested);
  const auto diff = architecture_diff(saved.to_map(), requested.to_map());
  if (!diff.empty()) {
    std::cerr << "error: config does not match checkpoint " << ckpt_path << '\n';
    for (const auto& line : diff) std::cerr << "  " << line << '\n';
    return kExitMismatch;
  }
  const std::filesystem::path dataset = o.dataset.empty() ? requested.test_path : std::filesystem::path(o.dataset);
  if (!std::filesystem::is_regular_file(dataset)) throw UsageError("dataset not found: " + dataset.string());
  apply_threads(requested);

  const MegaModel model = model_from_checkpoint(ck);
  const ParsedCorpus corpus = load_corpus(dataset, requested.format);
  const auto encoded = encode_all(corpus.examples, model.vocab());
  const Evaluation ev = evaluate(model, encoded);
  std::cout << "examples: " << ev.metrics.total << '\n'
            << "accuracy: " << percent(ev.metrics.accuracy) << '\n'
            << "macro_f1: " << percent(ev.metrics.macro_f1) << '\n';
  if (!dump_path.empty()) {
    std::ofstream dump(dump_path);
    if (!dump) throw UsageError("cannot write " + dump_path);
    for (const auto& p : ev.predictions) {
      nlohmann::json row = {{"id", p.source_id},
                            {"aspect", {p.aspect.begin, p.aspect.end}},
                            {"gold", polarity_name(p.gold)},
                            {"pred", polarity_name(p.predicted)},
                            {"probs", p.probs}};
      dump << row.dump() << '\n';
    }
  }
  return 0;
}

int cmd_predict(const std::string& ckpt_path, const std::string& sentence, const std::string& aspect) {
  const Checkpoint ck = open_checkpoint(ckpt_path);
  const MegaModel model = model_from_checkpoint(ck);
  const auto tokens = tokenize(sentence);
  const auto target = tokenize(aspect);
  if (tokens.empty() || target.empty()) throw UsageError("sentence and aspect must contain tokens");
  std::optional<Span> span;
  for (std::size_t i = 0; i + target.size() <= tokens.size() && !span; ++i) {
    if (std::equal(target.begin(), target.end(), tokens.begin() + static_cast<std::ptrdiff_t>(i))) {
      span = Span{i, i + target.size()};
    }
  }
  if (!span) throw UsageError("aspect '" + aspect + "' does not occur in the sentence");
  EncodedExample ex{model.vocab().encode(tokens), *span, Polarity::kNeutral, "cli"};
  const Tensor probs = model.forward(ex);
  const auto pred = static_cast<Polarity>(argmax(probs.data()));
  std::cout << polarity_name(pred) << '\n' << std::fixed << std::setprecision(4);
  for (std::size_t c = 0; c < kPolarityCount; ++c) {
    std::cout << "  " << polarity_name(static_cast<Polarity>(c)) << ' ' << probs[c] << '\n';
  }
  return 0;
}

int cmd_gradcheck(std::optional<double> corruption) {
  if (corruption) testing::set_adjoint_corruption(*corruption);
  const auto results = run_gradcheck_suites();
  std::vector<std::string> failed;
  std::fflush(stdout);
  for (const auto& r : results) {
    std::printf("%-14s max_rel_err %.3e  (%s[%zu], %zu coords, %.2fs)  %s\n", r.block.c_str(),
                r.report.max_relative_error, r.report.worst_parameter.c_str(), r.report.worst_index,
                r.report.coordinates, r.seconds, r.passed ? "ok" : "FAIL");
    if (!r.passed) failed.push_back(r.block);
  }
  if (failed.empty()) return 0;
  std::string names;
  for (const auto& f : failed) names += (names.empty() ? "" : ", ") + f;
  std::fprintf(stderr, "gradcheck failed: %s\n", names.c_str());
  return kExitFailure;
}

int cmd_inspect(const std::string& ckpt_path) {
  const Checkpoint ck = open_checkpoint(ckpt_path);
  const RunConfig cfg = config_from_checkpoint(ck);
  std::cout << "config:\n";
  for (const auto& [k, v] : cfg.to_map()) std::cout << "  " << k << " = " << v << '\n';
  std::cout << "parameters:\n";
  std::size_t total = 0;
  std::size_t trainable = 0;
  for (const auto& [name, t] : ck.tensors) {
    if (name.rfind("param/", 0) != 0) continue;
    const std::string param = name.substr(6);
    std::cout << "  " << std::left << std::setw(28) << param << std::setw(12) << to_string(t.shape())
              << t.size() << '\n';
    total += t.size();
    if (param != "embedding" || cfg.model.train_embeddings) trainable += t.size();
  }
  std::cout << "total: " << total << '\n' << "trainable: " << trainable << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Aspect sentiment classifier: train, evaluate and inspect models"};
  app.require_subcommand(1);

  Overrides train_o;
  bool resume = false;
  auto* train = app.add_subcommand("train", "Train a model from a config file");
  train->add_option("--config", train_o.config, "Run config")->required();
  train->add_option("--seed", train_o.seed, "Override the seed");
  train->add_option("--out", train_o.out, "Output directory");
  train->add_option("--dataset", train_o.dataset, "Override the training corpus path");
  train->add_flag("--resume", resume, "Continue from <out>/state.ckpt");
  add_model_flags(train, train_o);

  Overrides eval_o;
  std::string eval_ckpt, dump_path;
  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint");
  eval->add_option("--checkpoint", eval_ckpt, "Model checkpoint")->required();
  eval->add_option("--config", eval_o.config, "Config to check against the checkpoint");
  eval->add_option("--dataset", eval_o.dataset, "Corpus to evaluate (default: test_path)");
  eval->add_option("--predictions", dump_path, "Write per-example predictions as JSON lines");
  add_model_flags(eval, eval_o);

  std::string pred_ckpt, sentence, aspect;
  auto* predict = app.add_subcommand("predict", "Classify one sentence and aspect");
  predict->add_option("--checkpoint", pred_ckpt, "Model checkpoint")->required();
  predict->add_option("--sentence", sentence, "Sentence text")->required();
  predict->add_option("--aspect", aspect, "Aspect term, as it occurs in the sentence")->required();

  std::optional<double> corruption;
  auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference check of every gradient block");
  gradcheck->add_option("--corrupt-adjoint", corruption)->group("");

  std::string inspect_ckpt;
  auto* inspect = app.add_subcommand("inspect", "Print config and parameter census of a checkpoint");
  inspect->add_option("--checkpoint", inspect_ckpt, "Checkpoint")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train) return cmd_train(train_o, resume);
    if (*eval) return cmd_eval(eval_o, eval_ckpt, dump_path);
    if (*predict) return cmd_predict(pred_ckpt, sentence, aspect);
    if (*gradcheck) return cmd_gradcheck(corruption);
    if (*inspect) return cmd_inspect(inspect_ckpt);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInvalid;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitFailure;
}
