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

#include "mega/pipeline.hpp"

#include <fstream>
#include <ostream>

namespace mega {

ParsedCorpus load_corpus(const std::filesystem::path& path, CorpusFormat format) {
  switch (format) {
    case CorpusFormat::kSemEval:
      return parse_semeval_xml(path);
    case CorpusFormat::kTwitter:
      return parse_twitter(path);
    case CorpusFormat::kInterchange: {
      std::ifstream in(path);
      if (!in) throw std::runtime_error("cannot open " + path.string());
      ParsedCorpus corpus;
      corpus.examples = read_interchange(in);
      return corpus;
    }
  }
  throw ContractError("load_corpus: unknown format");
}

Workspace prepare_workspace(const RunConfig& config) {
  Workspace ws;
  ws.train_corpus = load_corpus(config.train_path, config.format);
  ws.test_corpus = load_corpus(config.test_path, config.format);
  if (ws.train_corpus.examples.empty()) {
    throw std::runtime_error("no usable examples in " + config.train_path.string());
  }
  std::vector<AspectExample> all = ws.train_corpus.examples;
  all.insert(all.end(), ws.test_corpus.examples.begin(), ws.test_corpus.examples.end());
  ws.vocab = Vocab::build(all);
  const std::size_t dim = config.model.embed_dim;
  const std::uint64_t table_seed = config.train.seed;
  if (config.wordvecs_path.empty()) {
    ws.embedding.table = random_embeddings(ws.vocab.size(), dim, table_seed);
    ws.embedding.searchable = ws.vocab.size() - 2;
  } else {
    ws.embedding = load_wordvecs(config.wordvecs_path, ws.vocab, dim, table_seed);
  }
  ws.train = encode_all(ws.train_corpus.examples, ws.vocab);
  ws.test = encode_all(ws.test_corpus.examples, ws.vocab);
  return ws;
}

namespace {

void write_record(std::ostream& out, const EpochRecord& r) {
  out << to_json(r).dump() << '\n';
}

}  // namespace

TrainOutcome run_training(const RunConfig& config, bool resume, std::ostream* progress) {
  config.model.validate();
  Workspace ws = prepare_workspace(config);
  std::filesystem::create_directories(config.output_dir);
  const auto state_path = config.output_dir / "state.ckpt";
  const auto model_path = config.output_dir / "model.ckpt";
  const auto log_path = config.output_dir / "metrics.jsonl";

  MegaModel model(config.model, ws.vocab, ws.embedding.table, config.train.seed);
  Trainer trainer(model, config);
  if (resume && std::filesystem::exists(state_path)) {
    const Checkpoint state = load_checkpoint(state_path);
    const auto diff = architecture_diff(config_from_checkpoint(state).to_map(), config.to_map());
    if (!diff.empty()) throw ContractError("cannot resume: architecture differs (" + diff.front() + ")");
    trainer.restore(state);
  }

  // The log is rewritten from the restored history so a resumed run ends
  // with the same file as an uninterrupted one.
  std::ofstream log(log_path, std::ios::trunc);
  if (!log) throw std::runtime_error("cannot write " + log_path.string());
  for (const auto& r : trainer.history()) write_record(log, r);
  log.flush();

  std::size_t saved_best_epoch = trainer.best_epoch();
  trainer.fit(ws.train, ws.test, [&](const EpochRecord& r, const Trainer& t) {
    write_record(log, r);
    log.flush();
    if (progress) {
      *progress << "epoch " << r.epoch << " loss " << r.loss << " acc " << r.metrics.accuracy
                << " macro_f1 " << r.metrics.macro_f1 << '\n';
    }
    save_checkpoint(state_path, t.training_checkpoint());
    if (t.best_epoch() != saved_best_epoch) {
      save_checkpoint(model_path, t.best_checkpoint());
      saved_best_epoch = t.best_epoch();
    }
  });
  if (!std::filesystem::exists(model_path)) save_checkpoint(model_path, trainer.best_checkpoint());

  TrainOutcome out;
  out.history = trainer.history();
  out.best_macro_f1 = trainer.best_macro_f1();
  out.best_epoch = trainer.best_epoch();
  out.model_path = model_path;
  return out;
}

}  // namespace mega
