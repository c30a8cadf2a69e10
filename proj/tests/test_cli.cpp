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

#include <sys/wait.h>

#include <array>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <memory>
#include <sstream>

#include "json.hpp"
#include "test_support.hpp"

namespace {

namespace fs = std::filesystem;

struct Result {
  int code = -1;
  std::string output;  // stdout and stderr interleaved
};

Result cli(const std::string& args) {
  const std::string command = std::string(MEGA_CLI_PATH) + " " + args + " 2>&1";
  Result r;
  FILE* pipe = popen(command.c_str(), "r");
  if (!pipe) return r;
  std::array<char, 512> buf{};
  while (fgets(buf.data(), buf.size(), pipe)) r.output += buf.data();
  const int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("mega_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  fs::path write_config(const std::string& extra = "", const std::string& train = "",
                        const std::string& name = "run.cfg") {
    const fs::path path = dir_ / name;
    std::ofstream out(path);
    out << "# tiny run over the bundled fixture\n"
        << "embed_dim = 16\nd_model = 16\nstream_heads = 2\nfusion_heads = 2\n"
        << "batch_size = 4\nmax_epochs = 3\nseed = 3\n"
        << "train_path = " << (train.empty() ? mega::test::data_path("restaurants_small.xml").string() : train)
        << "\ntest_path = " << mega::test::data_path("restaurants_small.xml").string() << '\n'
        << "output_dir = " << (dir_ / "out").string() << '\n'
        << extra;
    return path;
  }

  fs::path dir_;
};

TEST_F(CliTest, MissingDatasetExitsTwoNamingPath) {
  const auto cfg = write_config("", "/nonexistent/restaurants_train.xml");
  const Result r = cli("train --config " + cfg.string());
  EXPECT_EQ(r.code, 2) << r.output;
  EXPECT_NE(r.output.find("/nonexistent/restaurants_train.xml"), std::string::npos) << r.output;
  EXPECT_FALSE(fs::exists(dir_ / "out" / "model.ckpt"));
}

TEST_F(CliTest, UnknownConfigKeyIsRejected) {
  const auto cfg = write_config("learning_rate = 0.1\n");
  const Result r = cli("train --config " + cfg.string());
  EXPECT_EQ(r.code, 2) << r.output;
  EXPECT_NE(r.output.find("learning_rate"), std::string::npos) << r.output;
}

TEST_F(CliTest, TrainIsSeedDeterministicAndEvalReproducesIt) {
  const auto cfg = write_config();
  const auto start = std::chrono::steady_clock::now();
  const Result a = cli("train --config " + cfg.string() + " --seed 7 --out " + (dir_ / "a").string());
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  ASSERT_EQ(a.code, 0) << a.output;
  EXPECT_LT(seconds, 30.0);
  const Result b = cli("train --config " + cfg.string() + " --seed 7 --out " + (dir_ / "b").string());
  ASSERT_EQ(b.code, 0) << b.output;
  const std::string log_a = slurp(dir_ / "a" / "metrics.jsonl");
  ASSERT_FALSE(log_a.empty());
  EXPECT_EQ(log_a, slurp(dir_ / "b" / "metrics.jsonl"));

  // Each line carries epoch, loss, acc, macro_f1.
  std::istringstream lines(log_a);
  double best_f1 = -1.0, best_acc = 0.0;
  for (std::string line; std::getline(lines, line);) {
    const auto j = nlohmann::json::parse(line);
    for (const char* key : {"epoch", "loss", "acc", "macro_f1"}) ASSERT_TRUE(j.contains(key)) << line;
    if (j["macro_f1"].get<double>() > best_f1) {
      best_f1 = j["macro_f1"].get<double>();
      best_acc = j["acc"].get<double>();
    }
  }

  const fs::path dump = dir_ / "pred.jsonl";
  const Result e = cli("eval --checkpoint " + (dir_ / "a" / "model.ckpt").string() + " --predictions " +
                       dump.string());
  ASSERT_EQ(e.code, 0) << e.output;
  char expect_acc[64], expect_f1[64];
  std::snprintf(expect_acc, sizeof expect_acc, "accuracy: %.2f", 100.0 * best_acc);
  std::snprintf(expect_f1, sizeof expect_f1, "macro_f1: %.2f", 100.0 * best_f1);
  EXPECT_NE(e.output.find(expect_acc), std::string::npos) << e.output;
  EXPECT_NE(e.output.find(expect_f1), std::string::npos) << e.output;

  std::ifstream rows(dump);
  std::string first;
  ASSERT_TRUE(std::getline(rows, first));
  const auto row = nlohmann::json::parse(first);
  for (const char* key : {"id", "aspect", "gold", "pred", "probs"}) EXPECT_TRUE(row.contains(key)) << first;
  EXPECT_EQ(row["probs"].size(), 3u);
}

TEST_F(CliTest, EvalRefusesMismatchedConfig) {
  const auto cfg = write_config("max_epochs = 1\n");
  ASSERT_EQ(cli("train --config " + cfg.string()).code, 0);
  const std::string ckpt = (dir_ / "out" / "model.ckpt").string();
  const Result r = cli("eval --checkpoint " + ckpt + " --pool whole_sentence");
  EXPECT_EQ(r.code, 3) << r.output;
  EXPECT_NE(r.output.find("pooling_scope: aspect_span -> whole_sentence"), std::string::npos) << r.output;
  EXPECT_EQ(cli("eval --checkpoint " + ckpt + " --config " + cfg.string()).code, 0);
}

TEST_F(CliTest, InspectCensusMatchesClosedForm) {
  const auto cfg = write_config("max_epochs = 1\n");
  ASSERT_EQ(cli("train --config " + cfg.string() + " --out " + (dir_ / "a").string()).code, 0);
  ASSERT_EQ(cli("train --config " + cfg.string() + " --out " + (dir_ / "b").string()).code, 0);
  const Result a = cli("inspect --checkpoint " + (dir_ / "a" / "model.ckpt").string());
  const Result b = cli("inspect --checkpoint " + (dir_ / "b" / "model.ckpt").string());
  ASSERT_EQ(a.code, 0) << a.output;
  auto census = [](const std::string& out) { return out.substr(out.find("parameters:")); };
  EXPECT_EQ(census(a.output), census(b.output));

  // Shape arithmetic for embed 16, d 16, H 2, k 4, BiLSTM hidden 8, 3 classes.
  const std::size_t e = 16, d = 16, h = 8, heads = 2, k = 4;
  const std::size_t mlstm = 4 * d * d + 2 * d * heads + 2 * heads + d;
  const std::size_t dyt = 1 + 2 * d;
  const std::size_t stream = dyt + d * d + d + k * d + d + mlstm;
  const std::size_t trainable = 2 * (e * 4 * h + h * 4 * h + 4 * h)  // encoder
                                + d * d + d + dyt                       // norm branch
                                + 2 * stream + mlstm + 3 * d * d + d    // streams, fusion
                                + d * 3 + 3;                            // head
  EXPECT_NE(a.output.find("trainable: " + std::to_string(trainable) + "\n"), std::string::npos) << a.output;

  const fs::path broken = dir_ / "broken.ckpt";
  std::string bytes = slurp(dir_ / "a" / "model.ckpt");
  bytes.resize(bytes.size() / 2);
  std::ofstream(broken, std::ios::binary) << bytes;
  EXPECT_NE(cli("inspect --checkpoint " + broken.string()).code, 0);
}

TEST_F(CliTest, PredictSingleSentence) {
  const auto cfg = write_config("max_epochs = 1\n");
  ASSERT_EQ(cli("train --config " + cfg.string()).code, 0);
  const std::string ckpt = (dir_ / "out" / "model.ckpt").string();
  const Result r = cli("predict --checkpoint " + ckpt + " --sentence 'The food was great.' --aspect food");
  ASSERT_EQ(r.code, 0) << r.output;
  EXPECT_TRUE(r.output.rfind("positive", 0) == 0 || r.output.rfind("neutral", 0) == 0 ||
              r.output.rfind("negative", 0) == 0)
      << r.output;
  EXPECT_EQ(cli("predict --checkpoint " + ckpt + " --sentence 'The food was great.' --aspect wine").code, 2);
}

TEST_F(CliTest, ResumeProducesSameLog) {
  const auto cfg = write_config();
  ASSERT_EQ(cli("train --config " + cfg.string() + " --out " + (dir_ / "full").string()).code, 0);
  const auto short_cfg = write_config("max_epochs = 1\n", "", "short.cfg");
  ASSERT_EQ(cli("train --config " + short_cfg.string() + " --out " + (dir_ / "part").string()).code, 0);
  // Stopped by its epoch budget; resume under the larger one.
  const Result r = cli("train --config " + cfg.string() + " --resume --out " + (dir_ / "part").string());
  ASSERT_EQ(r.code, 0) << r.output;
  EXPECT_EQ(slurp(dir_ / "full" / "metrics.jsonl"), slurp(dir_ / "part" / "metrics.jsonl"));
}

TEST(CliGradcheck, PassesAndNegativeControlFails) {
  const Result ok = cli("gradcheck");
  EXPECT_EQ(ok.code, 0) << ok.output;
  const Result bad = cli("gradcheck --corrupt-adjoint 0.01");
  EXPECT_NE(bad.code, 0);
  EXPECT_NE(bad.output.find("gradcheck failed: tensor_core"), std::string::npos) << bad.output;
}

}  // namespace
