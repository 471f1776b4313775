/*
 * Copyright 2026 The ARNN Authors.
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

// Runs the arnn executable end to end in scratch directories.

#include <sys/wait.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <gtest/gtest.h>
#include <json.hpp>

#ifndef ARNN_CLI
#error "ARNN_CLI must name the arnn executable"
#endif

namespace {

namespace fs = std::filesystem;

struct Run {
  int code = -1;
  std::string out;
};

Run run(const std::string& args) {
  const std::string cmd = std::string(ARNN_CLI) + " " + args + " 2>&1";
  Run r;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) return r;
  char buf[4096];
  while (std::fgets(buf, sizeof buf, pipe)) r.out += buf;
  const int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("arnn_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string out() const { return " --out " + dir_.string(); }

  /// Small synthetic corpus, preprocessed.
  void prepare() {
    ASSERT_EQ(run("synth --seed 3 --set sessions=240" + out()).code, 0);
    const auto r = run("preprocess --config " + (dir_ / "preprocess.conf").string() + out());
    ASSERT_EQ(r.code, 0) << r.out;
  }

  std::string train_args(const std::string& stage) const {
    return "train --stage " + stage + " --profile synth --seed 5 --set epochs=1" + out();
  }

  fs::path dir_;
};

TEST_F(Cli, FullProtocolAndRecommend) {
  prepare();
  for (const char* stage : {"gru", "pnn", "merge"}) {
    const auto r = run(train_args(stage));
    ASSERT_EQ(r.code, 0) << r.out;
    EXPECT_TRUE(fs::exists(dir_ / (std::string(stage) + ".ckpt")));
    EXPECT_NE(r.out.find("best_epoch"), std::string::npos);
  }
  const auto merge = nlohmann::json::parse(slurp(dir_ / "merge.ckpt"));
  EXPECT_TRUE(merge.at("references").contains("gru"));
  EXPECT_TRUE(merge.at("references").contains("pnn"));

  const auto eval = run("evaluate --k 20" + out());
  ASSERT_EQ(eval.code, 0) << eval.out;
  const auto report = slurp(dir_ / "report.tsv");
  for (const char* system : {"itemknn", "gru", "pnn", "arnn"}) {
    EXPECT_NE(report.find(std::string("\n") + system + "\t"), std::string::npos) << system;
  }

  const auto rec = run("recommend --k 1000" + out() + " item000 'item006@field0=c1'");
  ASSERT_EQ(rec.code, 0) << rec.out;
  // Header plus one row per vocabulary item: k is clamped.
  std::size_t lines = 0;
  for (char c : rec.out) lines += c == '\n';
  const auto train = nlohmann::json::parse(slurp(dir_ / "train.json"));
  EXPECT_EQ(lines, train.at("schema").at("items").size() + 1);

  const auto unknown = run("recommend" + out() + " item000 nosuchitem alsomissing");
  EXPECT_EQ(unknown.code, 3);
  EXPECT_NE(unknown.out.find("nosuchitem, alsomissing"), std::string::npos) << unknown.out;
}

TEST_F(Cli, SameSeedSameHistory) {
  prepare();
  ASSERT_EQ(run(train_args("gru")).code, 0);
  const auto first = slurp(dir_ / "gru_history.tsv");
  const auto ckpt = slurp(dir_ / "gru.ckpt");
  ASSERT_EQ(run(train_args("gru")).code, 0);
  EXPECT_EQ(slurp(dir_ / "gru_history.tsv"), first);
  EXPECT_EQ(slurp(dir_ / "gru.ckpt"), ckpt);
}

TEST_F(Cli, MergeWithoutPretrainingIsAPrerequisiteError) {
  prepare();
  const auto r = run(train_args("merge"));
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.out.find("gru.ckpt"), std::string::npos) << r.out;
}

TEST_F(Cli, DivergenceExitsWithFour) {
  prepare();
  const auto r = run(train_args("gru") + " --set learning_rate=1e300");
  EXPECT_EQ(r.code, 4) << r.out;
  EXPECT_TRUE(fs::exists(dir_ / "gru.ckpt"));
}

TEST_F(Cli, ConfigErrorsExitWithTwo) {
  EXPECT_EQ(run("train --stage gru --set no_such_key=1" + out()).code, 2);
  EXPECT_EQ(run("train --stage everything" + out()).code, 2);
  EXPECT_EQ(run("train --stage gru --profile imdb" + out()).code, 2);
  EXPECT_EQ(run("train --stage gru --set batch_lanes=1" + out()).code, 2);
  EXPECT_EQ(run("frobnicate").code, 2);
  EXPECT_EQ(run("preprocess --config " + (dir_ / "missing.conf").string()).code, 2);
  EXPECT_EQ(run("--help").code, 0);
}

TEST_F(Cli, DataErrorsExitWithThree) {
  std::ofstream(dir_ / "bad.tsv") << "user_id\titem_id\ttimestamp\nu\ta\tyesterday\n";
  const auto r = run("preprocess --set raw_path=" + (dir_ / "bad.tsv").string() + out());
  EXPECT_EQ(r.code, 3);
  EXPECT_NE(r.out.find("line 2"), std::string::npos) << r.out;
  EXPECT_EQ(run("train --stage gru --profile synth" + out()).code, 3);
}

TEST_F(Cli, PreprocessReportsGeneratorCounts) {
  ASSERT_EQ(run("synth --seed 4 --set sessions=300" + out()).code, 0);
  const auto r = run("preprocess --config " + (dir_ / "preprocess.conf").string() + out());
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("sessions\t300"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("context_fields\t6"), std::string::npos) << r.out;
}

}  // namespace
