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

#include <sstream>

#include <gtest/gtest.h>

#include "arnn/config.hpp"

namespace arnn {
namespace {

RunConfig parse(const std::string& text) {
  std::istringstream in(text);
  return RunConfig::parse(in, "test.conf");
}

TEST(RunConfig, ParsesAssignmentsAndComments) {
  const auto cfg = parse("# header\nseed = 7\n\nprofile=synth  # trailing\nitem_coverage=0.5\n");
  EXPECT_EQ(cfg.get_int("seed", 0), 7);
  EXPECT_EQ(cfg.get_string("profile", ""), "synth");
  EXPECT_EQ(cfg.get_double("item_coverage", 1.0), 0.5);
  EXPECT_FALSE(cfg.has("k"));
  EXPECT_EQ(cfg.get_size("k", 20), 20u);
}

TEST(RunConfig, LineNumberedErrors) {
  try {
    parse("seed=1\nnonsense\n");
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("test.conf:2"), std::string::npos) << e.what();
  }
}

TEST(RunConfig, UnknownKeysRejected) {
  EXPECT_THROW(parse("learning_rat=0.1\n"), ConfigError);
  RunConfig cfg;
  EXPECT_THROW(cfg.set_assignment("bogus=1"), ConfigError);
  EXPECT_THROW(cfg.set_assignment("seed"), ConfigError);
}

TEST(RunConfig, LaterAssignmentsWin) {
  auto cfg = parse("epochs=3\n");
  cfg.set_assignment("epochs = 9");
  EXPECT_EQ(cfg.get_size("epochs", 0), 9u);
}

TEST(RunConfig, TypedGettersValidate) {
  const auto cfg = parse("seed=abc\nepochs=-1\nlearning_rate=0.1x\ncontext_dependent=maybe\n");
  EXPECT_THROW(cfg.get_int("seed", 0), ConfigError);
  EXPECT_THROW(cfg.get_size("epochs", 0), ConfigError);
  EXPECT_THROW(cfg.get_double("learning_rate", 0), ConfigError);
  EXPECT_THROW(cfg.get_bool("context_dependent", true), ConfigError);
  EXPECT_THROW(cfg.require("raw_path"), ConfigError);
}

TEST(RunConfig, BooleansAndDelimiters) {
  const auto cfg = parse("context_dependent=no\ndelimiter=tab\nmulti_delimiter=;\n");
  EXPECT_FALSE(cfg.get_bool("context_dependent", true));
  EXPECT_EQ(cfg.get_delimiter("delimiter", ','), '\t');
  EXPECT_EQ(cfg.get_delimiter("multi_delimiter", '|'), ';');
  RunConfig other;
  other.set("delimiter", "comma");
  EXPECT_EQ(other.get_delimiter("delimiter", '\t'), ',');
  other.set("delimiter", "ab");
  EXPECT_THROW(other.get_delimiter("delimiter", '\t'), ConfigError);
}

TEST(Errors, ExitCodes) {
  EXPECT_EQ(ConfigError("x").exit_code(), ExitCode::kConfigError);
  EXPECT_EQ(DataError("x").exit_code(), ExitCode::kDataError);
  EXPECT_EQ(DimensionError("x").exit_code(), ExitCode::kDataError);
  EXPECT_EQ(NumericError("x").exit_code(), ExitCode::kNumericDivergence);
  EXPECT_EQ(static_cast<int>(ExitCode::kNumericDivergence), 4);
}

}  // namespace
}  // namespace arnn
