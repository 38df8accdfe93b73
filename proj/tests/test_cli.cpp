/**
 * Copyright 2026 The Mugaze Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <string>

#include "mugaze/cli.hpp"

namespace fs = std::filesystem;
using mugaze::cli::run_command;

namespace {

fs::path temp_root() {
  const fs::path dir = fs::temp_directory_path() / "mugaze_cli_test";
  return dir;
}

}  // namespace

class CliFlow : public ::testing::Test {
 protected:
  void SetUp() override {
    fs::remove_all(temp_root());
    fs::create_directories(temp_root());
  }
  void TearDown() override { fs::remove_all(temp_root()); }
};

TEST_F(CliFlow, GenTrainEvalInfer) {
  const std::string ds = (temp_root() / "ds").string();
  const std::string run = (temp_root() / "run").string();

  ASSERT_EQ(run_command({"gen-synth", "--n", "120", "--pos-frac", "0.5",
                         "--seed", "3", "--out", ds}),
            0);
  EXPECT_TRUE(fs::exists(fs::path(ds) / "manifest.json"));
  EXPECT_TRUE(fs::exists(fs::path(ds) / "annotations.jsonl"));
  EXPECT_TRUE(fs::exists(fs::path(ds) / "patches.bin"));

  ASSERT_EQ(run_command({"train", "--data", ds, "--out", run, "--epochs", "1",
                         "--batch", "16", "--seed", "1", "--val-frac", "0.1",
                         "--test-frac", "0.2"}),
            0);
  EXPECT_TRUE(fs::exists(fs::path(run) / "checkpoint.bin"));
  EXPECT_TRUE(fs::exists(fs::path(run) / "config.json"));
  EXPECT_TRUE(fs::exists(fs::path(run) / "train_log.jsonl"));

  // one log line per step plus validation records
  {
    std::ifstream log(fs::path(run) / "train_log.jsonl");
    std::string line;
    std::size_t lines = 0;
    while (std::getline(log, line)) ++lines;
    EXPECT_GE(lines, 5u);  // 84 train samples / 16 = 5 steps
  }

  const std::string ckpt = (fs::path(run) / "checkpoint.bin").string();
  EXPECT_EQ(run_command({"eval", "--data", ds, "--checkpoint", ckpt,
                         "--split", "test"}),
            0);
  EXPECT_EQ(run_command({"infer", "--data", ds, "--checkpoint", ckpt,
                         "--index", "0"}),
            0);
}

TEST_F(CliFlow, TrainIsReproducibleAcrossInvocations) {
  const std::string ds = (temp_root() / "ds").string();
  ASSERT_EQ(run_command({"gen-synth", "--n", "80", "--pos-frac", "0.5",
                         "--seed", "4", "--out", ds}),
            0);
  const std::string run1 = (temp_root() / "r1").string();
  const std::string run2 = (temp_root() / "r2").string();
  ASSERT_EQ(run_command({"train", "--data", ds, "--out", run1, "--epochs",
                         "1", "--batch", "16", "--seed", "11"}),
            0);
  ASSERT_EQ(run_command({"train", "--data", ds, "--out", run2, "--epochs",
                         "1", "--batch", "16", "--seed", "11"}),
            0);
  std::ifstream a(fs::path(run1) / "checkpoint.bin", std::ios::binary);
  std::ifstream b(fs::path(run2) / "checkpoint.bin", std::ios::binary);
  const std::string ba((std::istreambuf_iterator<char>(a)),
                       std::istreambuf_iterator<char>());
  const std::string bb((std::istreambuf_iterator<char>(b)),
                       std::istreambuf_iterator<char>());
  ASSERT_FALSE(ba.empty());
  EXPECT_EQ(ba, bb);
}

TEST_F(CliFlow, UnknownFlagRejected) {
  EXPECT_NE(run_command({"gen-synth", "--n", "10", "--out",
                         (temp_root() / "x").string(), "--bogus-flag"}),
            0);
  EXPECT_NE(run_command({"definitely-not-a-command"}), 0);
}

TEST_F(CliFlow, MissingDatasetIsError) {
  EXPECT_NE(run_command({"train", "--data",
                         (temp_root() / "nope").string(), "--out",
                         (temp_root() / "run").string()}),
            0);
}

TEST_F(CliFlow, GradcheckPasses) {
  EXPECT_EQ(run_command({"gradcheck", "--seed", "1"}), 0);
}

TEST_F(CliFlow, ConfigFileProvidesDefaultsFlagsWin) {
  const std::string ds = (temp_root() / "ds").string();
  ASSERT_EQ(run_command({"gen-synth", "--n", "60", "--pos-frac", "0.5",
                         "--seed", "5", "--out", ds}),
            0);
  const fs::path cfg_path = temp_root() / "run.cfg";
  {
    std::ofstream os(cfg_path);
    os << "[train]\n";
    os << "data=\"" << ds << "\"\n";
    os << "epochs=1\n";
    os << "batch=16\n";
    os << "seed=21\n";
    os << "out=\"" << (temp_root() / "cfg_run").string() << "\"\n";
  }
  ASSERT_EQ(run_command({"--config", cfg_path.string(), "train", "--seed",
                         "22"}),
            0);
  std::ifstream snap(temp_root() / "cfg_run" / "config.json");
  const std::string text((std::istreambuf_iterator<char>(snap)),
                         std::istreambuf_iterator<char>());
  EXPECT_NE(text.find("\"seed\": 22"), std::string::npos);
  EXPECT_NE(text.find("\"epochs\": 1"), std::string::npos);
}
