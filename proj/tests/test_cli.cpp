/* Copyright (c) 2026 The seqtrain Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License. */

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "seqtrain/binary_io.hpp"
#include "seqtrain/cli.hpp"
#include "seqtrain/engine.hpp"
#include "test_util.hpp"

using namespace seqtrain;

namespace {

struct Run {
  int code = 0;
  std::string out;
  std::string err;
};

Run cli(std::vector<std::string> args) {
  args.insert(args.begin(), "seqtrain");
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  argv.push_back(nullptr);
  testing::internal::CaptureStdout();
  testing::internal::CaptureStderr();
  Run r;
  r.code = run_cli(static_cast<int>(args.size()), argv.data());
  r.out = testing::internal::GetCapturedStdout();
  r.err = testing::internal::GetCapturedStderr();
  return r;
}

std::string write_config(const testutil::TempDir& dir, const std::string& extra = "") {
  const auto path = dir.file("cfg.json");
  std::ofstream(path) << R"({"task":"train","train":")" << testutil::synth(1, 4, 8, 5, 15, 3)
                      << R"(","dev":")" << testutil::synth(1, 4, 4, 5, 15, 4)
                      << R"(","chunk_size":8,"max_chunks_per_batch":4,"num_epochs":2,"learning_rate":0.01,)"
                      << extra << R"("network":)" << testutil::kBlstmNet << "}";
  return path;
}

std::size_t count_lines(const std::string& s, const std::string& prefix) {
  std::istringstream in(s);
  std::size_t n = 0;
  for (std::string line; std::getline(in, line);)
    if (line.rfind(prefix, 0) == 0) ++n;
  return n;
}

}  // namespace

TEST(Cli, TrainWritesCheckpointsAndLog) {
  testutil::TempDir dir("cli_train");
  const auto cfg = write_config(dir);
  const auto out = dir.file("out");
  const auto r = cli({cfg, "--out-dir", out});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(count_lines(r.out, "epoch "), 2u);
  for (const char* f : {"epoch1.rtnm", "epoch2.rtnm", "best.rtnm", "seqtrain.log"})
    EXPECT_TRUE(std::filesystem::exists(out + "/" + f)) << f;
  const auto log = read_file(out + "/seqtrain.log");
  EXPECT_EQ(count_lines(std::string(log.begin(), log.end()), "epoch "), 2u);
}

TEST(Cli, IdenticalInvocationsGiveIdenticalCheckpoints) {
  testutil::TempDir dir("cli_det");
  const auto cfg = write_config(dir);
  ASSERT_EQ(cli({cfg, "--out-dir", dir.file("a")}).code, 0);
  ASSERT_EQ(cli({cfg, "--out-dir", dir.file("b")}).code, 0);
  EXPECT_EQ(read_file(dir.file("a") + "/epoch2.rtnm"), read_file(dir.file("b") + "/epoch2.rtnm"));
}

TEST(Cli, OverridesBeatTheConfigFile) {
  testutil::TempDir dir("cli_over");
  const auto cfg = write_config(dir);
  const auto r = cli({cfg, "--set", "num_epochs=1", "--set", "num_workers=2", "--set", "sync_interval_batches=1",
                      "--out-dir", dir.file("o"), "--verbosity", "debug"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(count_lines(r.out, "epoch "), 1u);
  EXPECT_FALSE(std::filesystem::exists(dir.file("o") + "/epoch2.rtnm"));
  // --out-dir wins over an out_dir override.
  const auto r2 = cli({cfg, "--set", "num_epochs=1", "--set", "out_dir=" + dir.file("x"), "--out-dir", dir.file("y")});
  ASSERT_EQ(r2.code, 0) << r2.err;
  EXPECT_TRUE(std::filesystem::exists(dir.file("y") + "/epoch1.rtnm"));
  EXPECT_FALSE(std::filesystem::exists(dir.file("x")));
}

TEST(Cli, UsageAndConfigErrorsExitTwo) {
  testutil::TempDir dir("cli_err");
  const auto cfg = write_config(dir);
  const auto r = cli({cfg, "--set", "no_such_key=1"});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("no_such_key"), std::string::npos) << r.err;
  EXPECT_EQ(count_lines(r.err, "seqtrain:"), 1u);
  EXPECT_EQ(cli({dir.file("missing.json")}).code, 2);
  EXPECT_EQ(cli({}).code, 2);
  EXPECT_EQ(cli({cfg, "--verbosity", "loud"}).code, 2);
  EXPECT_EQ(cli({cfg, "--task", "dance"}).code, 2);
  EXPECT_EQ(cli({cfg, "--bogus-flag"}).code, 2);
  std::ofstream(dir.file("broken.json")) << "{not json";
  EXPECT_EQ(cli({dir.file("broken.json")}).code, 2);
}

TEST(Cli, RuntimeFailuresExitOne) {
  testutil::TempDir dir("cli_rt");
  const auto cfg = write_config(dir);
  // A huge learning rate drives plain SGD to a non-finite loss.
  const auto r = cli({cfg, "--set", "optimizer=sgd", "--set", "learning_rate=1e308", "--set", "num_epochs=5",
                      "--out-dir", dir.file("o")});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("non-finite"), std::string::npos) << r.err;
  EXPECT_EQ(cli({cfg, "--set", "train=" + dir.file("absent.rtnd"), "--out-dir", dir.file("o")}).code, 1);
}

TEST(Cli, EvalAndForwardTasks) {
  testutil::TempDir dir("cli_eval");
  const auto cfg = write_config(dir);
  ASSERT_EQ(cli({cfg, "--out-dir", dir.file("o")}).code, 0);
  const auto ckpt = dir.file("o") + "/best.rtnm";
  const auto eval_set = testutil::synth(1, 4, 4, 5, 15, 4);

  const auto r = cli({cfg, "--task", "eval", "--set", "eval=" + eval_set, "--set", "load=" + ckpt, "--out-dir", dir.file("e")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out.rfind("eval_ce ", 0), 0u) << r.out;

  // The eval set equals the dev set, so its error rate matches the best epoch's dev score.
  const auto c = load_checkpoint(ckpt);
  const auto data = open_dataset(eval_set, 0);
  auto [net, unused] = build_network(parse_network(c.network_json), c.input_dim, 1);
  const auto ev = evaluate(net, c.params, *data, 4);
  char expect[64];
  std::snprintf(expect, sizeof expect, "eval_ce %.6f", ev.loss_per_frame());
  EXPECT_EQ(r.out.rfind(expect, 0), 0u) << r.out;

  const auto acts = dir.file("acts.rtna");
  const auto f = cli({cfg, "--task", "forward", "--set", "eval=" + eval_set, "--set", "load=" + ckpt, "--set",
                      "output=" + acts, "--set", R"(forward_layers=["out"])", "--out-dir", dir.file("e")});
  ASSERT_EQ(f.code, 0) << f.err;
  EXPECT_NE(f.out.find("wrote " + acts), std::string::npos);
  const auto file = read_activations(acts);
  EXPECT_EQ(file.layer, "out");
  EXPECT_EQ(file.records.size(), data->size());

  EXPECT_EQ(cli({cfg, "--task", "eval", "--set", "eval=" + eval_set, "--out-dir", dir.file("e")}).code, 2);
}

TEST(Cli, ShippedConfigsParse) {
  for (const char* name : {"demo.json", "blstm_300.json"}) {
    const auto bytes = read_file(std::string(SEQTRAIN_SOURCE_DIR) + "/configs/" + name);
    const auto cfg = parse_config(std::string(bytes.begin(), bytes.end()));
    EXPECT_EQ(cfg.task, Task::train) << name;
    EXPECT_EQ(cfg.network.outputs, std::vector<std::string>{"out"}) << name;
  }
}
