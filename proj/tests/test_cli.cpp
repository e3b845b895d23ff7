// Copyright (c) 2026 The PointHR Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "cli.hpp"
#include "pointhr/config.hpp"
#include "pointhr/io.hpp"
#include "pointhr/synthetic.hpp"

namespace pointhr::cli {
namespace {

namespace fs = std::filesystem;

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run run(std::vector<std::string> args) {
  args.insert(args.begin(), "pointhr");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out;
  std::ostringstream err;
  const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("pointhr_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::create_directories(dir_);
    save_cloud(room_cloud(16, 2), path("cloud.txt"));
  }
  void TearDown() override { fs::remove_all(dir_); }
  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  fs::path dir_;
};

TEST_F(CliTest, InferWritesOneLabelPerPoint) {
  const auto r = run({"infer", "--config", "T", "--input", path("cloud.txt"), "--seed", "1", "--output",
                      path("labels.txt")});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  std::istringstream labels(slurp(path("labels.txt")));
  int n = 0;
  for (int label; labels >> label; ++n) {
    EXPECT_GE(label, 0);
    EXPECT_LT(label, 20);
  }
  EXPECT_EQ(n, 16);
}

TEST_F(CliTest, InferIsByteDeterministic) {
  for (const char* name : {"a", "b"}) {
    ASSERT_EQ(run({"infer", "--config", "T", "--input", path("cloud.txt"), "--seed", "4", "--output",
                   path(std::string(name) + ".labels"), "--logits", path(std::string(name) + ".logits")})
                  .code,
              kExitOk);
  }
  EXPECT_EQ(slurp(path("a.labels")), slurp(path("b.labels")));
  EXPECT_EQ(slurp(path("a.logits")), slurp(path("b.logits")));
}

TEST_F(CliTest, NoCacheMatchesCached) {
  ASSERT_EQ(run({"infer", "--config", "T", "--input", path("cloud.txt"), "--seed", "4", "--output",
                 path("cached.labels"), "--logits", path("cached.logits")})
                .code,
            kExitOk);
  ASSERT_EQ(run({"infer", "--config", "T", "--input", path("cloud.txt"), "--seed", "4", "--output",
                 path("fly.labels"), "--logits", path("fly.logits"), "--no-cache"})
                .code,
            kExitOk);
  EXPECT_EQ(slurp(path("cached.labels")), slurp(path("fly.labels")));
  EXPECT_EQ(slurp(path("cached.logits")), slurp(path("fly.logits")));
}

TEST_F(CliTest, InferFromWeightFileMatchesSeed) {
  ASSERT_EQ(run({"init", "--config", "T", "--seed", "4", "--output", path("w.phrw")}).code, kExitOk);
  ASSERT_EQ(run({"infer", "--config", "T", "--input", path("cloud.txt"), "--weights", path("w.phrw"), "--output",
                 path("file.labels")})
                .code,
            kExitOk);
  ASSERT_EQ(run({"infer", "--config", "T", "--input", path("cloud.txt"), "--seed", "4", "--output",
                 path("seed.labels")})
                .code,
            kExitOk);
  EXPECT_EQ(slurp(path("file.labels")), slurp(path("seed.labels")));
}

TEST_F(CliTest, UsageErrorsExitTwo) {
  EXPECT_EQ(run({"infer", "--config", "T", "--input", path("cloud.txt"), "--seed", "1", "--weights", "w",
                 "--output", path("x")})
                .code,
            kExitUsage);
  EXPECT_EQ(run({"infer", "--config", "T", "--input", path("cloud.txt"), "--output", path("x")}).code, kExitUsage);
  EXPECT_EQ(run({"infer", "--config", "T", "--input", path("cloud.txt"), "--seed", "1", "--output", path("x"),
                 "--operator", "conv"})
                .code,
            kExitUsage);
  EXPECT_EQ(run({"gradcheck", "--operator", "conv"}).code, kExitUsage);
  EXPECT_EQ(run({"oracle", "--op", "kdtree"}).code, kExitUsage);
  EXPECT_EQ(run({"frobnicate"}).code, kExitUsage);
  EXPECT_EQ(run({}).code, kExitUsage);
}

TEST_F(CliTest, DataErrorsExitOne) {
  std::ofstream(path("bad.txt")) << "0 0\n";
  const auto r = run({"infer", "--config", "T", "--input", path("bad.txt"), "--seed", "1", "--output", path("x")});
  EXPECT_EQ(r.code, kExitRuntime);
  EXPECT_NE(r.err.find("line 1: expected ≥3 fields"), std::string::npos) << r.err;
  EXPECT_EQ(run({"infer", "--config", "nope.cfg", "--input", path("cloud.txt"), "--seed", "1", "--output",
                 path("x")})
                .code,
            kExitRuntime);
  std::ofstream(path("junk.phrw")) << "junk";
  EXPECT_EQ(run({"infer", "--config", "T", "--input", path("cloud.txt"), "--weights", path("junk.phrw"),
                 "--output", path("x")})
                .code,
            kExitRuntime);
}

TEST_F(CliTest, ConfigFileIsAccepted) {
  std::ofstream(path("tiny.cfg")) << format_config(preset("T"));
  EXPECT_EQ(run({"infer", "--config", path("tiny.cfg"), "--input", path("cloud.txt"), "--seed", "1", "--output",
                 path("x")})
                .code,
            kExitOk);
}

TEST_F(CliTest, ParamsReportsLargeCount) {
  const auto r = run({"params", "--config", "L"});
  ASSERT_EQ(r.code, kExitOk);
  const auto pos = r.out.find("parameters: ");
  ASSERT_NE(pos, std::string::npos);
  const double count = std::stod(r.out.substr(pos + 12));
  EXPECT_GT(count, 0.7 * 7.1e6);
  EXPECT_LT(count, 1.3 * 7.1e6);
  EXPECT_NE(r.out.find("flops assumption"), std::string::npos);
}

TEST_F(CliTest, OracleReportsZeroMismatches) {
  for (const char* op : {"knn", "fps", "grid"}) {
    const auto r = run({"oracle", "--op", op, "--points", "512", "--seed", "9"});
    EXPECT_EQ(r.code, kExitOk) << op;
    EXPECT_NE(r.out.find("mismatches: 0"), std::string::npos) << r.out;
  }
}

TEST_F(CliTest, GradcheckPrintsVerdict) {
  const auto r = run({"gradcheck", "--operator", "linear", "--seed", "1"});
  EXPECT_EQ(r.code, kExitOk);
  EXPECT_NE(r.out.find("max relative error"), std::string::npos);
  EXPECT_NE(r.out.find("PASS"), std::string::npos);
}

TEST_F(CliTest, BenchPrintsBothModes) {
  const auto r = run({"bench", "--config", "T", "--synthetic", "800", "--repeat", "3", "--seed", "1"});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  for (const char* key : {"mode=cached", "mode=on_the_fly", "median_ms=", "logits: identical"}) {
    EXPECT_NE(r.out.find(key), std::string::npos) << key;
  }
  EXPECT_EQ(run({"bench", "--config", "T", "--synthetic", "800", "--repeat", "2"}).code, kExitUsage);
}

TEST_F(CliTest, SynthWritesReadableCloud) {
  ASSERT_EQ(run({"synth", "--points", "50", "--seed", "3", "--output", path("s.txt")}).code, kExitOk);
  EXPECT_EQ(read_cloud(path("s.txt")).size(), 50u);
}

}  // namespace
}  // namespace pointhr::cli
