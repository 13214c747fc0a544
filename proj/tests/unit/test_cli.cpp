/*
 * Copyright 2026 The csdet Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <doctest.h>

#include <sstream>

#include "binary_io.hpp"
#include "csdet/cli.hpp"
#include "test_util.hpp"

namespace csdet {
namespace {

struct Run {
  int code;
  std::string out, err;
};

Run run(std::vector<std::string> args) {
  args.insert(args.begin(), "csdet");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

TEST_CASE("usage errors") {
  auto r = run({"frobnicate"});
  CHECK(r.code == 2);
  CHECK(r.err.find("taxonomy-check") != std::string::npos);
  CHECK(run({}).code == 2);
  r = run({"train", "--data", "x"});
  CHECK(r.code == 2);
  CHECK(r.err.find("--taxonomy") != std::string::npos);
  CHECK(run({"eval", "--help"}).code == 0);
}

TEST_CASE("taxonomy-check") {
  const auto dir = testing::scratch_dir("cli_tax");
  write_file(dir / "good.tree", "cat\tanimal\ndog\tanimal\nanimal\troot\ncar\troot\n");
  auto r = run({"taxonomy-check", (dir / "good.tree").string()});
  CHECK(r.code == 0);
  CHECK(r.out.find("nodes 5") != std::string::npos);
  CHECK(r.out.find("leaves 3") != std::string::npos);
  CHECK(r.out.find("depth 2") != std::string::npos);
  CHECK(r.out.find("status ok") != std::string::npos);

  write_file(dir / "bad.tree", "a\tb\nb\ta\n");
  r = run({"taxonomy-check", (dir / "bad.tree").string()});
  CHECK(r.code == 1);
  CHECK(r.out.find("CycleDetected") != std::string::npos);
  CHECK(run({"taxonomy-check", (dir / "missing.tree").string()}).code == 1);
}

TEST_CASE("gen-data, train and eval end to end") {
  const auto dir = testing::scratch_dir("cli_e2e");
  WorldConfig wc = testing::small_world(8, 8, 4);
  write_file(dir / "world.json", world_config_to_json(wc));
  write_file(dir / "train.cfg", "total_epochs = 2\nlr_drop_epoch = 1\nwarmup_iters = 2\n");
  const std::string data = (dir / "data").string();
  auto r = run({"-q", "gen-data", "--config", (dir / "world.json").string(), "--out", data});
  REQUIRE(r.code == 0);
  CHECK(std::filesystem::exists(dir / "data" / "train" / "manifest.jsonl"));

  r = run({"-q", "train", "--data", data, "--taxonomy", data + "/taxonomy.tsv", "--config",
           (dir / "train.cfg").string(), "--out", (dir / "run").string(), "--seed", "3"});
  REQUIRE(r.code == 0);
  CHECK(std::filesystem::exists(dir / "run" / "log.csv"));
  CHECK(std::filesystem::exists(dir / "run" / "epoch1.ckpt"));
  CHECK(std::filesystem::exists(dir / "run" / "epoch2.ckpt"));
  CHECK(read_file(dir / "run" / "train.cfg").find("seed = 3") != std::string::npos);

  r = run({"eval", "--data", data, "--taxonomy", data + "/taxonomy.tsv", "--ckpt",
           (dir / "run" / "epoch2.ckpt").string(), "--out", (dir / "eval").string(),
           "--proposal-counts", "5,10"});
  REQUIRE(r.code == 0);
  CHECK(r.out.find("mAP@0.5") != std::string::npos);
  const std::string table = read_file(dir / "eval" / "proposal_table.csv");
  CHECK(table.find("\n5,") != std::string::npos);
  CHECK(table.find("\n10,") != std::string::npos);

  r = run({"eval", "--data", data, "--taxonomy", data + "/taxonomy.tsv", "--ckpt",
           (dir / "run" / "epoch2.ckpt").string(), "--out", (dir / "eval").string(),
           "--proposal-counts", "10,5"});
  CHECK(r.code == 1);
  r = run({"train", "--data", (dir / "nowhere").string(), "--taxonomy", data + "/taxonomy.tsv",
           "--out", (dir / "run2").string()});
  CHECK(r.code == 1);
  CHECK(r.err.find("IoError") != std::string::npos);
}

}  // namespace
}  // namespace csdet
