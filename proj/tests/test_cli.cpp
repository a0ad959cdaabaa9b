// Copyright 2026 The mxcast Authors
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

// End-to-end tests driving the built `mxcast` binary.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "mxcast/config.hpp"

namespace fs = std::filesystem;

namespace {

const std::string kBin = MXCAST_BIN;

struct TempDir {
  fs::path path;
  TempDir()
  {
    path = fs::temp_directory_path() / ("mxcast_cli_" + std::to_string(std::rand()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string file(const std::string & name) const { return (path / name).string(); }
};

int run(const std::string & args, const std::string & env = "")
{
  const std::string cmd = env + kBin + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

std::string slurp(const std::string & path)
{
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("synth is deterministic for a fixed seed")
{
  TempDir dir;
  const auto a = dir.file("a.traj");
  const auto b = dir.file("b.traj");
  REQUIRE(run("synth --scenario linear --episodes 3 --seed 1 --out " + a) == 0);
  REQUIRE(run("synth --scenario linear --episodes 3 --seed 1 --out " + b) == 0);
  CHECK(slurp(a) == slurp(b));
  REQUIRE(run("synth --scenario group_conversation --members 4 --episodes 2 --seed 2 --out " +
              dir.file("g.traj")) == 0);
}

TEST_CASE("config round-trips through its file format")
{
  mxcast::config::RunConfig cfg;
  cfg.hidden = 24;
  cfg.lr = 0.00125;
  cfg.variant = "bd";
  cfg.seed = 987654321;
  TempDir dir;
  const auto path = dir.file("run.cfg");
  mxcast::config::save_config(path, cfg);
  const auto back = mxcast::config::load_config(path);
  CHECK(back == cfg);
}

TEST_CASE("flag > config file > default precedence")
{
  TempDir dir;
  mxcast::config::RunConfig file_cfg;
  file_cfg.episodes = 5;
  file_cfg.seed = 111;
  const auto cfg_path = dir.file("run.cfg");
  mxcast::config::save_config(cfg_path, file_cfg);

  // File value applies when no flag is given.
  const auto a = dir.file("a.traj");
  REQUIRE(run("synth --config " + cfg_path + " --scenario linear --out " + a) == 0);
  const auto direct = dir.file("d.traj");
  REQUIRE(run("synth --scenario linear --episodes 5 --seed 111 --out " + direct) == 0);
  CHECK(slurp(a) == slurp(direct));

  // Flag wins over the file.
  const auto b = dir.file("b.traj");
  REQUIRE(run("synth --config " + cfg_path + " --scenario linear --seed 222 --out " + b) == 0);
  const auto direct2 = dir.file("d2.traj");
  REQUIRE(run("synth --scenario linear --episodes 5 --seed 222 --out " + direct2) == 0);
  CHECK(slurp(b) == slurp(direct2));
}

TEST_CASE("MXCAST_SEED is the seed fallback")
{
  TempDir dir;
  const auto a = dir.file("a.traj");
  const auto b = dir.file("b.traj");
  REQUIRE(run("synth --scenario linear --episodes 2 --out " + a, "MXCAST_SEED=777 ") == 0);
  REQUIRE(run("synth --scenario linear --episodes 2 --seed 777 --out " + b) == 0);
  CHECK(slurp(a) == slurp(b));
  // An explicit flag beats the environment.
  const auto c = dir.file("c.traj");
  REQUIRE(run("synth --scenario linear --episodes 2 --seed 9 --out " + c,
              "MXCAST_SEED=777 ") == 0);
  const auto d = dir.file("d.traj");
  REQUIRE(run("synth --scenario linear --episodes 2 --seed 9 --out " + d) == 0);
  CHECK(slurp(c) == slurp(d));
}

TEST_CASE("documented exit codes")
{
  TempDir dir;
  CHECK(run("definitely-not-a-command") == 2);
  CHECK(run("train --data missing.traj --checkpoint x.ckpt") == 3);

  // A malformed data file parses with code 3.
  const auto bad = dir.file("bad.traj");
  std::ofstream(bad) << "# mxcast trajectory v1\n0\t1\toops\t0\t0\n";
  CHECK(run("analyze --data " + bad) == 3);

  // Gradcheck's negative-control hook fails with code 5.
  CHECK(run("gradcheck --seed 3 --self-test-corrupt") == 5);
}

TEST_CASE("train, evaluate and forecast: end-to-end determinism")
{
  TempDir dir;
  const auto traj = dir.file("train.traj");
  REQUIRE(run("synth --scenario turn_with_head_lead --episodes 8 --seed 4 --out " + traj) == 0);

  const std::string common =
    " --data " + traj + " --hidden 12 --grid-cells 8 --cell-size 0.5 --epochs 4 --seed 5"
    " --threads 1";
  const auto ck1 = dir.file("m1.ckpt");
  const auto ck2 = dir.file("m2.ckpt");
  REQUIRE(run("train" + common + " --checkpoint " + ck1 + " --loss-log " + dir.file("l1.csv")) ==
          0);
  REQUIRE(run("train" + common + " --checkpoint " + ck2 + " --loss-log " + dir.file("l2.csv")) ==
          0);
  CHECK(slurp(ck1) == slurp(ck2));
  CHECK(slurp(dir.file("l1.csv")) == slurp(dir.file("l2.csv")));

  const auto r1 = dir.file("r1.txt");
  const auto r2 = dir.file("r2.txt");
  REQUIRE(run("evaluate --checkpoint " + ck1 + " --data " + traj + " --out " + r1) == 0);
  REQUIRE(run("evaluate --checkpoint " + ck1 + " --data " + traj + " --out " + r2) == 0);
  CHECK(slurp(r1) == slurp(r2));

  // --noise-sigma 0 matches the flag omitted entirely.
  const auto r3 = dir.file("r3.txt");
  REQUIRE(run("evaluate --checkpoint " + ck1 + " --data " + traj + " --noise-sigma 0 --out " +
              r3) == 0);
  CHECK(slurp(r3) == slurp(r1));

  const auto pred = dir.file("pred.tsv");
  REQUIRE(run("forecast --checkpoint " + ck1 + " --data " + traj + " --out " + pred) == 0);
  const std::string tsv = slurp(pred);
  CHECK(tsv.find("ped_id\tframe\tpred_x") == 0);

  // Counterfactual forecasts run and differ from the unmodified ones.
  const auto cf = dir.file("cf.tsv");
  REQUIRE(run("forecast --checkpoint " + ck1 + " --data " + traj +
              " --counterfactual-deg 180 --out " + cf) == 0);
  CHECK(slurp(cf) != tsv);
}

TEST_CASE("vanilla trains on a position-only file")
{
  TempDir dir;
  const auto traj = dir.file("pos.traj");
  std::ofstream out(traj);
  out << "# mxcast trajectory v1\n";
  for (int ep = 0; ep < 3; ++ep) {
    for (int k = 0; k < 20; ++k) {
      out << ep * 1000 + k << "\t" << ep + 1 << "\t" << 0.3 * k << "\t" << 0.1 * ep << "\n";
    }
  }
  out.close();
  const auto ck = dir.file("v.ckpt");
  CHECK(run("train --variant vanilla --data " + traj + " --checkpoint " + ck +
            " --hidden 8 --epochs 2 --seed 1") == 0);
  // A head-dependent variant refuses the same file.
  CHECK(run("train --variant full --data " + traj + " --checkpoint " + dir.file("f.ckpt") +
            " --hidden 8 --epochs 2 --seed 1") == 3);
}

TEST_CASE("resumed training continues the loss curve without a jump")
{
  TempDir dir;
  const auto traj = dir.file("train.traj");
  REQUIRE(run("synth --scenario linear --episodes 6 --seed 8 --out " + traj) == 0);

  const std::string base =
    " --data " + traj + " --hidden 10 --grid-cells 8 --cell-size 0.5 --seed 3 --threads 1";
  const auto straight_ck = dir.file("s.ckpt");
  REQUIRE(run("train" + base + " --epochs 6 --checkpoint " + straight_ck + " --loss-log " +
              dir.file("s.csv")) == 0);

  const auto resumed_ck = dir.file("r.ckpt");
  REQUIRE(run("train" + base + " --epochs 3 --checkpoint " + resumed_ck + " --loss-log " +
              dir.file("r.csv")) == 0);
  REQUIRE(run("train" + base + " --epochs 3 --resume --checkpoint " + resumed_ck +
              " --loss-log " + dir.file("r.csv")) == 0);

  // The resumed run reproduces the uninterrupted checkpoint bit for bit, so
  // the loss curve continues without any jump at the boundary.
  CHECK(slurp(resumed_ck) == slurp(straight_ck));
  CHECK(slurp(dir.file("r.csv")) == slurp(dir.file("s.csv")));
}

TEST_CASE("analyze emits the lead structure of turn scenes")
{
  TempDir dir;
  const auto traj = dir.file("turn.traj");
  REQUIRE(run("synth --scenario turn_with_head_lead --lead 3 --episodes 20 --seed 6 --out " +
              traj) == 0);
  const auto report = dir.file("rep.txt");
  REQUIRE(run("analyze --data " + traj + " --min-speed 0.45 --out " + report + " --csv " +
              dir.file("rep.csv")) == 0);
  const std::string text = slurp(report);
  CHECK(text.find("overall_circular_correlation") != std::string::npos);
}
