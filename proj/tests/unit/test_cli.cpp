/*
 * synrecon : synergistic PET/CT reconstruction with multibranch VAE priors
 *
 * Copyright 2026 The synrecon Authors
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

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <sys/wait.h>

#include "doctest.h"
#include "synrecon/commands.hpp"
#include "synrecon/config.hpp"
#include "test_util.hpp"

using namespace synrecon;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void spit(const std::string& path, const std::string& text) { std::ofstream(path, std::ios::binary) << text; }

int cli(const std::string& args) {
  const std::string cmd = std::string(SYNRECON_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  const int st = std::system(cmd.c_str());
  return WIFEXITED(st) ? WEXITSTATUS(st) : -1;
}

std::string petct_ini(const std::string& out) {
  return "[run]\nexperiment = petct\nseed = 7\nout = " + out +
         "\n[dataset]\nkind = abdomen\ntrain_images = 3\ntrain_patches = 300\ntest_images = 1\ngrid = 32\npixel_mm = 8\n"
         "patch = 8\noverlap = 0.5\n"
         "[geometry]\npet_angles = 30\npet_bins = 48\npet_bin_mm = 8\nct_angles = 30\nct_bins = 64\nct_detector_mm = 10\n"
         "[model]\nlatent_dim = 4\nfeature_dim = 8\nhidden = 16, 12\n"
         "[train]\nepochs = 2\nbatch_size = 32\n"
         "[solver]\nouter_iterations = 2\npet_sub_iterations = 2\nct_sub_iterations = 2\nz_sub_iterations = 5\n"
         "init_iterations = 3\ntune_pet_grid = 1\ntune_ct_grid = 1000\n"
         "[pls]\niterations = 10\ntune_grid = 1000\n"
         "[generate]\ncount = 5\n"
         "[thresholds]\ncheck = false\n";
}

std::string sweep_ini(const std::string& out) {
  return "[run]\nexperiment = eta_sweep\nseed = 7\nout = " + out +
         "\n[dataset]\nkind = glyph\ntrain_images = 40\ntest_images = 2\ngrid = 32\npixel_mm = 1\npatch = 32\n"
         "[model]\nlatent_dim = 4\nfeature_dim = 8\nhidden = 16, 12\n"
         "[train]\nepochs = 2\nbatch_size = 16\n"
         "[denoise]\netas = 0, 0.5, 1\nalternations = 2\nrestarts = 1\n"
         "[thresholds]\ncheck = false\n";
}

}  // namespace

TEST_CASE("config errors carry file and line") {
  try {
    config::parse("[run]\nseed = 3\n\n[dataset]\nbogus = 1\n", "a.ini");
    FAIL("expected an error");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("a.ini:5") != std::string::npos);
  }
  CHECK_THROWS_AS(config::parse("[nosuch]\n"), ConfigError);
  CHECK_THROWS_AS(config::parse("[run]\nseed = 1\nseed = 2\n"), ConfigError);
  CHECK_THROWS_AS(config::parse("[run]\nseed = x\n"), ConfigError);
  CHECK_THROWS_AS(config::parse("seed = 1\n"), ConfigError);
  CHECK_THROWS_AS(config::parse("[dataset]\nkind = idx\n"), ConfigError);
  CHECK_THROWS_AS(config::parse("[solver]\neta = 2\n"), ConfigError);
}

TEST_CASE("config echo round-trips") {
  const auto c = config::parse(petct_ini("/tmp/x") + "[denoise]\netas = 0, 0.1, 0.333333333333\n", "t");
  const auto text = config::echo(c);
  const auto d = config::parse(text, "echo");
  CHECK(config::echo(d) == text);
  CHECK(config::hash(d) == config::hash(c));
  CHECK(d.etas[2] == 0.333333333333);
  CHECK(d.hidden == std::vector<int>{16, 12});
  auto e = c;
  e.seed = 8;
  CHECK(config::hash(e) != config::hash(c));
}

TEST_CASE("exit codes follow the error class") {
  CHECK(commands::exit_code(ConfigError("x")) == 2);
  CHECK(commands::exit_code(ParameterError("x")) == 2);
  CHECK(commands::exit_code(IoError("x")) == 3);
  CHECK(commands::exit_code(ShapeError("x")) == 3);
  CHECK(commands::exit_code(NumericError("x")) == 4);
  CHECK(commands::exit_code(std::runtime_error("x")) == 1);

  testutil::TempDir dir;
  spit(dir.file("ok.ini"), petct_ini(dir.file("out")));
  spit(dir.file("bad.ini"), petct_ini(dir.file("out")) + "[run]\nbogus = 1\n");
  CHECK(cli("") == 2);
  CHECK(cli("--config " + dir.file("ok.ini")) == 2);
  CHECK(cli("--config " + dir.file("ok.ini") + " nosuch") == 2);
  CHECK(cli("--config " + dir.file("bad.ini") + " make-data") == 2);
  CHECK(cli("--config " + dir.file("missing.ini") + " make-data") == 2);
  CHECK(cli("--config " + dir.file("ok.ini") + " reconstruct") == 3);
  CHECK(cli("--config " + dir.file("ok.ini") + " denoise") == 2);
}

TEST_CASE("the PET/CT pipeline is byte-identical on rerun") {
  testutil::TempDir dir;
  const std::string out = dir.file("out");
  spit(dir.file("p.ini"), petct_ini(out));
  const std::string base = "--config " + dir.file("p.ini") + " --threads 1 ";
  for (const char* cmd : {"make-data", "train", "generate", "reconstruct", "mismatch", "tune"}) {
    CAPTURE(cmd);
    REQUIRE(cli(base + cmd) == 0);
    const auto first = slurp(out + "/manifest.txt");
    REQUIRE(cli(base + cmd) == 0);
    CHECK(slurp(out + "/manifest.txt") == first);
    CHECK(first.find("command " + std::string(cmd)) != std::string::npos);
  }
  // Two branches give two tiles of ceil(sqrt(5)) = 3 columns.
  CHECK(std::filesystem::exists(out + "/generate_ch1.pgm"));
  CHECK(std::filesystem::exists(out + "/generate_ch2.pgm"));
  CHECK(!std::filesystem::exists(out + "/generate_ch3.pgm"));
  CHECK(slurp(out + "/generate_ch1.pgm").find("\n24 16\n") != std::string::npos);
  const auto echoed = slurp(out + "/config.ini");
  CHECK(config::echo(config::parse(echoed)) == echoed);
  CHECK(echoed.find("threads = 1\n") != std::string::npos);
  CHECK(slurp(out + "/loss.csv").rfind("# learning_rate=", 0) == 0);

  SUBCASE("seed override changes the artifacts") {
    const auto before = slurp(out + "/train_patches.mvps");
    REQUIRE(cli(base + "--seed 8 make-data") == 0);
    CHECK(slurp(out + "/train_patches.mvps") != before);
  }
  SUBCASE("generate rejects a zero count") {
    auto text = petct_ini(out);
    text.replace(text.find("count = 5"), 9, "count = 0");
    spit(dir.file("g.ini"), text);
    CHECK(cli("--config " + dir.file("g.ini") + " generate") == 2);
  }
  SUBCASE("eval of an image against itself reports inf") {
    auto text = petct_ini(out) + "[eval]\nreference = " + out + "/test_0_ch1.pgm\nimages = " + out + "/test_0_ch1.pgm\n";
    spit(dir.file("e.ini"), text);
    REQUIRE(cli("--config " + dir.file("e.ini") + " eval") == 0);
    const auto csv = slurp(out + "/eval.csv");
    CHECK(csv.find(",inf,1\n") != std::string::npos);
  }
}

TEST_CASE("the eta sweep pipeline runs and is byte-identical on rerun") {
  testutil::TempDir dir;
  const std::string out = dir.file("out");
  spit(dir.file("s.ini"), sweep_ini(out));
  const std::string base = "--config " + dir.file("s.ini") + " ";
  for (const char* cmd : {"make-data", "train", "denoise"}) {
    CAPTURE(cmd);
    REQUIRE(cli(base + cmd) == 0);
    const auto first = slurp(out + "/manifest.txt");
    REQUIRE(cli(base + cmd) == 0);
    CHECK(slurp(out + "/manifest.txt") == first);
  }
  for (const char* f : {"eta_sweep.csv", "latent_distance.csv", "pca.csv", "denoise_ch1.pgm", "denoise_ch2.pgm"})
    CHECK(std::filesystem::exists(out + "/" + f));
  CHECK(slurp(out + "/eta_sweep.csv").rfind("eta,psnr_ch1,psnr_ch2\n", 0) == 0);
  CHECK(cli(base + "reconstruct") == 2);
}

TEST_CASE("train resumes to the same model as an uninterrupted run") {
  testutil::TempDir dir;
  auto ini = [&](const std::string& out, int epochs, bool resume) {
    auto t = sweep_ini(out);
    t.replace(t.find("epochs = 2"), 10, "epochs = " + std::to_string(epochs) + "\nresume = " + (resume ? "true" : "false"));
    return t;
  };
  spit(dir.file("a.ini"), ini(dir.file("a"), 4, false));
  spit(dir.file("b2.ini"), ini(dir.file("b"), 2, false));
  spit(dir.file("b4.ini"), ini(dir.file("b"), 4, true));
  for (const char* f : {"a.ini", "b2.ini"}) REQUIRE(cli("--config " + dir.file(f) + " make-data") == 0);
  REQUIRE(cli("--config " + dir.file("a.ini") + " train") == 0);
  REQUIRE(cli("--config " + dir.file("b2.ini") + " train") == 0);
  REQUIRE(cli("--config " + dir.file("b4.ini") + " train") == 0);
  CHECK(slurp(dir.file("a") + "/model.mvae") == slurp(dir.file("b") + "/model.mvae"));
  CHECK(slurp(dir.file("a") + "/loss.csv") == slurp(dir.file("b") + "/loss.csv"));
}
