// Exit-code and contract tests against the built CLI binary.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include "neid/png_io.hpp"
#include "neid/rng.hpp"
#include "oracles.hpp"

namespace fs = std::filesystem;

#ifndef NEID_CLI_PATH
#error "NEID_CLI_PATH must point at the neid binary"
#endif

namespace {

int run(const std::string& args) {
  const std::string cmd =
      std::string(NEID_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

fs::path fresh_dir(const std::string& name) {
  fs::path d = fs::temp_directory_path() / "neid_cli_tests" / name;
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

const fs::path& workspace() {
  static const fs::path dir = [] {
    fs::path d = fresh_dir("workspace");
    REQUIRE(run("synth --out " + (d / "data").string() + " --count 3 --seed 9") == 0);
    return d;
  }();
  return dir;
}

std::string tiny_train_flags(const fs::path& out, int seed,
                              const std::string& eval_flags = "--eval-every 0") {
  return "train --data " + (workspace() / "data").string() +
         " --layout generic --out " + out.string() +
         " --variant full --seed " + std::to_string(seed) +
         " --epochs 1 --steps-per-epoch 2 --batch-size 2 --levels 2"
         " --base-channels 8 --patch 64 " + eval_flags;
}

}  // namespace

TEST_CASE("--help exits 0 on every command") {
  CHECK(run("--help") == 0);
  for (const std::string sub : {"train", "eval", "enhance", "synth", "report"}) {
    CHECK(run(sub + " --help") == 0);
  }
}

TEST_CASE("usage errors exit 1") {
  CHECK(run("") == 1);                       // missing subcommand
  CHECK(run("explode") == 1);                // unknown subcommand
  CHECK(run("synth") == 1);                  // missing required flag
  CHECK(run("synth --out x --bogus-flag") == 1);
  const fs::path out = fresh_dir("usage");
  CHECK(run("train --data d --out " + out.string() + " --variant bogus") == 1);
}

TEST_CASE("runtime errors exit 2") {
  const fs::path d = fresh_dir("runtime");
  CHECK(run("eval --checkpoint " + (d / "none").string() + " --data " +
            (d / "nodata").string()) == 2);
  CHECK(run("enhance --checkpoint " + (d / "none").string() + " --input x.png"
            " --output y.png") == 2);
  // empty dataset
  fs::create_directories(d / "empty" / "low");
  fs::create_directories(d / "empty" / "high");
  const fs::path out = d / "run";
  CHECK(run("train --data " + (d / "empty").string() + " --out " + out.string()) == 2);
}

TEST_CASE("train produces checkpoints and is flag-level deterministic") {
  const fs::path run_a = fresh_dir("det_a");
  const fs::path run_b = fresh_dir("det_b");
  REQUIRE(run(tiny_train_flags(run_a, 3)) == 0);
  REQUIRE(run(tiny_train_flags(run_b, 3)) == 0);
  CHECK(fs::exists(run_a / "checkpoints" / "latest" / "manifest.json"));
  CHECK(fs::exists(run_a / "checkpoints" / "latest" / "params.bin"));
  const std::string trace_a = slurp(run_a / "logs" / "loss.jsonl");
  CHECK_FALSE(trace_a.empty());
  CHECK(trace_a == slurp(run_b / "logs" / "loss.jsonl"));
  CHECK(slurp(run_a / "checkpoints" / "latest" / "params.bin") ==
        slurp(run_b / "checkpoints" / "latest" / "params.bin"));
}

TEST_CASE("enhance doubles a 128x128 input with --no-downsample") {
  const fs::path d = fresh_dir("enhance");
  const fs::path run_dir = d / "run";
  REQUIRE(run(tiny_train_flags(run_dir, 4)) == 0);

  neid::Rng rng(5);
  neid::Image low = oracle::random_image(rng, 128, 128);
  neid::save_png(low, d / "in.png");
  REQUIRE(run("enhance --checkpoint " +
              (run_dir / "checkpoints" / "latest").string() + " --input " +
              (d / "in.png").string() + " --output " + (d / "out.png").string() +
              " --no-downsample") == 0);
  neid::Image out = neid::load_png(d / "out.png");
  CHECK(out.height == 256);
  CHECK(out.width == 256);

  // default pipeline keeps the input geometry
  REQUIRE(run("enhance --checkpoint " +
              (run_dir / "checkpoints" / "latest").string() + " --input " +
              (d / "in.png").string() + " --output " + (d / "out2.png").string()) == 0);
  neid::Image out2 = neid::load_png(d / "out2.png");
  CHECK(out2.height == 128);
  CHECK(out2.width == 128);
}

TEST_CASE("eval and report run end to end on a trained checkpoint") {
  const fs::path d = fresh_dir("pipeline");
  const fs::path run_dir = d / "run";
  REQUIRE(run(tiny_train_flags(run_dir, 6, "--eval-every 1 --eval-mode patch")) == 0);
  REQUIRE(run("eval --checkpoint " + (run_dir / "checkpoints" / "latest").string() +
              " --data " + (workspace() / "data").string() +
              " --mode patch --out " + (d / "report.json").string() +
              " --csv " + (d / "report.csv").string()) == 0);
  CHECK(fs::exists(d / "report.json"));
  CHECK(slurp(d / "report.csv").rfind("id,psnr,ssim", 0) == 0);

  REQUIRE(run("report --runs " + run_dir.string() + " --out " + (d / "rep").string()) == 0);
  CHECK(fs::exists(d / "rep" / "loss_curve.svg"));
  CHECK(fs::exists(d / "rep" / "psnr_curve.svg"));
  CHECK(fs::exists(d / "rep" / "table.md"));
  const std::string table = slurp(d / "rep" / "table.md");
  CHECK(table.find("| Run |") != std::string::npos);
  CHECK(table.find("run") != std::string::npos);
}
