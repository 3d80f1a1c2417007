#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <fstream>
#include <nlohmann/json.hpp>

#include "patchcert/io.hpp"
#include "patchcert/scenes.hpp"

using namespace patchcert;
namespace fs = std::filesystem;

namespace {

const fs::path kRoot = fs::temp_directory_path() / "patchcert-test-cli";

int run(const std::string& args) {
  const std::string cmd = std::string(PATCHCERT_CLI) + " " + args + " >" +
                          (kRoot / "stdout.txt").string() + " 2>" +
                          (kRoot / "stderr.txt").string();
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  const auto bytes = io::read_bytes(p);
  return {bytes.begin(), bytes.end()};
}

struct Fresh {
  Fresh() {
    fs::remove_all(kRoot);
    fs::create_directories(kRoot);
  }
};

}  // namespace

TEST_CASE_FIXTURE(Fresh, "gen-masks writes a verified mask set") {
  const auto out = kRoot / "m";
  REQUIRE(run("gen-masks --height 20 --width 20 --patch-h 4 --patch-w 4 --scheme 3mask --out " +
              out.string()) == 0);
  CHECK(fs::exists(out / "mask_006.pgm"));
  const auto meta = nlohmann::json::parse(slurp(out / "maskset.json"));
  CHECK(meta["K"] == 7);
  CHECK(meta["T"] == 3);
  CHECK(slurp(kRoot / "stdout.txt").find("T=3") != std::string::npos);
}

TEST_CASE_FIXTURE(Fresh, "usage errors exit with 1") {
  CHECK(run("") == 1);
  CHECK(run("gen-masks --height 4 --width 4 --patch-h 5 --patch-w 1 --out " +
            (kRoot / "x").string()) == 1);
  CHECK(run("gen-masks --height 4 --width 4 --patch-frac 0.1 --patch-h 2 --out x") == 1);
  CHECK(run("certify --image /nonexistent.png --masks /nonexistent --out x") == 1);
}

TEST_CASE_FIXTURE(Fresh, "certify a file, then a directory with several workers") {
  const auto masks = kRoot / "m";
  REQUIRE(run("gen-masks --height 16 --width 16 --patch-h 3 --patch-w 3 --scheme col --out " +
              masks.string()) == 0);
  fs::create_directories(kRoot / "imgs" / "nested");
  io::write_png(kRoot / "imgs" / "a.png", synthetic_scene(16, 16, 1));
  io::write_png(kRoot / "imgs" / "b.png", synthetic_scene(16, 16, 2));
  io::write_png(kRoot / "imgs" / "nested" / "c.png", synthetic_scene(16, 16, 3));

  REQUIRE(run("certify --image " + (kRoot / "imgs" / "a.png").string() + " --masks " +
              masks.string() + " --colorize --out " + (kRoot / "single").string()) == 0);
  for (const char* f : {"segmentation.pgm", "cert.pgm", "cert.json", "certified.png"})
    CHECK(fs::exists(kRoot / "single" / f));
  const auto cert = nlohmann::json::parse(slurp(kRoot / "single" / "cert.json"));
  CHECK(cert["mode"] == "recovery");
  CHECK(cert["K"] == 5);
  CHECK(cert["T"] == 2);

  REQUIRE(run("certify --image " + (kRoot / "imgs").string() + " --masks " + masks.string() +
              " --jobs 3 --out " + (kRoot / "j3").string()) == 0);
  REQUIRE(run("certify --image " + (kRoot / "imgs").string() + " --masks " + masks.string() +
              " --jobs 1 --out " + (kRoot / "j1").string()) == 0);
  for (const char* rel : {"a", "b", "nested/c"})
    for (const char* f : {"segmentation.pgm", "cert.pgm", "cert.json"})
      CHECK(slurp(kRoot / "j3" / rel / f) == slurp(kRoot / "j1" / rel / f));
  CHECK(slurp(kRoot / "single" / "cert.pgm") == slurp(kRoot / "j1" / "a" / "cert.pgm"));
}

TEST_CASE_FIXTURE(Fresh, "certify through the process backend, and backend failures exit 3") {
  const auto masks = kRoot / "m";
  REQUIRE(run("gen-masks --height 12 --width 12 --patch-h 2 --patch-w 2 --scheme det-col --out " +
              masks.string()) == 0);
  io::write_png(kRoot / "x.png", synthetic_scene(12, 12, 4));
  const std::string common = "certify --image " + (kRoot / "x.png").string() + " --masks " +
                             masks.string() + " --mode detection";
  REQUIRE(run(common + " --out " + (kRoot / "toy").string()) == 0);
  REQUIRE(run(common + " --probe-determinism --backend \"process:" + PATCHCERT_STUB +
              " --mode toy\" --out " + (kRoot / "proc").string()) == 0);
  CHECK(slurp(kRoot / "toy" / "cert.pgm") == slurp(kRoot / "proc" / "cert.pgm"));
  CHECK(slurp(kRoot / "toy" / "segmentation.pgm") == slurp(kRoot / "proc" / "segmentation.pgm"));

  CHECK(run(common + " --backend \"process:" + PATCHCERT_STUB + " --mode toy --wrong-dims\" --out " +
            (kRoot / "bad").string()) == 3);
  CHECK(run(common + " --backend \"process:" + PATCHCERT_STUB +
            " --mode toy --nondeterministic\" --out " + (kRoot / "nd").string()) == 3);
  CHECK(run(common + " --backend \"process:" + PATCHCERT_STUB + " --hang\" --timeout-ms 200 --out " +
            (kRoot / "hang").string()) == 3);
}

TEST_CASE_FIXTURE(Fresh, "too few masks for two patches exits with 2") {
  const auto masks = kRoot / "m";
  REQUIRE(run("gen-masks --height 12 --width 12 --patch-h 2 --patch-w 2 --scheme col --out " +
              masks.string()) == 0);
  io::write_png(kRoot / "x.png", synthetic_scene(12, 12, 4));
  CHECK(run("certify --image " + (kRoot / "x.png").string() + " --masks " + masks.string() +
            " --n-patches 2 --out " + (kRoot / "o").string()) == 2);
}

TEST_CASE_FIXTURE(Fresh, "eval matches files by stem and reads config files") {
  const auto gt = kRoot / "gt";
  const auto pred = kRoot / "pred";
  fs::create_directories(gt);
  fs::create_directories(pred / "img1");
  io::write_segmap(gt / "img1.pgm", SegMap(1, 4, 2, std::vector<Label>{0, 0, 0, 1}));
  io::write_segmap(pred / "img1" / "segmentation.pgm",
                   SegMap(1, 4, 2, std::vector<Label>{0, 0, 1, 0}));
  BinaryMap cert(1, 4, true);
  io::write_binary_map(pred / "img1" / "cert.pgm", cert);

  {
    std::ofstream cfg(kRoot / "cfg.json");
    cfg << R"({"eval": {"num-classes": 2, "big-threshold": 0.5}})";
  }
  const std::string args = "eval --config " + (kRoot / "cfg.json").string() + " --pred " +
                           pred.string() + " --cert " + pred.string() + " --gt " + gt.string() +
                           " --out " + (kRoot / "eval.json").string();
  REQUIRE(run(args) == 0);
  const auto j = nlohmann::json::parse(slurp(kRoot / "eval.json"));
  CHECK(j["per_class"][0]["TP"] == 2);
  CHECK(j["per_class"][0]["FN"] == 1);
  CHECK(j["per_class"][0]["FP"] == 1);
  CHECK(j["per_class"][0]["IoU"].get<double>() == doctest::Approx(0.5));
  CHECK(j["big_classes"]["threshold"].get<double>() == doctest::Approx(0.5));
  CHECK(j["big_classes"]["classes"] == nlohmann::json::array({0}));
  CHECK(j["dataset"]["%C"].get<double>() == doctest::Approx(0.5));

  // command-line flags beat the config file
  REQUIRE(run(args + " --big-threshold 0.1") == 0);
  const auto k = nlohmann::json::parse(slurp(kRoot / "eval.json"));
  CHECK(k["big_classes"]["classes"] == nlohmann::json::array({0, 1}));

  fs::remove(pred / "img1" / "segmentation.pgm");
  CHECK(run(args) == 1);
}

TEST_CASE_FIXTURE(Fresh, "audit output is byte-identical across runs") {
  const std::string args =
      "audit --scheme 4mask --height 12 --width 12 --patch-h 2 --patch-w 2 --battery 6 --seed 4 "
      "--attack-budget 30 --out ";
  REQUIRE(run(args + (kRoot / "a1").string()) == 0);
  REQUIRE(run(args + (kRoot / "a2").string()) == 0);
  CHECK(slurp(kRoot / "a1" / "audit.json") == slurp(kRoot / "a2" / "audit.json"));
  CHECK(fs::exists(kRoot / "a1" / "timing.json"));
  const auto j = nlohmann::json::parse(slurp(kRoot / "a1" / "audit.json"));
  CHECK(j["violations"] == 0);
  CHECK(j["results"].size() == 3u);
}
