#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <map>
#include <sstream>

#include "phantom/cli.hpp"
#include "phantom/kitti_io.hpp"

using namespace phantom;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run run(std::vector<std::string> args) {
  args.insert(args.begin(), "phantom");
  std::ostringstream out;
  std::ostringstream err;
  const int code = cli(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch() {
  static const fs::path p = [] {
    const fs::path d = fs::temp_directory_path() / "phantom_test_cli";
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return p;
}

std::map<std::string, std::string> tree(const fs::path& root) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file()) files[fs::relative(e.path(), root).string()] = read_text(e.path());
  }
  return files;
}

void prepare() {
  static bool done = false;
  if (done) return;
  const fs::path d = scratch();
  REQUIRE(run({"synth", "--out", (d / "data").string(), "--count", "8", "--seed", "4"}).code == 0);
  REQUIRE(run({"extract-templates", "--data-root", (d / "data").string(), "--out", (d / "lib").string()}).code ==
          0);
  done = true;
}

}  // namespace

TEST_CASE("usage errors exit 2 with one line") {
  for (const auto& args : std::vector<std::vector<std::string>>{
           {}, {"frobnicate"}, {"campaign", "--bogus"}, {"campaign", "--attempts", "x"},
           {"campaign", "--range", "40:20", "--data-root", "a", "--library", "b", "--out", "c"},
           {"inject", "--data-root", "a"}}) {
    const Run r = run(args);
    CHECK(r.code == 2);
    CHECK(std::count(r.err.begin(), r.err.end(), '\n') == 1);
  }
  CHECK(run({"--help"}).code == 0);
}

TEST_CASE("operational errors exit 1 with one line") {
  const Run r = run({"campaign", "--data-root", "/nonexistent", "--library", "/nonexistent", "--out",
                     (scratch() / "x").string()});
  CHECK(r.code == 1);
  CHECK(std::count(r.err.begin(), r.err.end(), '\n') == 1);
  CHECK(run({"evaluate", "--manifests", "/nonexistent"}).code == 1);
}

TEST_CASE("inject twice with the same seed gives identical trees") {
  prepare();
  const fs::path d = scratch();
  for (const char* name : {"inj_a", "inj_b"}) {
    const Run r = run({"inject", "--data-root", (d / "data").string(), "--scene", "000003", "--library",
                       (d / "lib").string(), "--class", "Pedestrian", "--seed", "99", "--out",
                       (d / name).string()});
    REQUIRE(r.code == 0);
    CHECK(r.out.find("consistency 1.0000") != std::string::npos);
  }
  CHECK(tree(d / "inj_a") == tree(d / "inj_b"));
  CHECK(run({"replay", "--data-root", (d / "inj_a").string()}).code == 0);
}

TEST_CASE("campaign, detect, evaluate and render work together") {
  prepare();
  const fs::path d = scratch();
  const std::string camp = (d / "camp").string();
  Run r = run({"campaign", "--data-root", (d / "data").string(), "--library", (d / "lib").string(), "--out",
               camp, "--attempts", "4", "--seed", "1", "--workers", "2", "--range", "20:40",
               "--confidence-threshold", "0.5", "--overlap-iou", "0.1"});
  REQUIRE(r.code == 0);
  CHECK(r.out.find("Object Class") != std::string::npos);

  r = run({"detect", "--data-root", camp, "--out", (d / "det").string()});
  REQUIRE(r.code == 0);
  r = run({"evaluate", "--manifests", camp + "/manifests", "--results", (d / "det").string()});
  REQUIRE(r.code == 0);
  CHECK(r.out.find("Total") != std::string::npos);

  r = run({"render", "--mode", "bev", "--data-root", camp, "--scene", "000000", "--manifest",
           camp + "/manifests/000000.json", "--results", (d / "det" / "000000.txt").string(), "--out",
           (d / "bev.png").string()});
  CHECK(r.code == 0);
  CHECK(fs::exists(d / "bev.png"));
  r = run({"render", "--mode", "overlay", "--data-root", camp, "--scene", "000000", "--manifest",
           camp + "/manifests/000000.json", "--out", (d / "overlay.png").string()});
  CHECK(r.code == 0);
  CHECK(run({"render", "--mode", "sideways"}).code == 2);
}

TEST_CASE("evaluate on the reference fixture prints the expected totals") {
  const Run r = run({"evaluate", "--data-root", PHANTOM_FIXTURE_DIR "/reference_summary"});
  REQUIRE(r.code == 0);
  CHECK(r.out.find("88.0%") != std::string::npos);
  CHECK(r.out.find("83.0%") != std::string::npos);
  CHECK(r.out.find("85.5%") != std::string::npos);
  CHECK(r.out.find("0.66") != std::string::npos);
}

TEST_CASE("config file feeds thresholds") {
  const fs::path cfg = scratch() / "strict.cfg";
  write_text(cfg, "# everything fails\nevaluation.confidence_threshold = 0.99\n");
  const Run r = run({"evaluate", "--data-root", PHANTOM_FIXTURE_DIR "/reference_summary", "--config", cfg.string()});
  CHECK(r.code == 0);
  write_text(cfg, "broken line\n");
  CHECK(run({"evaluate", "--data-root", PHANTOM_FIXTURE_DIR "/reference_summary", "--config", cfg.string()}).code == 1);
}
