#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "semcal/json_io.hpp"
#include "semcal/semantic_io.hpp"
#include "test_util.hpp"

using namespace semcal;

namespace {

std::string tool_path() {
  const char* env = std::getenv("SEMCAL_TOOL");
  return env ? env : "";
}

int run(const std::string& args, const std::string& log = "/dev/null") {
  const std::string cmd = tool_path() + " " + args + " >" + log + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(in)), {});
}

}  // namespace

TEST_CASE("cli workflows" * doctest::skip(tool_path().empty())) {
  TempDir dir("cli");
  const std::string scene = dir.file("scene");
  REQUIRE(run("synth --out " + scene + " --seed 3 --clusters 4") == 0);

  SUBCASE("synth is reproducible and validates flags") {
    const std::string again = dir.file("again");
    CHECK(run("synth --out " + again + " --seed 3 --clusters 4") == 0);
    CHECK(slurp(scene + "/cloud.csv") == slurp(again + "/cloud.csv"));
    CHECK(slurp(scene + "/mask.pgm") == slurp(again + "/mask.pgm"));
    CHECK(slurp(scene + "/gt.json") == slurp(again + "/gt.json"));

    CHECK(run("synth --out " + dir.file("bad") + " --clusters 0") == 2);
  }

  SUBCASE("static calibration succeeds and reports metrics") {
    const std::string out = dir.file("static_run");
    const int code = run("calibrate-static --cloud " + scene +
                         "/cloud.csv --mask " + scene + "/mask.pgm --intrinsics " +
                         scene + "/intrinsics.txt --init 0.15,-0.14,0.35,95,-4,86" +
                         " --out " + out + " --gt " + scene + "/gt.json");
    CHECK(code == 0);
    const CalibrationResult result = load_result_json(out + "/result.json");
    CHECK(result.status != CalibrationStatus::Failed);
    CHECK(result.trace.size() == 60);
    CHECK(slurp(out + "/manifest.json").find("calibrate-static") != std::string::npos);
    CHECK(std::filesystem::exists(out + "/metrics.json"));

    // Re-running reproduces result.json bytes.
    const std::string out2 = dir.file("static_run2");
    REQUIRE(run("calibrate-static --cloud " + scene + "/cloud.csv --mask " +
                scene + "/mask.pgm --intrinsics " + scene +
                "/intrinsics.txt --init 0.15,-0.14,0.35,95,-4,86 --out " + out2) == 0);
    CHECK(slurp(out + "/result.json") == slurp(out2 + "/result.json"));
  }

  SUBCASE("io and usage failures map to exit codes") {
    CHECK(run("calibrate-static --cloud " + scene + "/cloud.csv --mask " +
              dir.file("missing.pgm") + " --intrinsics " + scene +
              "/intrinsics.txt --init 0,0,0,90,0,90 --out " + dir.file("x")) == 3);

    const std::string log = dir.file("absent.log");
    CHECK(run("calibrate-static --cloud " + scene + "/cloud.csv --mask " + scene +
              "/mask.pgm --intrinsics " + scene +
              "/intrinsics.txt --class-id-mask 99 --init 0,0,0,90,0,90 --out " +
              dir.file("y"), log) == 4);
    CHECK(slurp(log).find("class") != std::string::npos);

    CHECK(run("calibrate-static --mask " + scene + "/mask.pgm --intrinsics " +
              scene + "/intrinsics.txt --init 0,0,0,90,0,90 --out " +
              dir.file("z")) == 2);
  }

  SUBCASE("joint calibration guards zero excitation and monocular scale") {
    // A static scene: gt velocity is zero, so the joint stage must refuse.
    std::ofstream frames(dir.file("frames.txt"));
    frames << "cloud.csv,mask.pgm,velocity.csv\n";
    frames.close();
    std::error_code ec;
    std::filesystem::copy(dir.file("frames.txt"), scene + "/frames.txt", ec);

    const std::string sr = dir.file("sr");
    REQUIRE(run("calibrate-static --cloud " + scene + "/cloud.csv --mask " +
                scene + "/mask.pgm --intrinsics " + scene +
                "/intrinsics.txt --init " + scene + "/gt.json --out " + sr) == 0);

    CHECK(run("calibrate-joint --frames " + scene + "/frames.txt --intrinsics " +
              scene + "/intrinsics.txt --static-result " + sr +
              "/result.json --out " + dir.file("jz")) == 5);

    CHECK(run("calibrate-joint --frames " + scene + "/frames.txt --intrinsics " +
              scene + "/intrinsics.txt --static-result " + sr +
              "/result.json --velocity-source correspondences --out " +
              dir.file("jc")) == 2);
  }

  SUBCASE("joint calibration recovers the delay end to end") {
    std::ofstream frames(dir.file("moving_frames.txt"));
    for (int f = 0; f < 3; ++f) {
      const std::string moving = dir.file("moving" + std::to_string(f));
      REQUIRE(run("synth --out " + moving + " --seed " + std::to_string(5 + f) +
                  " --delay 0.1 --velocity 0,0,8") == 0);
      frames << "moving" << f << "/cloud.csv,moving" << f << "/mask.pgm,moving"
             << f << "/correspondences.csv\n";
    }
    frames.close();

    const std::string sr = dir.file("sr2");
    REQUIRE(run("calibrate-static --cloud " + scene + "/cloud.csv --mask " +
                scene + "/mask.pgm --intrinsics " + scene +
                "/intrinsics.txt --init 0.12,-0.17,0.33,93,3,88 --out " + sr) == 0);

    const std::string out = dir.file("joint_run");
    const int code = run("calibrate-joint --frames " + dir.file("moving_frames.txt") +
                         " --intrinsics " + dir.file("moving0") +
                         "/intrinsics.txt --static-result " + sr +
                         "/result.json --velocity-source correspondences "
                         "--speed 8 --out " + out + " --gt " +
                         dir.file("moving0") + "/gt.json");
    CHECK(code == 0);
    const CalibrationResult result = load_result_json(out + "/result.json");
    CHECK(std::abs(result.params.delay - 0.1) < 0.02);
  }

  SUBCASE("eval aggregates mean and median") {
    const std::string out = dir.file("eval_run");
    // Identical result and gt: all metrics zero.
    CHECK(run("eval --result " + scene + "/gt.json --gt " + scene +
              "/gt.json --out " + out) == 0);
    const std::string metrics = slurp(out + "/metrics.txt");
    CHECK(metrics.find("qad_deg_mean=0") != std::string::npos);
    CHECK(metrics.find("atd_cm_median=0") != std::string::npos);
  }

  SUBCASE("render-overlay audits against the mask") {
    const std::string out = dir.file("overlay_run");
    CHECK(run("render-overlay --cloud " + scene + "/cloud.csv --mask " + scene +
              "/mask.pgm --intrinsics " + scene + "/intrinsics.txt --params " +
              scene + "/gt.json --out " + out) == 0);
    CHECK(std::filesystem::exists(out + "/overlay.ppm"));
    const std::string ppm = slurp(out + "/overlay.ppm");
    CHECK(ppm.substr(0, 2) == "P6");
  }
}
