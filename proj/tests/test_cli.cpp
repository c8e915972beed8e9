#include <doctest.h>

#include <sstream>
#include <string>
#include <vector>

#include "sheetwarp/cli.hpp"
#include "sheetwarp/io.hpp"
#include "sheetwarp/manifest.hpp"

using namespace sheetwarp;

namespace {

struct Run {
  int code;
  std::string out, err;
};

Run cli(std::vector<std::string> args) {
  args.insert(args.begin(), "sheetwarp");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int rc = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {rc, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("sheetwarp_cli_test_" + name);
  fs::remove_all(p);
  return p;
}

std::vector<std::string> small_simgen(const fs::path& out, int frames, const std::string& seed = "1") {
  return {"simgen",   "-o",       out.string(), "--frames",     std::to_string(frames), "--width", "96",
          "--height", "64",       "--seed",     seed,           "--lidar-rays",         "1500"};
}

std::size_t count_prefix(const DatasetManifest& m, const std::string& prefix) {
  std::size_t n = 0;
  for (const auto& [tag, k] : m.provenance_counts())
    if (tag.rfind(prefix, 0) == 0) n += k;
  return n;
}

}  // namespace

TEST_CASE("usage errors exit 1") {
  CHECK(cli({}).code == 1);
  CHECK(cli({"transform", "--bogus"}).code == 1);
  CHECK(cli({"sweep", "--axis", "roll"}).code == 1);
  CHECK(cli({"simgen"}).code == 1);  // no output
  CHECK(cli({"--help"}).code == 0);
}

TEST_CASE("simgen is deterministic and round-trips") {
  const fs::path a = scratch("sg_a"), b = scratch("sg_b");
  REQUIRE(cli(small_simgen(a, 3)).code == 0);
  REQUIRE(cli(small_simgen(b, 3)).code == 0);
  const auto m = DatasetManifest::load(a);
  CHECK(m.frames.size() == 3);
  m.validate(a);
  for (const auto& r : m.frames) {
    const Frame f = load_frame(a, r, m.rig.camera);
    CHECK(f.image.width() == 96);
    CHECK(f.lidar.size() > 100);
    CHECK(io::read_text(a / r.image) == io::read_text(b / r.image));
  }
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST_CASE("transform, mix and metrics") {
  const fs::path src = scratch("src"), tr = scratch("tr"), mixed = scratch("mix"), csv = scratch("m.csv");
  REQUIRE(cli(small_simgen(src, 4, "5")).code == 0);
  const Run t = cli({"transform", "--input", src.string(), "-o", tr.string(), "--height", "0.2", "--grid", "17x17"});
  REQUIRE(t.code == 0);
  CHECK(count_prefix(DatasetManifest::load(tr), "transformed") == 4);

  const Run m = cli({"mix", "--source", src.string(), "--transformed", tr.string(), "--ratio", "0.5", "-o",
                     mixed.string()});
  REQUIRE(m.code == 0);
  CHECK(m.out.find("source,2\n") != std::string::npos);
  const auto mm = DatasetManifest::load(mixed);
  CHECK(count_prefix(mm, "transformed") == 2);
  CHECK(count_prefix(mm, "source") == 2);

  const Run met = cli({"metrics", "--pred", src.string(), "--gt", src.string()});
  REQUIRE(met.code == 0);
  CHECK(met.out.rfind("frame,im_l1,psnr_db,ssim,depth_l1\n", 0) == 0);
  std::istringstream lines(met.out);
  std::string line;
  int rows = -1;
  while (std::getline(lines, line)) ++rows;
  CHECK(rows == 4);

  CHECK(cli({"metrics", "--pred", tr.string(), "--gt", src.string(), "-o", csv.string()}).code == 0);
  CHECK(fs::exists(csv));
  for (const auto& p : {src, tr, mixed, csv}) fs::remove_all(p);
}

TEST_CASE("augment, swap and refine") {
  const fs::path src = scratch("src2"), aug = scratch("aug"), sw = scratch("swap"), ref = scratch("ref");
  REQUIRE(cli(small_simgen(src, 2, "8")).code == 0);
  REQUIRE(cli({"augment-extrinsics", "--input", src.string(), "--bounds", "pitch:-3:3,yaw:-5:5", "-o", aug.string()})
              .code == 0);
  const auto am = DatasetManifest::load(aug);
  CHECK(am.frames[0].flags.back() == "extrinsic-augmented");
  CHECK(cli({"augment-extrinsics", "--input", src.string(), "--bounds", "pitch:3:-3", "-o", aug.string()}).code == 1);

  REQUIRE(cli({"swap-extrinsics", "--input", src.string(), "-o", sw.string()}).code == 0);
  CHECK(DatasetManifest::load(sw).provenance_counts().at("source-star") == 2);

  REQUIRE(cli({"refine", "--input", src.string(), "-o", ref.string(), "--grid", "9x9", "--iters", "20"}).code == 0);
  const auto m = DatasetManifest::load(src);
  CHECK(fs::exists(ref / (m.frames[0].id + ".sheet")));
  CHECK(io::read_text(ref / (m.frames[0].id + "_trace.csv")).rfind("iter,loss\n", 0) == 0);
  CHECK(cli({"refine", "--input", src.string(), "-o", ref.string(), "--frame", "nope"}).code == 1);
  for (const auto& p : {src, aug, sw, ref}) fs::remove_all(p);
}
