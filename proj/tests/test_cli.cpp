#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <sys/wait.h>

#include <cstdlib>

#include "fixtures.hpp"
#include "json.hpp"
#include "smad/dataset.hpp"

using namespace smad;
namespace fs = std::filesystem;

namespace {

const testing::TempDir& work() {
  static testing::TempDir dir("cli");
  return dir;
}

int run(const std::string& args) {
  const char* cli = SMAD_CLI_PATH;
  std::string cmd = std::string("\"") + cli + "\" " + args + " >>\"" + (work().path() / "cli.log").string() + "\" 2>&1";
  int status = std::system(cmd.c_str());
  REQUIRE(WIFEXITED(status));
  return WEXITSTATUS(status);
}

std::string q(const fs::path& p) { return "\"" + p.string() + "\""; }

const testing::Corpus& corpus() {
  static testing::Corpus c = testing::make_corpus(work().path() / "corpus", 16);
  return c;
}

}  // namespace

TEST_CASE("argument errors exit with 1") {
  CHECK(run("--help") == 0);
  CHECK(run("") == 1);
  CHECK(run("frobnicate") == 1);
  CHECK(run("eval --scores x.csv --out o --bogus") == 1);
  CHECK(run("extract --manifest " + q(corpus().manifest_path) + " --method NOPE --out v.csv") == 1);
  write_text_file(work().path() / "nomanifest.json", R"({"features": "RGB"})");
  CHECK(run("loo --config " + q(work().path() / "nomanifest.json")) == 1);
  CHECK(run("train --vectors a.csv --manifest b.csv --out m.json --trees 0") != 0);
}

TEST_CASE("unresolvable data exits with 2") {
  write_text_file(work().path() / "ghost.json", R"({"manifest": "ghost.csv", "output_dir": "out"})");
  CHECK(run("loo --config " + q(work().path() / "ghost.json")) == 2);
  CHECK(run("visualize --image " + q(work().path() / "ghost.png") + " --out " + q(work().path() / "v")) == 2);
  CHECK(run("serve --model " + q(work().path() / "ghost_model.json")) == 2);
}

TEST_CASE("visualize writes maps and a contact sheet") {
  auto dir = work().path() / "vis";
  save_png(work().path() / "face.png", testing::texture(3));
  REQUIRE(run("visualize --image " + q(work().path() / "face.png") + " --out " + q(dir)) == 0);
  for (const char* m : {"ELA", "DFT", "DCT2", "SVD", "SRM"}) {
    auto png = dir / (std::string("face_") + m + ".png");
    REQUIRE(fs::exists(png));
    auto img = load_image(png);
    CHECK(img.width == 180);
    CHECK(img.height == 240);
    auto meta = nlohmann::json::parse(read_text_file(dir / (std::string("face_") + m + ".json")));
    CHECK(meta["display_range"].size() == 2);
  }
  CHECK(fs::exists(dir / "face_contact.png"));

  save_png(work().path() / "flat.png", testing::constant_image(77));
  REQUIRE(run("visualize --image " + q(work().path() / "flat.png") + " --methods SRM --out " + q(dir)) == 0);
  auto srm = load_image(dir / "flat_SRM.png");
  for (auto v : srm.data) CHECK(v == 0);
}

TEST_CASE("preprocess, extract, train, score and eval") {
  auto dir = work().path() / "pipe";
  auto m = q(corpus().manifest_path);
  REQUIRE(run("preprocess --manifest " + m + " --out " + q(dir / "aligned")) == 0);
  CHECK(fs::exists(dir / "aligned" / "aligned.csv"));
  auto side = nlohmann::json::parse(read_text_file(dir / "aligned" / "bf_000.json"));
  CHECK(side["id"] == "bf_000");
  CHECK(side["source_sha256"].get<std::string>().size() == 64);

  auto aligned = q(dir / "aligned" / "aligned.csv");
  REQUIRE(run("extract --manifest " + aligned + " --method ELA --out " + q(dir / "ela.csv")) == 0);
  REQUIRE(run("train --vectors " + q(dir / "ela.csv") + " --manifest " + aligned + " --trees 10 --out " +
              q(dir / "ela.model.json") + " --calibration " + q(dir / "ela.csv")) == 0);
  REQUIRE(run("score --model " + q(dir / "ela.model.json") + " --vectors " + q(dir / "ela.csv") + " --manifest " +
              aligned + " --out " + q(dir / "scores.csv")) == 0);
  REQUIRE(run("eval --scores " + q(dir / "scores.csv") + " --out " + q(dir / "eval")) == 0);
  auto metrics = nlohmann::json::parse(read_text_file(dir / "eval" / "metrics.json"));
  CHECK(metrics["eer"].get<double>() >= 0.0);
  CHECK(metrics["eer"].get<double>() <= 1.0);
  CHECK(fs::exists(dir / "eval" / "det.png"));

  // a model scored against vectors of another method is a data error
  REQUIRE(run("extract --manifest " + aligned + " --method LBP81 --out " + q(dir / "lbp.csv")) == 0);
  CHECK(run("score --model " + q(dir / "ela.model.json") + " --vectors " + q(dir / "lbp.csv") + " --manifest " +
            aligned + " --out " + q(dir / "bad.csv")) == 2);
}

TEST_CASE("loo runs are deterministic") {
  auto cfg = work().path() / "loo.json";
  write_text_file(cfg, "{\"manifest\": " + q(corpus().manifest_path) +
                           ", \"features\": [\"RGB\", \"LBP81\"], \"forest\": {\"n_trees\": 8}, \"cache\": true}");
  REQUIRE(run("loo --config " + q(cfg) + " --out " + q(work().path() / "loo1")) == 0);
  REQUIRE(run("loo --config " + q(cfg) + " --out " + q(work().path() / "loo2") + " --no-cache") == 0);
  auto a = read_text_file(work().path() / "loo1" / "report.json");
  CHECK(a == read_text_file(work().path() / "loo2" / "report.json"));
  CHECK(read_text_file(work().path() / "loo1" / "table.csv") == read_text_file(work().path() / "loo2" / "table.csv"));
  CHECK(fs::exists(work().path() / "loo1" / "cache"));
  CHECK_FALSE(fs::exists(work().path() / "loo2" / "cache"));
  auto report = nlohmann::json::parse(a);
  CHECK(report["cells"].size() == 3 * 2 * 2);
}
